#pragma once

#include <span>
#include <utility>
#include <vector>

#include "m3d/rng.hpp"
#include "m3d/scene.hpp"

namespace m3d {

// Generator settings for one domain: camera, object population statistics,
// appearance statistics, and observation noise.
struct DomainConfig {
  CameraIntrinsics camera;
  std::array<double, 3> obj_dim_mean{4.0, 1.8, 1.6};
  std::array<double, 3> obj_dim_std{0.2, 0.08, 0.05};
  double depth_min = 4.0;
  double depth_max = 60.0;
  double lateral_range = 8.0;  // object centers drawn in [-lateral, lateral]
  double yaw_min = -3.14159265358979323846;
  double yaw_max = 3.14159265358979323846;
  std::array<double, 4> appearance_mean{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> appearance_std{1.0, 1.0, 1.0, 1.0};
  double distractor_rate = 1.0;  // expected distractors per scene
  int objects_min = 1;
  int objects_max = 4;
  double obs_noise_std = 0.3;  // pixels, on u/v/w/h
};

void validate(const DomainConfig& cfg);  // throws ConfigError

// Cross-camera pair loosely shaped like a wide survey camera vs a narrower
// benchmark camera; appearance means shifted by one std between domains.
DomainConfig default_source_domain();
DomainConfig default_target_domain();

// Distractor appearance sits this many stds from the domain object mean.
inline constexpr double kDistractorAppearanceOffset = 2.0;

// Object centers are placed at camera height with this vertical spread; the
// image-inclusion rejection keeps the projection inside the frame.
inline constexpr double kVerticalPlacementStd = 0.4;

// Draws one scene. Object centers are resampled until they project inside
// the image; exceeding 1000 consecutive rejections means the camera and the
// placement ranges are inconsistent and raises ConfigError.
SceneSample generate_scene(Rng& rng, const DomainConfig& cfg);

// n independent scenes from per-scene rng streams split off the master seed,
// so the result does not depend on generation order.
std::vector<SceneSample> generate_dataset(const Rng& master, const DomainConfig& cfg, int n_scenes);

// Records how a view was produced so boxes can be mapped between frames.
// Rescaling leaves 3D boxes untouched; only the flip matters for mapping.
struct TransformRecord {
  bool flipped = false;
  ScaleFactors scale{1.0, 1.0};
};

struct StrongAugConfig {
  double flip_prob = 0.5;
  double erase_prob = 0.1;   // per appearance component
  double tone_lo = 0.8;      // common appearance gain range
  double tone_hi = 1.25;
};

// Horizontal flip of a scene: u -> width - u, gt cx -> -cx, yaw -> pi - yaw.
SceneSample flip_scene(const SceneSample& sample);
Box3D flip_box(const Box3D& box);

// Weak view: scale draw from the set plus coin-flip mirror.
std::pair<SceneSample, TransformRecord> perturb_weak(const SceneSample& sample, Rng& rng,
                                                     std::span<const ScaleFactors> scale_set,
                                                     double flip_prob = 0.5);

// Strong view: coin-flip mirror, common appearance gain, independent
// appearance dropout. Geometry features are never erased.
std::pair<SceneSample, TransformRecord> perturb_strong(const SceneSample& sample, Rng& rng,
                                                       const StrongAugConfig& cfg);

// Maps a box decoded in the teacher's (weak) frame into the student's
// (strong) frame.
Box3D map_to_student_frame(const Box3D& box, const TransformRecord& weak,
                           const TransformRecord& strong);

}  // namespace m3d
