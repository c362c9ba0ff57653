#pragma once

#include <array>
#include <optional>
#include <vector>

#include "m3d/boxes.hpp"
#include "m3d/camera.hpp"

namespace m3d {

inline constexpr int kFeatureDim = 8;

// Candidate feature layout: pixel-space geometry then appearance.
enum FeatureIndex : int {
  kFeatU = 0,  // projected center column, pixels
  kFeatV = 1,  // projected center row, pixels
  kFeatW = 2,  // projected width, pixels
  kFeatH = 3,  // projected height, pixels
  kFeatA0 = 4, // appearance, dimensionless
};

using FeatureVector = std::array<double, kFeatureDim>;

// One observable thing in a scene: a feature vector, plus the generating box
// when it is a real object. Distractors carry no box.
struct Candidate {
  FeatureVector features{};
  std::optional<Box3D> gt;
};

// A synthetic "image": camera, candidates, and the object boxes in candidate
// order. gt_boxes always equals the gt fields of the object candidates.
struct SceneSample {
  CameraIntrinsics camera;
  std::vector<Candidate> candidates;
  std::vector<Box3D> gt_boxes;
};

bool gt_boxes_aligned(const SceneSample& s);

// Rescales camera, image extent, and pixel-space candidate features by
// (rx, ry); 3D boxes are left untouched.
SceneSample gams_rescale(const SceneSample& sample, const ScaleFactors& scale);

}  // namespace m3d
