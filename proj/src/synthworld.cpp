#include "m3d/synthworld.hpp"

#include <cmath>

#include "m3d/errors.hpp"

namespace m3d {

namespace {

constexpr int kMaxRejections = 1000;
constexpr double kMinFeaturePixels = 1e-3;
constexpr double kMinDim = 0.05;

double clamped_dim(Rng& rng, double mean, double std) {
  return std::max(kMinDim, rng.normal(mean, std));
}

// Perspective-plausible depth: log-uniform over [depth_min, depth_max], so
// near objects dominate the way they do in image-plane statistics.
double sample_depth(Rng& rng, const DomainConfig& cfg) {
  return cfg.depth_min * std::exp(rng.uniform() * std::log(cfg.depth_max / cfg.depth_min));
}

double projected_width(const Box3D& b, const CameraIntrinsics& k) {
  return k.fx * (b.dx * std::abs(std::cos(b.yaw)) + b.dy * std::abs(std::sin(b.yaw))) / b.cz;
}

double projected_height(const Box3D& b, const CameraIntrinsics& k) {
  return k.fy * b.dz / b.cz;
}

}  // namespace

void validate(const DomainConfig& cfg) {
  if (!is_valid(cfg.camera)) throw ConfigError("domain: invalid camera");
  if (!(cfg.depth_min > 0.0) || !(cfg.depth_max > cfg.depth_min)) {
    throw ConfigError("domain: depth range must satisfy 0 < min < max");
  }
  for (double s : cfg.obj_dim_std) {
    if (s < 0.0) throw ConfigError("domain: dim std must be >= 0");
  }
  for (double s : cfg.appearance_std) {
    if (s < 0.0) throw ConfigError("domain: appearance std must be >= 0");
  }
  if (cfg.distractor_rate < 0.0) throw ConfigError("domain: distractor rate must be >= 0");
  if (cfg.obs_noise_std < 0.0) throw ConfigError("domain: obs noise must be >= 0");
  if (cfg.objects_min < 0 || cfg.objects_max < cfg.objects_min) {
    throw ConfigError("domain: bad objects_per_scene range");
  }
  if (!(cfg.lateral_range > 0.0)) throw ConfigError("domain: lateral range must be > 0");
  if (!(cfg.yaw_max >= cfg.yaw_min)) throw ConfigError("domain: bad yaw range");
}

DomainConfig default_source_domain() {
  DomainConfig d;
  d.camera = {1260.0, 1260.0, 800.0, 450.0, 1600.0, 900.0};
  d.obj_dim_mean = {4.6, 1.95, 1.7};
  d.obj_dim_std = {0.2, 0.08, 0.05};
  d.depth_min = 4.0;
  d.depth_max = 60.0;
  d.lateral_range = 8.0;
  // Following-traffic headings: pi/2 +- pi/8. The projected width carries
  // only |cos yaw| and |sin yaw|, so a narrow prior keeps orientation
  // recoverable, and a mirror maps this range onto itself.
  d.yaw_min = 1.1780972450961724;
  d.yaw_max = 1.9634954084936207;
  d.appearance_mean = {0.0, 0.0, 0.0, 0.0};
  d.appearance_std = {1.0, 1.0, 1.0, 1.0};
  d.distractor_rate = 1.0;
  d.objects_min = 1;
  d.objects_max = 4;
  d.obs_noise_std = 0.3;
  return d;
}

DomainConfig default_target_domain() {
  DomainConfig d = default_source_domain();
  d.camera = {720.0, 720.0, 621.0, 187.5, 1242.0, 375.0};
  d.obj_dim_mean = {3.9, 1.6, 1.56};
  // One-std appearance shift toward the clutter offset: a source-trained
  // classifier reads these objects with depressed confidence, which is the
  // recoverable part of the gap.
  d.appearance_mean = {1.0, 1.0, 1.0, 1.0};
  return d;
}

SceneSample generate_scene(Rng& rng, const DomainConfig& cfg) {
  validate(cfg);
  SceneSample scene;
  scene.camera = cfg.camera;

  const int n_objects = static_cast<int>(rng.uniform_int(cfg.objects_min, cfg.objects_max));
  int rejections = 0;
  for (int i = 0; i < n_objects;) {
    Box3D box;
    box.class_id = 0;
    box.dx = clamped_dim(rng, cfg.obj_dim_mean[0], cfg.obj_dim_std[0]);
    box.dy = clamped_dim(rng, cfg.obj_dim_mean[1], cfg.obj_dim_std[1]);
    box.dz = clamped_dim(rng, cfg.obj_dim_mean[2], cfg.obj_dim_std[2]);
    box.yaw = normalize_yaw(rng.uniform(cfg.yaw_min, cfg.yaw_max));
    box.cz = sample_depth(rng, cfg);
    box.cx = rng.uniform(-cfg.lateral_range, cfg.lateral_range);
    box.cy = rng.normal(0.0, kVerticalPlacementStd);

    const PixelPoint p = project({box.cx, box.cy, box.cz}, cfg.camera);
    bool rejected = p.u < 0.0 || p.u > cfg.camera.width || p.v < 0.0 || p.v > cfg.camera.height;
    if (!rejected) {
      // Objects are solid: overlapping footprints would also break the
      // aggressive suppression threshold used at inference time.
      for (const Box3D& placed : scene.gt_boxes) {
        if (bev_iou(box, placed) > 0.02) {
          rejected = true;
          break;
        }
      }
    }
    if (rejected) {
      if (++rejections >= kMaxRejections) {
        throw ConfigError("generate_scene: placement constraints reject every draw");
      }
      continue;
    }
    rejections = 0;

    Candidate cand;
    cand.features[kFeatU] = p.u;
    cand.features[kFeatV] = p.v;
    cand.features[kFeatW] = projected_width(box, cfg.camera);
    cand.features[kFeatH] = projected_height(box, cfg.camera);
    for (int a = 0; a < 4; ++a) {
      cand.features[kFeatA0 + a] = rng.normal(cfg.appearance_mean[a], cfg.appearance_std[a]);
    }
    cand.gt = box;
    scene.candidates.push_back(cand);
    scene.gt_boxes.push_back(box);
    ++i;
  }

  const int n_distractors = cfg.distractor_rate > 0.0 ? rng.poisson(cfg.distractor_rate) : 0;
  for (int i = 0; i < n_distractors; ++i) {
    // Background stuff: plausible geometry from a fake box, appearance pushed
    // away from the object cluster. The fake depth is linear-uniform where
    // real objects are log-uniform, so clutter skews small the way distant
    // street furniture does; confidence then carries size information.
    Candidate cand;
    Box3D fake;
    fake.dx = clamped_dim(rng, cfg.obj_dim_mean[0], cfg.obj_dim_std[0]);
    fake.dy = clamped_dim(rng, cfg.obj_dim_mean[1], cfg.obj_dim_std[1]);
    fake.dz = clamped_dim(rng, cfg.obj_dim_mean[2], cfg.obj_dim_std[2]);
    fake.yaw = normalize_yaw(rng.uniform(cfg.yaw_min, cfg.yaw_max));
    fake.cz = rng.uniform(cfg.depth_min, cfg.depth_max);
    cand.features[kFeatU] = rng.uniform(0.0, cfg.camera.width);
    cand.features[kFeatV] = rng.uniform(0.0, cfg.camera.height);
    cand.features[kFeatW] = projected_width(fake, cfg.camera);
    cand.features[kFeatH] = projected_height(fake, cfg.camera);
    for (int a = 0; a < 4; ++a) {
      const double mean =
          cfg.appearance_mean[a] + kDistractorAppearanceOffset * cfg.appearance_std[a];
      cand.features[kFeatA0 + a] = rng.normal(mean, cfg.appearance_std[a]);
    }
    scene.candidates.push_back(cand);
  }

  if (cfg.obs_noise_std > 0.0) {
    for (auto& cand : scene.candidates) {
      for (int f : {kFeatU, kFeatV, kFeatW, kFeatH}) {
        cand.features[f] += rng.normal(0.0, cfg.obs_noise_std);
      }
      cand.features[kFeatW] = std::max(kMinFeaturePixels, cand.features[kFeatW]);
      cand.features[kFeatH] = std::max(kMinFeaturePixels, cand.features[kFeatH]);
    }
  }
  return scene;
}

std::vector<SceneSample> generate_dataset(const Rng& master, const DomainConfig& cfg, int n_scenes) {
  if (n_scenes < 0) throw ConfigError("generate_dataset: negative scene count");
  std::vector<SceneSample> out;
  out.reserve(static_cast<size_t>(n_scenes));
  for (int i = 0; i < n_scenes; ++i) {
    Rng scene_rng = master.split(static_cast<uint64_t>(i));
    out.push_back(generate_scene(scene_rng, cfg));
  }
  return out;
}

Box3D flip_box(const Box3D& box) {
  Box3D out = box;
  out.cx = -box.cx;
  out.yaw = normalize_yaw(3.14159265358979323846 - box.yaw);
  return out;
}

SceneSample flip_scene(const SceneSample& sample) {
  SceneSample out = sample;
  for (auto& cand : out.candidates) {
    cand.features[kFeatU] = sample.camera.width - cand.features[kFeatU];
    if (cand.gt) cand.gt = flip_box(*cand.gt);
  }
  for (auto& box : out.gt_boxes) box = flip_box(box);
  return out;
}

std::pair<SceneSample, TransformRecord> perturb_weak(const SceneSample& sample, Rng& rng,
                                                     std::span<const ScaleFactors> scale_set,
                                                     double flip_prob) {
  TransformRecord rec;
  rec.scale = sample_scale(rng, scale_set);
  SceneSample out = gams_rescale(sample, rec.scale);
  if (rng.uniform() < flip_prob) {
    out = flip_scene(out);
    rec.flipped = true;
  }
  return {std::move(out), rec};
}

std::pair<SceneSample, TransformRecord> perturb_strong(const SceneSample& sample, Rng& rng,
                                                       const StrongAugConfig& cfg) {
  TransformRecord rec;
  SceneSample out = sample;
  if (rng.uniform() < cfg.flip_prob) {
    out = flip_scene(out);
    rec.flipped = true;
  }
  const double tone = rng.uniform(cfg.tone_lo, cfg.tone_hi);
  for (auto& cand : out.candidates) {
    for (int a = 0; a < 4; ++a) {
      double& value = cand.features[kFeatA0 + a];
      if (rng.uniform() < cfg.erase_prob) value = 0.0;
      value *= tone;
    }
  }
  return {std::move(out), rec};
}

Box3D map_to_student_frame(const Box3D& box, const TransformRecord& weak,
                           const TransformRecord& strong) {
  // Mirror exactly once when the two frames disagree.
  if (weak.flipped != strong.flipped) return flip_box(box);
  return box;
}

}  // namespace m3d
