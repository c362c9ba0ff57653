#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "m3d/rng.hpp"
#include "m3d/scene.hpp"

namespace m3d {

enum class DepthMode { kMetric, kPixelSize };

// Fully-connected layer dims, input to output. Hidden layers use max(0, .),
// the last layer is linear and must emit the 9 head values.
struct LayerManifest {
  std::vector<int> dims{kFeatureDim, 64, 64, 9};
};

inline constexpr int kHeadDim = 9;

size_t param_count(const LayerManifest& m);
bool same_manifest(const LayerManifest& a, const LayerManifest& b);

// Flat parameter vector laid out layer by layer, row-major weights then bias.
struct ModelParams {
  LayerManifest manifest;
  DepthMode depth_mode = DepthMode::kPixelSize;
  std::vector<double> values;
};

void validate(const ModelParams& p);  // throws std::invalid_argument

// A fresh detector must score candidates as background: an untrained teacher
// that emits half-confidence everywhere floods the pseudo-label pipeline
// from the first iteration.
inline constexpr double kScoreBiasInit = -4.0;

// He-normal weights; biases zero except the objectness bias, which starts at
// kScoreBiasInit (low-confidence prior).
ModelParams init_params(Rng& rng, const LayerManifest& manifest, DepthMode depth_mode);

// Per-candidate head values.
struct HeadOutput {
  double score_logit = 0.0;
  double depth_raw = 0.0;  // log-depth (metric or pixel-size units)
  double du = 0.0, dv = 0.0;
  std::array<double, 3> log_dims{0.0, 0.0, 0.0};
  double yaw_sin = 0.0, yaw_cos = 0.0;
};

HeadOutput forward(const ModelParams& params, const FeatureVector& features);
std::vector<HeadOutput> forward(const ModelParams& params, const SceneSample& scene);

// Size prior multiplied by exp(log_dims) at decode time.
inline constexpr std::array<double, 3> kPriorDims{4.0, 1.8, 1.6};

// Head values plus the candidate pixel location back to a scored box.
Detection decode(const HeadOutput& out, const FeatureVector& features,
                 const CameraIntrinsics& camera, double pixel_size_constant, DepthMode mode);

bool is_finite(const Detection& det);

// Exact inverse of decode on the regression components, ordered as the head
// emits them: depth_raw, du, dv, log_dims, yaw_sin, yaw_cos.
std::array<double, 8> encode_targets(const Box3D& gt, const FeatureVector& features,
                                     const CameraIntrinsics& camera,
                                     double pixel_size_constant, DepthMode mode);

// One supervision item. cls_weight scales the objectness term, reg_weight
// the regression terms; items without targets contribute no regression.
struct LossItem {
  FeatureVector features{};
  double cls_label = 0.0;
  double cls_weight = 1.0;
  double reg_weight = 1.0;
  std::optional<std::array<double, 8>> targets;
};

struct LossGrad {
  double cls = 0.0;
  double reg = 0.0;
  std::vector<double> grad;  // d(cls + reg_loss_weight * reg)/d(params)
  size_t n_pos = 0;
};

// Weighted binary cross-entropy over objectness (mean over items) plus
// smooth-L1 (beta = 1) over the targets of positive items (mean over
// positives), with the exact analytic gradient. Throws DivergenceError on a
// non-finite loss.
LossGrad loss_and_grad(const ModelParams& params, std::span<const LossItem> items,
                       double reg_loss_weight);

// Linear warmup into a step-decayed schedule with global-norm grad clipping
// and heavy-ball momentum.
struct OptimState {
  int64_t iter = 0;
  double base_lr = 0.002;
  int64_t warmup_iters = 500;
  double warmup_ratio = 1.0 / 3.0;
  std::vector<int64_t> decay_iters;
  double decay_factor = 0.1;
  double clip_norm = 35.0;
  double momentum = 0.9;
  std::vector<double> velocity;  // sized lazily on first step
};

double learning_rate_at(const OptimState& opt, int64_t iter);

// v <- momentum * v + clip(grad); params <- params - lr(iter) * v.
// Advances opt.iter.
void sgd_step(ModelParams& params, std::span<const double> grad, OptimState& opt);

struct InferenceConfig {
  double score_thr = 0.001;
  int nms_pre = 100;
  double nms_thr = 0.05;
  int max_per_img = 20;
};

struct SceneDetections {
  std::vector<Detection> dets;
  std::vector<int> candidate_index;  // provenance of each detection
  size_t dropped_nonfinite = 0;
};

// Forward + decode + score floor + NMS for one scene.
SceneDetections run_inference(const ModelParams& params, const SceneSample& scene,
                              const InferenceConfig& cfg, double pixel_size_constant);

}  // namespace m3d
