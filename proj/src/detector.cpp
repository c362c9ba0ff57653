#include "m3d/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "m3d/errors.hpp"

namespace m3d {

namespace {

// Camera-independent input transform. The pixel location enters with weight
// zero: like a convolutional head, the trunk is translation-invariant and
// sees only local size and appearance; u and v still anchor the decoded ray.
// The height enters in log space, where the depth law is linear; the width
// enters as the log aspect ratio, a depth-free shape channel, so orientation
// variation cannot leak into the depth estimate.
inline double input_feature(const FeatureVector& f, int i) {
  switch (i) {
    case kFeatU:
    case kFeatV:
      return 0.0;
    case kFeatW:
      return std::log(std::max(f[kFeatW], 1e-6) / std::max(f[kFeatH], 1e-6));
    case kFeatH:
      return std::log(std::max(f[kFeatH], 1e-6) * 1e-2);
    default:
      return f[i];
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Numerically stable binary cross-entropy on a logit.
double bce(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double smooth_l1(double d) {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

double smooth_l1_grad(double d) {
  if (d > 1.0) return 1.0;
  if (d < -1.0) return -1.0;
  return d;
}

struct LayerView {
  const double* w;  // out x in, row-major
  const double* b;  // out
  int in, out;
};

std::vector<LayerView> layer_views(const ModelParams& p) {
  std::vector<LayerView> views;
  size_t offset = 0;
  for (size_t l = 0; l + 1 < p.manifest.dims.size(); ++l) {
    LayerView v;
    v.in = p.manifest.dims[l];
    v.out = p.manifest.dims[l + 1];
    v.w = p.values.data() + offset;
    offset += static_cast<size_t>(v.in) * v.out;
    v.b = p.values.data() + offset;
    offset += static_cast<size_t>(v.out);
    views.push_back(v);
  }
  return views;
}

// Activations per layer: act[0] is the scaled input, act.back() the linear
// output. pre[l] holds the pre-activation of layer l.
struct ForwardCache {
  std::vector<std::vector<double>> act;
  std::vector<std::vector<double>> pre;
};

void forward_cached(const ModelParams& p, const FeatureVector& features, ForwardCache& cache) {
  const auto views = layer_views(p);
  cache.act.assign(views.size() + 1, {});
  cache.pre.assign(views.size(), {});
  auto& input = cache.act[0];
  input.resize(kFeatureDim);
  for (int i = 0; i < kFeatureDim; ++i) input[i] = input_feature(features, i);
  for (size_t l = 0; l < views.size(); ++l) {
    const LayerView& v = views[l];
    auto& pre = cache.pre[l];
    pre.assign(static_cast<size_t>(v.out), 0.0);
    const auto& in = cache.act[l];
    for (int o = 0; o < v.out; ++o) {
      double acc = v.b[o];
      const double* row = v.w + static_cast<size_t>(o) * v.in;
      for (int i = 0; i < v.in; ++i) acc += row[i] * in[i];
      pre[o] = acc;
    }
    auto& out = cache.act[l + 1];
    out = pre;
    if (l + 1 < views.size()) {
      for (double& x : out) x = std::max(0.0, x);
    }
  }
}

HeadOutput to_head(const std::vector<double>& out) {
  HeadOutput h;
  h.score_logit = out[0];
  h.depth_raw = out[1];
  h.du = out[2];
  h.dv = out[3];
  h.log_dims = {out[4], out[5], out[6]};
  h.yaw_sin = out[7];
  h.yaw_cos = out[8];
  return h;
}

}  // namespace

size_t param_count(const LayerManifest& m) {
  size_t n = 0;
  for (size_t l = 0; l + 1 < m.dims.size(); ++l) {
    n += static_cast<size_t>(m.dims[l]) * m.dims[l + 1] + m.dims[l + 1];
  }
  return n;
}

bool same_manifest(const LayerManifest& a, const LayerManifest& b) { return a.dims == b.dims; }

void validate(const ModelParams& p) {
  if (p.manifest.dims.size() < 2) throw std::invalid_argument("manifest needs >= 2 layers");
  if (p.manifest.dims.front() != kFeatureDim) {
    throw std::invalid_argument("manifest input dim must match feature dim");
  }
  if (p.manifest.dims.back() != kHeadDim) {
    throw std::invalid_argument("manifest output dim must match head dim");
  }
  if (p.values.size() != param_count(p.manifest)) {
    throw std::invalid_argument("flat parameter length inconsistent with manifest");
  }
  for (double v : p.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite parameter value");
  }
}

ModelParams init_params(Rng& rng, const LayerManifest& manifest, DepthMode depth_mode) {
  ModelParams p;
  p.manifest = manifest;
  p.depth_mode = depth_mode;
  p.values.resize(param_count(manifest));
  size_t offset = 0;
  for (size_t l = 0; l + 1 < manifest.dims.size(); ++l) {
    const int fan_in = manifest.dims[l];
    const int fan_out = manifest.dims[l + 1];
    const double std = std::sqrt(2.0 / fan_in);
    for (int i = 0; i < fan_in * fan_out; ++i) p.values[offset++] = rng.normal(0.0, std);
    for (int i = 0; i < fan_out; ++i) p.values[offset++] = 0.0;
  }
  p.values[p.values.size() - kHeadDim] = kScoreBiasInit;
  validate(p);
  return p;
}

HeadOutput forward(const ModelParams& params, const FeatureVector& features) {
  validate(params);
  ForwardCache cache;
  forward_cached(params, features, cache);
  return to_head(cache.act.back());
}

std::vector<HeadOutput> forward(const ModelParams& params, const SceneSample& scene) {
  validate(params);
  std::vector<HeadOutput> out;
  out.reserve(scene.candidates.size());
  ForwardCache cache;
  for (const auto& cand : scene.candidates) {
    forward_cached(params, cand.features, cache);
    out.push_back(to_head(cache.act.back()));
  }
  return out;
}

Detection decode(const HeadOutput& out, const FeatureVector& features,
                 const CameraIntrinsics& camera, double pixel_size_constant, DepthMode mode) {
  Detection det;
  det.score = sigmoid(out.score_logit);
  const double raw = std::exp(out.depth_raw);
  const double depth = mode == DepthMode::kMetric
                           ? raw
                           : pixel_to_metric_depth(raw, camera, pixel_size_constant);
  const double u = features[kFeatU] + out.du;
  const double v = features[kFeatV] + out.dv;
  const auto center = backproject(u, v, depth, camera);
  det.box.class_id = 0;
  det.box.cx = center[0];
  det.box.cy = center[1];
  det.box.cz = center[2];
  det.box.dx = kPriorDims[0] * std::exp(out.log_dims[0]);
  det.box.dy = kPriorDims[1] * std::exp(out.log_dims[1]);
  det.box.dz = kPriorDims[2] * std::exp(out.log_dims[2]);
  det.box.yaw = normalize_yaw(std::atan2(out.yaw_sin, out.yaw_cos));
  return det;
}

bool is_finite(const Detection& det) {
  const Box3D& b = det.box;
  return std::isfinite(det.score) && std::isfinite(b.cx) && std::isfinite(b.cy) &&
         std::isfinite(b.cz) && std::isfinite(b.dx) && std::isfinite(b.dy) &&
         std::isfinite(b.dz) && std::isfinite(b.yaw) && b.cz > 0.0;
}

std::array<double, 8> encode_targets(const Box3D& gt, const FeatureVector& features,
                                     const CameraIntrinsics& camera,
                                     double pixel_size_constant, DepthMode mode) {
  std::array<double, 8> t{};
  const double depth = mode == DepthMode::kMetric
                           ? gt.cz
                           : metric_to_pixel_depth(gt.cz, camera, pixel_size_constant);
  t[0] = std::log(depth);
  const PixelPoint p = project({gt.cx, gt.cy, gt.cz}, camera);
  t[1] = p.u - features[kFeatU];
  t[2] = p.v - features[kFeatV];
  t[3] = std::log(gt.dx / kPriorDims[0]);
  t[4] = std::log(gt.dy / kPriorDims[1]);
  t[5] = std::log(gt.dz / kPriorDims[2]);
  t[6] = std::sin(gt.yaw);
  t[7] = std::cos(gt.yaw);
  return t;
}

LossGrad loss_and_grad(const ModelParams& params, std::span<const LossItem> items,
                       double reg_loss_weight) {
  validate(params);
  const auto views = layer_views(params);

  LossGrad res;
  res.grad.assign(params.values.size(), 0.0);
  for (const auto& item : items) {
    if (item.targets) ++res.n_pos;
  }
  const double cls_norm = items.empty() ? 1.0 : static_cast<double>(items.size());
  const double reg_norm = res.n_pos == 0 ? 1.0 : static_cast<double>(res.n_pos);

  ForwardCache cache;
  std::vector<double> delta, next_delta;
  for (const auto& item : items) {
    forward_cached(params, item.features, cache);
    const auto& out = cache.act.back();

    // Head-level loss contributions and output deltas.
    delta.assign(static_cast<size_t>(kHeadDim), 0.0);
    res.cls += item.cls_weight * bce(out[0], item.cls_label) / cls_norm;
    delta[0] = item.cls_weight * (sigmoid(out[0]) - item.cls_label) / cls_norm;
    if (item.targets) {
      for (int j = 0; j < 8; ++j) {
        const double d = out[j + 1] - (*item.targets)[j];
        res.reg += item.reg_weight * smooth_l1(d) / reg_norm;
        delta[j + 1] = reg_loss_weight * item.reg_weight * smooth_l1_grad(d) / reg_norm;
      }
    }

    // Backward through the stack, accumulating into the flat gradient.
    size_t offset = params.values.size();
    for (size_t l = views.size(); l-- > 0;) {
      const LayerView& v = views[l];
      offset -= static_cast<size_t>(v.in) * v.out + v.out;
      double* gw = res.grad.data() + offset;
      double* gb = gw + static_cast<size_t>(v.in) * v.out;
      const auto& in = cache.act[l];
      next_delta.assign(static_cast<size_t>(v.in), 0.0);
      for (int o = 0; o < v.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* grow = gw + static_cast<size_t>(o) * v.in;
        const double* wrow = v.w + static_cast<size_t>(o) * v.in;
        for (int i = 0; i < v.in; ++i) {
          grow[i] += d * in[i];
          next_delta[i] += d * wrow[i];
        }
      }
      if (l > 0) {
        // ReLU mask of the previous layer.
        for (int i = 0; i < v.in; ++i) {
          if (cache.pre[l - 1][i] <= 0.0) next_delta[i] = 0.0;
        }
      }
      delta = next_delta;
    }
  }

  if (!std::isfinite(res.cls) || !std::isfinite(res.reg)) {
    throw DivergenceError("loss_and_grad: non-finite loss");
  }
  return res;
}

double learning_rate_at(const OptimState& opt, int64_t iter) {
  if (iter < opt.warmup_iters) {
    const double t = static_cast<double>(iter) / static_cast<double>(opt.warmup_iters);
    return opt.base_lr * (opt.warmup_ratio + (1.0 - opt.warmup_ratio) * t);
  }
  double lr = opt.base_lr;
  for (int64_t step : opt.decay_iters) {
    if (iter >= step) lr *= opt.decay_factor;
  }
  return lr;
}

void sgd_step(ModelParams& params, std::span<const double> grad, OptimState& opt) {
  if (grad.size() != params.values.size()) {
    throw std::invalid_argument("sgd_step: gradient length mismatch");
  }
  const double lr = learning_rate_at(opt, opt.iter);
  double norm_sq = 0.0;
  for (double g : grad) norm_sq += g * g;
  const double norm = std::sqrt(norm_sq);
  const double scale = (opt.clip_norm > 0.0 && norm > opt.clip_norm) ? opt.clip_norm / norm : 1.0;
  if (opt.velocity.size() != params.values.size()) opt.velocity.assign(params.values.size(), 0.0);
  for (size_t i = 0; i < grad.size(); ++i) {
    opt.velocity[i] = opt.momentum * opt.velocity[i] + scale * grad[i];
    params.values[i] -= lr * opt.velocity[i];
  }
  ++opt.iter;
}

SceneDetections run_inference(const ModelParams& params, const SceneSample& scene,
                              const InferenceConfig& cfg, double pixel_size_constant) {
  SceneDetections out;
  const auto heads = forward(params, scene);

  std::vector<Detection> dets;
  std::vector<int> cand_of_det;
  for (size_t i = 0; i < heads.size(); ++i) {
    const Detection det = decode(heads[i], scene.candidates[i].features, scene.camera,
                                 pixel_size_constant, params.depth_mode);
    if (!is_finite(det)) {
      ++out.dropped_nonfinite;
      continue;
    }
    if (det.score < cfg.score_thr) continue;
    dets.push_back(det);
    cand_of_det.push_back(static_cast<int>(i));
  }

  std::vector<size_t> order(dets.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t l, size_t r) {
    if (dets[l].score != dets[r].score) return dets[l].score > dets[r].score;
    return l < r;
  });
  if (cfg.nms_pre > 0 && order.size() > static_cast<size_t>(cfg.nms_pre)) {
    order.resize(static_cast<size_t>(cfg.nms_pre));
  }

  std::vector<Detection> pre;
  std::vector<int> pre_cand;
  pre.reserve(order.size());
  for (size_t idx : order) {
    pre.push_back(dets[idx]);
    pre_cand.push_back(cand_of_det[idx]);
  }
  const auto kept = nms_indices(pre, cfg.nms_thr, static_cast<size_t>(cfg.max_per_img));
  for (size_t idx : kept) {
    out.dets.push_back(pre[idx]);
    out.candidate_index.push_back(pre_cand[idx]);
  }
  return out;
}

}  // namespace m3d
