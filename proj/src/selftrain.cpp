#include "m3d/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "m3d/errors.hpp"

namespace m3d {

namespace {

std::vector<SceneSample> draw_batch(const std::vector<SceneSample>& data, int n, Rng& rng) {
  std::vector<SceneSample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(data.size()) - 1));
    out.push_back(data[idx]);
  }
  return out;
}

double eval_ap(const ModelParams& model, const EvalHook& hook, const InferenceConfig& inf,
               double c) {
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<Box3D>> gts;
  dets.reserve(hook.scenes->size());
  gts.reserve(hook.scenes->size());
  for (const auto& scene : *hook.scenes) {
    dets.push_back(run_inference(model, scene, inf, c).dets);
    gts.push_back(scene.gt_boxes);
  }
  return evaluate(dets, gts, hook.config).ap;
}

// Supervised step on one labeled batch: every candidate contributes an
// objectness term, candidates with boxes also contribute regression targets.
// Augmentation is the multi-scale rescale only.
StepDiag supervised_step(ModelParams& params, OptimState& opt,
                         std::span<const SceneSample> batch, const TrainConfig& cfg, Rng& rng) {
  std::vector<LossItem> items;
  int n_positive = 0;
  for (const SceneSample& scene : batch) {
    SceneSample view = scene;
    if (cfg.gams_enabled) {
      view = gams_rescale(view, sample_scale(rng, cfg.scale_set));
    }
    for (const auto& cand : view.candidates) {
      LossItem item;
      item.features = cand.features;
      if (cand.gt) {
        item.cls_label = 1.0;
        item.targets = encode_targets(*cand.gt, cand.features, view.camera,
                                      cfg.pixel_size_constant, cfg.depth_mode);
        ++n_positive;
      }
      items.push_back(item);
    }
  }
  const LossGrad lg = loss_and_grad(params, items, cfg.reg_loss_weight);
  sgd_step(params, lg.grad, opt);

  StepDiag diag;
  diag.lr = learning_rate_at(opt, opt.iter - 1);
  diag.n_pseudo = n_positive;
  diag.loss_src_cls = lg.cls;
  diag.loss_src_reg = lg.reg;
  return diag;
}

TrainLogRow supervised_row(int64_t iter, const StepDiag& d) {
  TrainLogRow row;
  row.iter = iter;
  row.lr = d.lr;
  row.loss_src_cls = d.loss_src_cls;
  row.loss_src_reg = d.loss_src_reg;
  return row;
}

bool want_eval(const TrainConfig& cfg, const EvalHook* hook, int64_t next_iter) {
  if (hook == nullptr || hook->scenes == nullptr || cfg.eval_interval <= 0) return false;
  return next_iter % cfg.eval_interval == 0 || next_iter == cfg.total_iters;
}

}  // namespace

void ema_update(EmaTeacher& teacher, const ModelParams& student) {
  if (!same_manifest(teacher.params.manifest, student.manifest)) {
    throw std::invalid_argument("ema_update: manifest mismatch");
  }
  if (teacher.params.values.size() != student.values.size()) {
    throw std::invalid_argument("ema_update: parameter length mismatch");
  }
  if (teacher.momentum < 0.0 || teacher.momentum > 1.0) {
    throw std::invalid_argument("ema_update: momentum outside [0, 1]");
  }
  const double m = teacher.momentum;
  for (size_t i = 0; i < student.values.size(); ++i) {
    teacher.params.values[i] = m * teacher.params.values[i] + (1.0 - m) * student.values[i];
  }
}

double threshold_at(const ThresholdSchedule& s, int64_t iter) {
  if (iter < s.n1) return s.alpha;
  if (iter < s.n2) return s.alpha + s.k * static_cast<double>(iter - s.n1);
  return s.alpha + s.k * static_cast<double>(s.n2 - s.n1);
}

std::vector<ScaleFactors> default_scale_set() {
  // Sixteen isotropic draws. The band reaches low enough that a wide survey
  // camera rescaled by the smallest factor lands below a narrow benchmark
  // camera, so the labeled stream anchors the whole size range the unlabeled
  // stream can present. Anisotropic factors are fully supported, but a
  // per-candidate feature vector cannot reveal aspect distortion the way an
  // image would, so the default set keeps pixels square.
  static const double raw[] = {0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90,
                               0.95, 1.0, 1.05, 1.1, 1.15, 1.2, 1.3, 1.4};
  std::vector<ScaleFactors> out;
  out.reserve(16);
  for (double r : raw) out.push_back({r, r});
  return out;
}

TrainConfig resolve(TrainConfig cfg) {
  if (cfg.total_iters <= 0) throw ConfigError("train: total_iters must be positive");
  if (cfg.batch_size <= 0) throw ConfigError("train: batch_size must be positive");
  if (cfg.lambda < 0.0) throw ConfigError("train: lambda must be >= 0");
  if (!(cfg.mu > 0.0)) throw ConfigError("train: mu must be > 0");
  if (cfg.ema_momentum < 0.0 || cfg.ema_momentum > 1.0) {
    throw ConfigError("train: ema momentum outside [0, 1]");
  }
  if (!(cfg.pixel_size_constant > 0.0)) throw ConfigError("train: pixel size constant must be > 0");
  if (cfg.scale_set.empty()) cfg.scale_set = default_scale_set();
  for (const auto& s : cfg.scale_set) {
    if (!(s.rx > 0.0) || !(s.ry > 0.0)) throw ConfigError("train: scale factors must be positive");
  }

  ThresholdSchedule& sch = cfg.schedule;
  if (sch.n2 <= sch.n1) {
    sch.n1 = static_cast<int64_t>(0.60 * static_cast<double>(cfg.total_iters));
    sch.n2 = static_cast<int64_t>(0.85 * static_cast<double>(cfg.total_iters));
    if (sch.n2 <= sch.n1) sch.n2 = sch.n1 + 1;
  }
  if (cfg.schedule_k >= 0.0) {
    sch.k = cfg.schedule_k;
  } else {
    // Rise by 0.1 over the ramp.
    sch.k = 0.1 / static_cast<double>(sch.n2 - sch.n1);
  }
  if (!(sch.alpha > 0.0 && sch.alpha < 1.0)) throw ConfigError("train: alpha outside (0, 1)");
  if (sch.k < 0.0) throw ConfigError("train: threshold slope must be >= 0");
  if (!(sch.alpha + sch.k * static_cast<double>(sch.n2 - sch.n1) < 1.0)) {
    throw ConfigError("train: threshold schedule saturates at or above 1");
  }

  if (cfg.teacher_warmup_iters < 0) {
    cfg.teacher_warmup_iters = cfg.total_iters * 2 / 5;
  }
  if (cfg.optim.decay_iters.empty()) {
    cfg.optim.decay_iters = {cfg.total_iters * 8 / 13, cfg.total_iters * 11 / 13};
  }
  if (!(cfg.optim.base_lr > 0.0)) throw ConfigError("train: base_lr must be positive");
  return cfg;
}

PseudoLabelSet generate_pseudo_labels(const ModelParams& teacher, const SceneSample& weak_view,
                                      const TransformRecord& weak_rec, double tau,
                                      const InferenceConfig& inf, double pixel_size_constant,
                                      const TransformRecord& strong_rec) {
  const SceneDetections sd = run_inference(teacher, weak_view, inf, pixel_size_constant);
  PseudoLabelSet out;
  for (const Detection& det : sd.dets) {
    if (det.score < tau) continue;
    out.push_back({map_to_student_frame(det.box, weak_rec, strong_rec), det.score});
  }
  return out;
}

TargetLoss target_domain_loss(const ModelParams& student, std::span<const TargetScene> scenes,
                              const TrainConfig& cfg) {
  std::vector<LossItem> items;
  for (const TargetScene& ts : scenes) {
    if (ts.pseudo.empty() || ts.strong_view == nullptr) continue;
    const SceneSample& view = *ts.strong_view;
    const auto heads = forward(student, view);

    struct Scored {
      size_t cand;
      Detection det;
    };
    std::vector<Scored> scored;
    scored.reserve(heads.size());
    for (size_t i = 0; i < heads.size(); ++i) {
      Detection det = decode(heads[i], view.candidates[i].features, view.camera,
                             cfg.pixel_size_constant, cfg.depth_mode);
      if (!is_finite(det)) continue;
      scored.push_back({i, det});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& l, const Scored& r) {
      if (l.det.score != r.det.score) return l.det.score > r.det.score;
      return l.cand < r.cand;
    });

    std::vector<char> used(ts.pseudo.size(), 0);
    for (const Scored& s : scored) {
      double best_iou = -1.0;
      size_t best = 0;
      for (size_t p = 0; p < ts.pseudo.size(); ++p) {
        if (used[p]) continue;
        const double iou = bev_iou(s.det.box, ts.pseudo[p].box);
        if (iou > best_iou) {
          best_iou = iou;
          best = p;
        }
      }
      if (best_iou < cfg.match_iou) continue;
      used[best] = 1;

      const double w = ts.pseudo[best].score;
      LossItem item;
      item.features = view.candidates[s.cand].features;
      item.cls_label = 1.0;
      item.cls_weight = cfg.mu * (cfg.qas_on_cls ? w : 1.0);
      item.reg_weight = cfg.qas_on_reg ? w : 1.0;
      item.targets = encode_targets(ts.pseudo[best].box, item.features, view.camera,
                                    cfg.pixel_size_constant, cfg.depth_mode);
      items.push_back(item);
    }
  }

  TargetLoss out;
  out.n_fg = items.size();
  if (items.empty()) {
    out.grad.assign(student.values.size(), 0.0);
    return out;
  }
  LossGrad lg = loss_and_grad(student, items, cfg.reg_loss_weight);
  out.cls = lg.cls;
  out.reg = lg.reg;
  out.grad = std::move(lg.grad);
  return out;
}

StepDiag combined_step(ModelParams& student, EmaTeacher& teacher, OptimState& opt,
                       std::span<const SceneSample> source_batch,
                       std::span<const SceneSample> target_batch, int64_t iter,
                       const TrainConfig& cfg, Rng& rng) {
  StepDiag diag;
  diag.lr = learning_rate_at(opt, iter);
  diag.tau = threshold_at(cfg.schedule, iter);

  // Labeled side.
  std::vector<LossItem> src_items;
  for (const SceneSample& scene : source_batch) {
    SceneSample view = scene;
    if (cfg.gams_enabled) {
      view = gams_rescale(view, sample_scale(rng, cfg.scale_set));
    }
    if (rng.uniform() < cfg.flip_prob) view = flip_scene(view);
    for (const auto& cand : view.candidates) {
      LossItem item;
      item.features = cand.features;
      if (cand.gt) {
        item.cls_label = 1.0;
        item.targets = encode_targets(*cand.gt, cand.features, view.camera,
                                      cfg.pixel_size_constant, cfg.depth_mode);
      }
      src_items.push_back(item);
    }
  }
  const LossGrad src = loss_and_grad(student, src_items, cfg.reg_loss_weight);

  // Unlabeled side: teacher reads the weak view, student the strong view.
  // Before the teacher warmup ends the pseudo pipeline stays closed.
  std::vector<SceneSample> strong_views;
  strong_views.reserve(target_batch.size());
  std::vector<TargetScene> target_scenes;
  target_scenes.reserve(target_batch.size());
  const std::span<const SceneSample> open_batch =
      iter >= cfg.teacher_warmup_iters ? target_batch : std::span<const SceneSample>{};
  for (const SceneSample& scene : open_batch) {
    SceneSample weak_view;
    TransformRecord weak_rec;
    if (cfg.gams_enabled) {
      std::tie(weak_view, weak_rec) = perturb_weak(scene, rng, cfg.scale_set, cfg.flip_prob);
    } else {
      weak_view = scene;
      if (rng.uniform() < cfg.flip_prob) {
        weak_view = flip_scene(weak_view);
        weak_rec.flipped = true;
      }
    }

    SceneSample pre = scene;
    TransformRecord strong_rec;
    if (cfg.gams_enabled) {
      strong_rec.scale = sample_scale(rng, cfg.scale_set);
      pre = gams_rescale(pre, strong_rec.scale);
    }
    auto [strong_view, rec] = perturb_strong(pre, rng, cfg.strong);
    rec.scale = strong_rec.scale;

    PseudoLabelSet pseudo = generate_pseudo_labels(teacher.params, weak_view, weak_rec, diag.tau,
                                                   cfg.inference, cfg.pixel_size_constant, rec);
    diag.n_pseudo += static_cast<int>(pseudo.size());
    strong_views.push_back(std::move(strong_view));
    target_scenes.push_back({&strong_views.back(), std::move(pseudo)});
  }
  const TargetLoss tgt = target_domain_loss(student, target_scenes, cfg);
  diag.n_fg = static_cast<int>(tgt.n_fg);
  diag.loss_src_cls = src.cls;
  diag.loss_src_reg = src.reg;
  diag.loss_tgt_cls = tgt.cls;
  diag.loss_tgt_reg = tgt.reg;

  const double total = cfg.lambda * (src.cls + cfg.reg_loss_weight * src.reg) + tgt.cls +
                       cfg.reg_loss_weight * tgt.reg;
  if (!std::isfinite(total)) throw DivergenceError("combined_step: non-finite loss");

  std::vector<double> grad(student.values.size());
  for (size_t i = 0; i < grad.size(); ++i) {
    grad[i] = cfg.lambda * src.grad[i] + tgt.grad[i];
  }
  sgd_step(student, grad, opt);
  ema_update(teacher, student);
  return diag;
}

TrainResult train_stmono3d(const std::vector<SceneSample>& source,
                           const std::vector<SceneSample>& target, const TrainConfig& cfg_in,
                           Rng& rng, const EvalHook* eval_hook) {
  if (source.empty() || target.empty()) throw ConfigError("train: empty dataset");
  const TrainConfig cfg = resolve(cfg_in);

  TrainResult res;
  res.student = init_params(rng, cfg.manifest, cfg.depth_mode);
  EmaTeacher teacher{res.student, cfg.ema_momentum};
  OptimState opt = cfg.optim;

  try {
    for (int64_t it = 0; it < cfg.total_iters; ++it) {
      const auto src_batch = draw_batch(source, cfg.batch_size, rng);
      const auto tgt_batch = draw_batch(target, cfg.batch_size, rng);
      const StepDiag d = combined_step(res.student, teacher, opt, src_batch, tgt_batch, it, cfg, rng);

      TrainLogRow row;
      row.iter = it;
      row.lr = d.lr;
      row.tau = d.tau;
      row.n_pseudo = d.n_pseudo;
      row.loss_src_cls = d.loss_src_cls;
      row.loss_src_reg = d.loss_src_reg;
      row.loss_tgt_cls = d.loss_tgt_cls;
      row.loss_tgt_reg = d.loss_tgt_reg;
      if (want_eval(cfg, eval_hook, it + 1)) {
        row.teacher_ap = eval_ap(teacher.params, *eval_hook, cfg.inference, cfg.pixel_size_constant);
        row.student_ap = eval_ap(res.student, *eval_hook, cfg.inference, cfg.pixel_size_constant);
      }
      res.log.push_back(row);
      res.completed_iters = it + 1;
    }
  } catch (const DivergenceError&) {
    res.diverged = true;
  }
  res.teacher = std::move(teacher.params);
  return res;
}

TrainResult train_supervised(const std::vector<SceneSample>& data, const TrainConfig& cfg_in,
                             Rng& rng, const EvalHook* eval_hook) {
  if (data.empty()) throw ConfigError("train: empty dataset");
  const TrainConfig cfg = resolve(cfg_in);

  TrainResult res;
  res.student = init_params(rng, cfg.manifest, cfg.depth_mode);
  OptimState opt = cfg.optim;
  try {
    for (int64_t it = 0; it < cfg.total_iters; ++it) {
      const auto batch = draw_batch(data, cfg.batch_size, rng);
      const StepDiag d = supervised_step(res.student, opt, batch, cfg, rng);
      TrainLogRow row = supervised_row(it, d);
      if (want_eval(cfg, eval_hook, it + 1)) {
        row.student_ap = eval_ap(res.student, *eval_hook, cfg.inference, cfg.pixel_size_constant);
      }
      res.log.push_back(row);
      res.completed_iters = it + 1;
    }
  } catch (const DivergenceError&) {
    res.diverged = true;
  }
  return res;
}

TrainResult train_source_only(const std::vector<SceneSample>& source, const TrainConfig& cfg,
                              Rng& rng, const EvalHook* eval_hook) {
  return train_supervised(source, cfg, rng, eval_hook);
}

TrainResult train_oracle(const std::vector<SceneSample>& target, const TrainConfig& cfg,
                         Rng& rng, const EvalHook* eval_hook) {
  return train_supervised(target, cfg, rng, eval_hook);
}

std::vector<SceneSample> pseudo_label_dataset(const ModelParams& model,
                                              const std::vector<SceneSample>& target,
                                              double tau, const InferenceConfig& inf,
                                              double pixel_size_constant) {
  std::vector<SceneSample> out;
  out.reserve(target.size());
  for (const SceneSample& scene : target) {
    const SceneDetections sd = run_inference(model, scene, inf, pixel_size_constant);
    SceneSample relabeled = scene;
    for (auto& cand : relabeled.candidates) cand.gt.reset();
    relabeled.gt_boxes.clear();
    for (size_t d = 0; d < sd.dets.size(); ++d) {
      if (sd.dets[d].score < tau) continue;
      relabeled.candidates[static_cast<size_t>(sd.candidate_index[d])].gt = sd.dets[d].box;
    }
    for (const auto& cand : relabeled.candidates) {
      if (cand.gt) relabeled.gt_boxes.push_back(*cand.gt);
    }
    out.push_back(std::move(relabeled));
  }
  return out;
}

TrainResult train_naive_st(const std::vector<SceneSample>& source,
                           const std::vector<SceneSample>& target, const TrainConfig& cfg_in,
                           Rng& rng, const EvalHook* eval_hook) {
  if (source.empty() || target.empty()) throw ConfigError("train: empty dataset");
  const TrainConfig cfg = resolve(cfg_in);

  // Stage 1: supervised on the labeled domain.
  TrainConfig stage1 = cfg_in;
  stage1.total_iters = cfg.total_iters * 7 / 10;
  stage1.schedule = {};
  stage1.optim.decay_iters.clear();
  stage1 = resolve(stage1);

  TrainResult res;
  res.student = init_params(rng, cfg.manifest, cfg.depth_mode);
  OptimState opt = stage1.optim;
  try {
    for (int64_t it = 0; it < stage1.total_iters; ++it) {
      const auto batch = draw_batch(source, stage1.batch_size, rng);
      const StepDiag d = supervised_step(res.student, opt, batch, stage1, rng);
      TrainLogRow row = supervised_row(it, d);
      if (want_eval(cfg, eval_hook, it + 1)) {
        row.student_ap = eval_ap(res.student, *eval_hook, cfg.inference, cfg.pixel_size_constant);
      }
      res.log.push_back(row);
      res.completed_iters = it + 1;
    }

    // Stage 2: one-shot pseudo labels at the base threshold.
    const auto pseudo_target = pseudo_label_dataset(res.student, target, cfg.schedule.alpha,
                                                    cfg.inference, cfg.pixel_size_constant);

    // Stage 3: fine-tune on the pseudo-labeled scenes at a reduced rate.
    TrainConfig stage3 = cfg_in;
    stage3.total_iters = cfg.total_iters - stage1.total_iters;
    stage3.schedule = {};
    stage3.optim.base_lr = cfg.optim.base_lr * 0.1;
    stage3.optim.decay_iters.clear();
    stage3 = resolve(stage3);
    OptimState opt3 = stage3.optim;
    for (int64_t it = 0; it < stage3.total_iters; ++it) {
      const auto batch = draw_batch(pseudo_target, stage3.batch_size, rng);
      const StepDiag d = supervised_step(res.student, opt3, batch, stage3, rng);
      TrainLogRow row = supervised_row(stage1.total_iters + it, d);
      row.tau = cfg.schedule.alpha;
      row.n_pseudo = d.n_pseudo;
      if (want_eval(cfg, eval_hook, stage1.total_iters + it + 1)) {
        row.student_ap = eval_ap(res.student, *eval_hook, cfg.inference, cfg.pixel_size_constant);
      }
      res.log.push_back(row);
      res.completed_iters = stage1.total_iters + it + 1;
    }
  } catch (const DivergenceError&) {
    res.diverged = true;
  }
  return res;
}

}  // namespace m3d
