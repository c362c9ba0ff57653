#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "m3d/detector.hpp"
#include "m3d/evalkit.hpp"
#include "m3d/synthworld.hpp"

namespace m3d {

// Temporal ensemble of the student: params trail the student with momentum m.
struct EmaTeacher {
  ModelParams params;
  double momentum = 0.999;
};

// theta_T <- m * theta_T + (1 - m) * theta_S, elementwise.
void ema_update(EmaTeacher& teacher, const ModelParams& student);

// Piecewise-linear score threshold: flat at alpha, rising with slope k per
// iteration between n1 and n2, then flat again.
struct ThresholdSchedule {
  double alpha = 0.35;
  double k = 0.005;
  int64_t n1 = 0;
  int64_t n2 = 0;
};

double threshold_at(const ThresholdSchedule& s, int64_t iter);

struct PseudoLabel {
  Box3D box;
  double score = 0.0;
};
using PseudoLabelSet = std::vector<PseudoLabel>;

struct TrainConfig {
  double lambda = 1.0;  // labeled-domain loss weight
  double mu = 1.0;      // pseudo classification loss scale
  int64_t total_iters = 4000;
  int batch_size = 4;  // scenes per domain per iteration, 1:1
  bool qas_on_cls = true;
  bool qas_on_reg = false;
  ThresholdSchedule schedule;  // n2 <= n1 means derive 60% / 85% of total
  double schedule_k = -1.0;    // < 0 means derive so tau rises by 0.1
  // Iterations before the teacher starts issuing pseudo labels (< 0 means
  // derive 40% of total). The box heads must mature on labeled data first;
  // pseudo boxes from an immature regressor self-confirm and never heal.
  int64_t teacher_warmup_iters = -1;
  OptimState optim;            // empty decay_iters means derive 8/13, 11/13
  double ema_momentum = 0.999;
  double match_iou = 0.3;  // candidate-to-pseudo-box BEV IoU floor
  double reg_loss_weight = 1.0;
  double flip_prob = 0.5;  // mirror probability in the weak/strong views
  StrongAugConfig strong;
  std::vector<ScaleFactors> scale_set;  // empty means the 16 default ratios
  bool gams_enabled = true;
  DepthMode depth_mode = DepthMode::kPixelSize;
  double pixel_size_constant = kDefaultPixelSizeConstant;
  InferenceConfig inference;
  int64_t eval_interval = 0;  // 0 disables periodic eval
  LayerManifest manifest;
};

// Multi-scale ratios used when none are configured.
std::vector<ScaleFactors> default_scale_set();

// Fills derived fields (schedule breakpoints, slope, decay steps, scale set)
// and checks invariants. Throws ConfigError.
TrainConfig resolve(TrainConfig cfg);

// Teacher inference on the weakly-augmented view, NMS, then the score filter;
// survivors are mapped into the student's strongly-augmented frame.
PseudoLabelSet generate_pseudo_labels(const ModelParams& teacher, const SceneSample& weak_view,
                                      const TransformRecord& weak_rec, double tau,
                                      const InferenceConfig& inf, double pixel_size_constant,
                                      const TransformRecord& strong_rec);

struct TargetScene {
  const SceneSample* strong_view = nullptr;
  PseudoLabelSet pseudo;
};

struct TargetLoss {
  double cls = 0.0;
  double reg = 0.0;
  size_t n_fg = 0;
  std::vector<double> grad;
};

// Pseudo-box supervision on the student view. Candidates are matched to
// pseudo boxes greedily by student score with a BEV IoU floor; matched
// candidates provide the classification term (confidence-weighted, scaled by
// mu / N_fg) and regression targets. Unmatched candidates contribute nothing:
// background pseudo labels are discarded.
TargetLoss target_domain_loss(const ModelParams& student, std::span<const TargetScene> scenes,
                              const TrainConfig& cfg);

struct StepDiag {
  double lr = 0.0;
  double tau = 0.0;
  int n_pseudo = 0;
  int n_fg = 0;
  double loss_src_cls = 0.0;
  double loss_src_reg = 0.0;
  double loss_tgt_cls = 0.0;
  double loss_tgt_reg = 0.0;
};

// One combined update: supervised loss on the labeled batch, pseudo-label
// loss on the unlabeled batch, one SGD step on the student, one EMA update
// of the teacher.
StepDiag combined_step(ModelParams& student, EmaTeacher& teacher, OptimState& opt,
                       std::span<const SceneSample> source_batch,
                       std::span<const SceneSample> target_batch, int64_t iter,
                       const TrainConfig& cfg, Rng& rng);

struct TrainLogRow {
  int64_t iter = 0;
  double lr = 0.0;
  std::optional<double> tau;
  std::optional<int> n_pseudo;
  std::optional<double> loss_src_cls, loss_src_reg, loss_tgt_cls, loss_tgt_reg;
  std::optional<double> teacher_ap, student_ap;
};

struct TrainResult {
  ModelParams student;
  std::optional<ModelParams> teacher;  // deployed model when present
  std::vector<TrainLogRow> log;
  bool diverged = false;
  int64_t completed_iters = 0;
};

// Optional periodic evaluation during training.
struct EvalHook {
  const std::vector<SceneSample>* scenes = nullptr;
  EvalConfig config;
};

// End-to-end loop with 1:1 labeled/unlabeled batches; the returned teacher is
// the deployed model.
TrainResult train_stmono3d(const std::vector<SceneSample>& source,
                           const std::vector<SceneSample>& target, const TrainConfig& cfg,
                           Rng& rng, const EvalHook* eval_hook = nullptr);

// Plain supervised loop on one labeled dataset.
TrainResult train_supervised(const std::vector<SceneSample>& data, const TrainConfig& cfg,
                             Rng& rng, const EvalHook* eval_hook = nullptr);

TrainResult train_source_only(const std::vector<SceneSample>& source, const TrainConfig& cfg,
                              Rng& rng, const EvalHook* eval_hook = nullptr);
TrainResult train_oracle(const std::vector<SceneSample>& target, const TrainConfig& cfg,
                         Rng& rng, const EvalHook* eval_hook = nullptr);

// Offline baseline: supervised stage on the labeled domain, one-shot pseudo
// labeling of the whole unlabeled set at tau = alpha, then plain fine-tuning
// on the pseudo-labeled scenes (negatives included, no reweighting).
TrainResult train_naive_st(const std::vector<SceneSample>& source,
                           const std::vector<SceneSample>& target, const TrainConfig& cfg,
                           Rng& rng, const EvalHook* eval_hook = nullptr);

// One-shot relabeling used by the naive baseline: each detection surviving
// inference at the given threshold becomes the gt of the candidate it was
// decoded from; all other candidates become background.
std::vector<SceneSample> pseudo_label_dataset(const ModelParams& model,
                                              const std::vector<SceneSample>& target,
                                              double tau, const InferenceConfig& inf,
                                              double pixel_size_constant);

}  // namespace m3d
