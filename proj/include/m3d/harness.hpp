#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "m3d/evalkit.hpp"
#include "m3d/io.hpp"
#include "m3d/selftrain.hpp"
#include "m3d/synthworld.hpp"

namespace m3d {

// Everything one run needs; mirrors the resolved config.json dump.
struct ExperimentConfig {
  std::string mode = "stmono3d";  // oracle | source-only | naive-st | stmono3d
  uint64_t seed = 0;
  std::string source_data;
  std::string target_data;
  std::string eval_data;  // empty: evaluate on target_data
  TrainConfig train;
  EvalConfig eval;
  DomainConfig source_domain = default_source_domain();
  DomainConfig target_domain = default_target_domain();
};

nlohmann::json domain_to_json(const DomainConfig& d);
DomainConfig domain_from_json(const nlohmann::json& j);

nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

// FNV-1a over the canonical dump.
uint64_t config_hash(const nlohmann::json& j);

// AP for both anchor counts and both match spaces, plus error means from the
// 3D matching.
struct FullEval {
  size_t n_scenes = 0;
  size_t n_gt = 0;
  double ap11_bev = 0.0, ap40_bev = 0.0;
  double ap11_3d = 0.0, ap40_3d = 0.0;
  EvalResult bev;   // counts/errors under BEV matching, AP40
  EvalResult iou3;  // counts/errors under 3D matching, AP40
};

FullEval eval_model_full(const ModelParams& params, double pixel_size_constant,
                         const std::vector<SceneSample>& scenes, const InferenceConfig& inf,
                         double iou_threshold);
nlohmann::json full_eval_to_json(const FullEval& fe, double iou_threshold);

struct TrainRunOutcome {
  bool diverged = false;
  FullEval deployed_eval;
};

// Executes one training mode end to end: loads data, trains, writes
// config.json, run.json, metrics.csv, checkpoints, and eval.json into
// out_dir. All files are written atomically.
TrainRunOutcome run_train(const ExperimentConfig& cfg, const std::string& out_dir);

void run_gen_data(const DomainConfig& domain, int n_scenes, uint64_t seed,
                  const std::string& out_path);

void run_eval(const std::string& model_path, const std::string& data_path,
              const std::string& out_path, const InferenceConfig& inf, double iou_threshold);

// Aggregates run directories (each with run.json + eval.json) into a report
// with per-mode means and closed-gap percentages versus the source-only and
// oracle baselines.
void run_report(const std::vector<std::string>& run_dirs, const std::string& out_path);

// Score-vs-IoU scatter, 20-bin score histogram, and (when a training log is
// given) pseudo-label counts per 100-iteration window.
void run_diagnostics(const std::string& model_path, const std::string& data_path,
                     const std::string& out_dir, const InferenceConfig& inf,
                     const std::string& train_log_path = "");

struct DepthRatioStats {
  double median_ratio = 0.0;
  size_t n = 0;
};

// Median of predicted-over-true depth across object candidates, using decode
// provenance rather than IoU matching so shifted predictions still pair up.
DepthRatioStats depth_ratio_stats(const ModelParams& params, double pixel_size_constant,
                                  const std::vector<SceneSample>& scenes);

// Rank correlation with average ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace m3d
