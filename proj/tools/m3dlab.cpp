// Command-line front end: dataset generation, the four training modes,
// evaluation, cross-run reporting, and diagnostics export.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 training divergence
// (checkpoints are still written).

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "m3d/errors.hpp"
#include "m3d/harness.hpp"

namespace {

m3d::DomainConfig resolve_domain(const std::string& name) {
  if (name == "src") return m3d::default_source_domain();
  if (name == "tgt") return m3d::default_target_domain();
  std::ifstream in(name);
  if (!in) throw m3d::ConfigError("cannot open domain config: " + name);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw m3d::ConfigError(name + ": bad JSON: " + std::string(e.what()));
  }
  return m3d::domain_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic cross-camera monocular 3D detection lab"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset (JSONL)");
  std::string gen_domain = "src";
  int gen_n = 100;
  uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--domain", gen_domain, "src | tgt | path to a domain config JSON");
  gen->add_option("--n", gen_n, "number of scenes")->required();
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--out", gen_out, "output JSONL path")->required();

  // train
  auto* train = app.add_subcommand("train", "Run one training mode");
  std::string train_mode, train_config, train_out;
  train->add_option("--mode", train_mode, "oracle | source-only | naive-st | stmono3d");
  train->add_option("--config", train_config, "experiment config JSON")->required();
  train->add_option("--out", train_out, "output directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint against a dataset");
  std::string eval_model, eval_data, eval_out;
  double eval_iou = 0.5;
  ev->add_option("--model", eval_model, "checkpoint path")->required();
  ev->add_option("--data", eval_data, "dataset JSONL path")->required();
  ev->add_option("--out", eval_out, "output JSON path")->required();
  ev->add_option("--iou", eval_iou, "matching IoU threshold");

  // report
  auto* rep = app.add_subcommand("report", "Aggregate run directories into a report");
  std::vector<std::string> report_runs;
  std::string report_out;
  rep->add_option("--runs", report_runs, "run directories")->required()->expected(-1);
  rep->add_option("--out", report_out, "output JSON path")->required();

  // diagnostics
  auto* diag = app.add_subcommand("diagnostics", "Export score/IoU diagnostics CSVs");
  std::string diag_model, diag_data, diag_out, diag_log;
  diag->add_option("--model", diag_model, "checkpoint path")->required();
  diag->add_option("--data", diag_data, "dataset JSONL path")->required();
  diag->add_option("--out", diag_out, "output directory")->required();
  diag->add_option("--train-log", diag_log, "metrics.csv from a training run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      m3d::run_gen_data(resolve_domain(gen_domain), gen_n, gen_seed, gen_out);
    } else if (train->parsed()) {
      m3d::ExperimentConfig cfg = m3d::load_experiment_config(train_config);
      if (!train_mode.empty()) cfg.mode = train_mode;
      const auto outcome = m3d::run_train(cfg, train_out);
      if (outcome.diverged) {
        std::cerr << "training diverged; checkpoints retained in " << train_out << "\n";
        return 3;
      }
    } else if (ev->parsed()) {
      m3d::InferenceConfig inf;
      m3d::run_eval(eval_model, eval_data, eval_out, inf, eval_iou);
    } else if (rep->parsed()) {
      m3d::run_report(report_runs, report_out);
    } else if (diag->parsed()) {
      m3d::InferenceConfig inf;
      m3d::run_diagnostics(diag_model, diag_data, diag_out, inf, diag_log);
    }
  } catch (const m3d::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const m3d::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
