#include "m3d/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "m3d/errors.hpp"

namespace m3d {

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": bad JSON: " + std::string(e.what()));
  }
  return j;
}

std::string depth_mode_name(DepthMode m) {
  return m == DepthMode::kMetric ? "METRIC" : "PIXEL_SIZE";
}

DepthMode depth_mode_from_name(const std::string& name) {
  if (name == "METRIC") return DepthMode::kMetric;
  if (name == "PIXEL_SIZE") return DepthMode::kPixelSize;
  throw ConfigError("unknown depth mode: " + name);
}

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

json domain_to_json(const DomainConfig& d) {
  json j;
  j["camera"] = camera_to_json(d.camera);
  j["obj_dim_mean"] = d.obj_dim_mean;
  j["obj_dim_std"] = d.obj_dim_std;
  j["depth_min"] = d.depth_min;
  j["depth_max"] = d.depth_max;
  j["lateral_range"] = d.lateral_range;
  j["yaw_min"] = d.yaw_min;
  j["yaw_max"] = d.yaw_max;
  j["appearance_mean"] = d.appearance_mean;
  j["appearance_std"] = d.appearance_std;
  j["distractor_rate"] = d.distractor_rate;
  j["objects_min"] = d.objects_min;
  j["objects_max"] = d.objects_max;
  j["obs_noise_std"] = d.obs_noise_std;
  return j;
}

DomainConfig domain_from_json(const json& j) {
  DomainConfig d;
  if (j.contains("camera")) d.camera = camera_from_json(j.at("camera"));
  d.obj_dim_mean = j.value("obj_dim_mean", d.obj_dim_mean);
  d.obj_dim_std = j.value("obj_dim_std", d.obj_dim_std);
  d.depth_min = j.value("depth_min", d.depth_min);
  d.depth_max = j.value("depth_max", d.depth_max);
  d.lateral_range = j.value("lateral_range", d.lateral_range);
  d.yaw_min = j.value("yaw_min", d.yaw_min);
  d.yaw_max = j.value("yaw_max", d.yaw_max);
  d.appearance_mean = j.value("appearance_mean", d.appearance_mean);
  d.appearance_std = j.value("appearance_std", d.appearance_std);
  d.distractor_rate = j.value("distractor_rate", d.distractor_rate);
  d.objects_min = j.value("objects_min", d.objects_min);
  d.objects_max = j.value("objects_max", d.objects_max);
  d.obs_noise_std = j.value("obs_noise_std", d.obs_noise_std);
  return d;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  json j;
  j["mode"] = cfg.mode;
  j["seed"] = cfg.seed;
  j["source_data"] = cfg.source_data;
  j["target_data"] = cfg.target_data;
  j["eval_data"] = cfg.eval_data;
  json train;
  train["lambda"] = t.lambda;
  train["mu"] = t.mu;
  train["total_iters"] = t.total_iters;
  train["batch_size"] = t.batch_size;
  train["qas_on_cls"] = t.qas_on_cls;
  train["qas_on_reg"] = t.qas_on_reg;
  train["alpha"] = t.schedule.alpha;
  train["threshold_k"] = t.schedule_k;
  train["n1"] = t.schedule.n1;
  train["n2"] = t.schedule.n2;
  train["teacher_warmup_iters"] = t.teacher_warmup_iters;
  train["base_lr"] = t.optim.base_lr;
  train["warmup_iters"] = t.optim.warmup_iters;
  train["warmup_ratio"] = t.optim.warmup_ratio;
  train["decay_iters"] = t.optim.decay_iters;
  train["decay_factor"] = t.optim.decay_factor;
  train["clip_norm"] = t.optim.clip_norm;
  train["ema_momentum"] = t.ema_momentum;
  train["match_iou"] = t.match_iou;
  train["reg_loss_weight"] = t.reg_loss_weight;
  train["flip_prob"] = t.flip_prob;
  train["erase_prob"] = t.strong.erase_prob;
  train["tone_lo"] = t.strong.tone_lo;
  train["tone_hi"] = t.strong.tone_hi;
  json scales = json::array();
  for (const auto& s : t.scale_set) scales.push_back({s.rx, s.ry});
  train["scale_set"] = std::move(scales);
  train["gams_enabled"] = t.gams_enabled;
  train["depth_mode"] = depth_mode_name(t.depth_mode);
  train["pixel_size_constant"] = t.pixel_size_constant;
  train["eval_interval"] = t.eval_interval;
  std::vector<int> hidden(t.manifest.dims.begin() + 1, t.manifest.dims.end() - 1);
  train["hidden_dims"] = hidden;
  j["train"] = std::move(train);
  json inf;
  inf["score_thr"] = t.inference.score_thr;
  inf["nms_pre"] = t.inference.nms_pre;
  inf["nms_thr"] = t.inference.nms_thr;
  inf["max_per_img"] = t.inference.max_per_img;
  j["inference"] = std::move(inf);
  json ev;
  ev["iou_threshold"] = cfg.eval.iou_threshold;
  ev["ap_mode"] = cfg.eval.ap_mode == ApMode::kAp11 ? "AP11" : "AP40";
  ev["match_space"] = cfg.eval.match_space == MatchSpace::kBev ? "BEV" : "3D";
  j["eval"] = std::move(ev);
  j["source_domain"] = domain_to_json(cfg.source_domain);
  j["target_domain"] = domain_to_json(cfg.target_domain);
  return j;
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.mode = j.value("mode", cfg.mode);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.source_data = j.value("source_data", cfg.source_data);
  cfg.target_data = j.value("target_data", cfg.target_data);
  cfg.eval_data = j.value("eval_data", cfg.eval_data);

  TrainConfig& t = cfg.train;
  if (j.contains("train")) {
    const json& tr = j.at("train");
    t.lambda = tr.value("lambda", t.lambda);
    t.mu = tr.value("mu", t.mu);
    t.total_iters = tr.value("total_iters", t.total_iters);
    t.batch_size = tr.value("batch_size", t.batch_size);
    t.qas_on_cls = tr.value("qas_on_cls", t.qas_on_cls);
    t.qas_on_reg = tr.value("qas_on_reg", t.qas_on_reg);
    t.schedule.alpha = tr.value("alpha", t.schedule.alpha);
    t.schedule_k = tr.value("threshold_k", t.schedule_k);
    t.schedule.n1 = tr.value("n1", t.schedule.n1);
    t.schedule.n2 = tr.value("n2", t.schedule.n2);
    t.teacher_warmup_iters = tr.value("teacher_warmup_iters", t.teacher_warmup_iters);
    t.optim.base_lr = tr.value("base_lr", t.optim.base_lr);
    t.optim.warmup_iters = tr.value("warmup_iters", t.optim.warmup_iters);
    t.optim.warmup_ratio = tr.value("warmup_ratio", t.optim.warmup_ratio);
    t.optim.decay_iters = tr.value("decay_iters", t.optim.decay_iters);
    t.optim.decay_factor = tr.value("decay_factor", t.optim.decay_factor);
    t.optim.clip_norm = tr.value("clip_norm", t.optim.clip_norm);
    t.ema_momentum = tr.value("ema_momentum", t.ema_momentum);
    t.match_iou = tr.value("match_iou", t.match_iou);
    t.reg_loss_weight = tr.value("reg_loss_weight", t.reg_loss_weight);
    t.flip_prob = tr.value("flip_prob", t.flip_prob);
    t.strong.flip_prob = t.flip_prob;
    t.strong.erase_prob = tr.value("erase_prob", t.strong.erase_prob);
    t.strong.tone_lo = tr.value("tone_lo", t.strong.tone_lo);
    t.strong.tone_hi = tr.value("tone_hi", t.strong.tone_hi);
    if (tr.contains("scale_set")) {
      t.scale_set.clear();
      for (const auto& s : tr.at("scale_set")) {
        t.scale_set.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
      }
    }
    t.gams_enabled = tr.value("gams_enabled", t.gams_enabled);
    if (tr.contains("depth_mode")) {
      t.depth_mode = depth_mode_from_name(tr.at("depth_mode").get<std::string>());
    }
    t.pixel_size_constant = tr.value("pixel_size_constant", t.pixel_size_constant);
    t.eval_interval = tr.value("eval_interval", t.eval_interval);
    if (tr.contains("hidden_dims")) {
      const auto hidden = tr.at("hidden_dims").get<std::vector<int>>();
      t.manifest.dims.assign(1, kFeatureDim);
      t.manifest.dims.insert(t.manifest.dims.end(), hidden.begin(), hidden.end());
      t.manifest.dims.push_back(kHeadDim);
    }
  }
  if (j.contains("inference")) {
    const json& inf = j.at("inference");
    t.inference.score_thr = inf.value("score_thr", t.inference.score_thr);
    t.inference.nms_pre = inf.value("nms_pre", t.inference.nms_pre);
    t.inference.nms_thr = inf.value("nms_thr", t.inference.nms_thr);
    t.inference.max_per_img = inf.value("max_per_img", t.inference.max_per_img);
  }
  if (j.contains("eval")) {
    const json& ev = j.at("eval");
    cfg.eval.iou_threshold = ev.value("iou_threshold", cfg.eval.iou_threshold);
    const std::string mode = ev.value("ap_mode", std::string("AP40"));
    cfg.eval.ap_mode = mode == "AP11" ? ApMode::kAp11 : ApMode::kAp40;
    const std::string space = ev.value("match_space", std::string("3D"));
    cfg.eval.match_space = space == "BEV" ? MatchSpace::kBev : MatchSpace::k3d;
  }
  if (j.contains("source_domain")) cfg.source_domain = domain_from_json(j.at("source_domain"));
  if (j.contains("target_domain")) cfg.target_domain = domain_from_json(j.at("target_domain"));
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_from_json(read_json_file(path));
}

uint64_t config_hash(const json& j) {
  const std::string dump = j.dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

FullEval eval_model_full(const ModelParams& params, double pixel_size_constant,
                         const std::vector<SceneSample>& scenes, const InferenceConfig& inf,
                         double iou_threshold) {
  FullEval fe;
  fe.n_scenes = scenes.size();
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<Box3D>> gts;
  dets.reserve(scenes.size());
  gts.reserve(scenes.size());
  for (const auto& scene : scenes) {
    dets.push_back(run_inference(params, scene, inf, pixel_size_constant).dets);
    gts.push_back(scene.gt_boxes);
    fe.n_gt += scene.gt_boxes.size();
  }
  EvalConfig cfg;
  cfg.iou_threshold = iou_threshold;

  cfg.match_space = MatchSpace::kBev;
  cfg.ap_mode = ApMode::kAp11;
  fe.ap11_bev = evaluate(dets, gts, cfg).ap;
  cfg.ap_mode = ApMode::kAp40;
  fe.bev = evaluate(dets, gts, cfg);
  fe.ap40_bev = fe.bev.ap;

  cfg.match_space = MatchSpace::k3d;
  cfg.ap_mode = ApMode::kAp11;
  fe.ap11_3d = evaluate(dets, gts, cfg).ap;
  cfg.ap_mode = ApMode::kAp40;
  fe.iou3 = evaluate(dets, gts, cfg);
  fe.ap40_3d = fe.iou3.ap;
  return fe;
}

json full_eval_to_json(const FullEval& fe, double iou_threshold) {
  json j;
  j["n_scenes"] = fe.n_scenes;
  j["n_gt"] = fe.n_gt;
  j["iou_threshold"] = iou_threshold;
  j["ap"] = {{"ap11_bev", fe.ap11_bev},
             {"ap40_bev", fe.ap40_bev},
             {"ap11_3d", fe.ap11_3d},
             {"ap40_3d", fe.ap40_3d}};
  if (fe.iou3.errors) {
    j["errors"] = {{"mate", fe.iou3.errors->mate},
                   {"mase", fe.iou3.errors->mase},
                   {"maoe", fe.iou3.errors->maoe}};
  } else {
    j["errors"] = nullptr;
  }
  j["counts"] = {{"bev", {{"tp", fe.bev.tp}, {"fp", fe.bev.fp}, {"fn", fe.bev.fn}}},
                 {"iou3d", {{"tp", fe.iou3.tp}, {"fp", fe.iou3.fp}, {"fn", fe.iou3.fn}}}};
  return j;
}

TrainRunOutcome run_train(const ExperimentConfig& cfg_in, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig cfg = cfg_in;
  cfg.train = resolve(cfg.train);

  const bool needs_source = cfg.mode != "oracle";
  const bool needs_target = true;
  std::vector<SceneSample> source, target;
  if (needs_source) {
    if (cfg.source_data.empty()) throw ConfigError("mode " + cfg.mode + " requires source_data");
    source = load_dataset_jsonl(cfg.source_data);
  }
  if (needs_target) {
    if (cfg.target_data.empty()) throw ConfigError("mode " + cfg.mode + " requires target_data");
    target = load_dataset_jsonl(cfg.target_data);
  }
  std::vector<SceneSample> eval_scenes =
      cfg.eval_data.empty() ? target : load_dataset_jsonl(cfg.eval_data);

  EvalHook hook;
  hook.scenes = &eval_scenes;
  hook.config = cfg.eval;

  Rng rng(cfg.seed);
  TrainResult result;
  if (cfg.mode == "oracle") {
    result = train_oracle(target, cfg.train, rng, &hook);
  } else if (cfg.mode == "source-only") {
    result = train_source_only(source, cfg.train, rng, &hook);
  } else if (cfg.mode == "naive-st") {
    result = train_naive_st(source, target, cfg.train, rng, &hook);
  } else if (cfg.mode == "stmono3d") {
    result = train_stmono3d(source, target, cfg.train, rng, &hook);
  } else {
    throw ConfigError("unknown train mode: " + cfg.mode);
  }

  fs::create_directories(out_dir);
  const json cfg_json = experiment_to_json(cfg);
  atomic_write_text(out_dir + "/config.json", cfg_json.dump(2) + "\n");
  save_metric_csv(result.log, out_dir + "/metrics.csv");
  save_checkpoint(result.student, cfg.train.pixel_size_constant, out_dir + "/student.json");
  const ModelParams& deployed = result.teacher ? *result.teacher : result.student;
  if (result.teacher) {
    save_checkpoint(*result.teacher, cfg.train.pixel_size_constant, out_dir + "/teacher.json");
  }
  save_checkpoint(deployed, cfg.train.pixel_size_constant, out_dir + "/model.json");

  TrainRunOutcome outcome;
  outcome.diverged = result.diverged;
  if (!result.diverged) {
    outcome.deployed_eval = eval_model_full(deployed, cfg.train.pixel_size_constant, eval_scenes,
                                            cfg.train.inference, cfg.eval.iou_threshold);
    atomic_write_text(out_dir + "/eval.json",
                      full_eval_to_json(outcome.deployed_eval, cfg.eval.iou_threshold).dump(2) + "\n");
  }

  const double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char hash_hex[24];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg_json)));
  json run;
  run["mode"] = cfg.mode;
  run["seed"] = cfg.seed;
  run["config_hash"] = hash_hex;
  run["runtime_seconds"] = runtime;
  run["diverged"] = result.diverged;
  run["completed_iters"] = result.completed_iters;
  atomic_write_text(out_dir + "/run.json", run.dump(2) + "\n");
  return outcome;
}

void run_gen_data(const DomainConfig& domain, int n_scenes, uint64_t seed,
                  const std::string& out_path) {
  validate(domain);
  const auto scenes = generate_dataset(Rng(seed), domain, n_scenes);
  save_dataset_jsonl(scenes, out_path);
}

void run_eval(const std::string& model_path, const std::string& data_path,
              const std::string& out_path, const InferenceConfig& inf, double iou_threshold) {
  const Checkpoint ck = load_checkpoint(model_path);
  const auto scenes = load_dataset_jsonl(data_path);
  const FullEval fe = eval_model_full(ck.params, ck.pixel_size_constant, scenes, inf, iou_threshold);
  atomic_write_text(out_path, full_eval_to_json(fe, iou_threshold).dump(2) + "\n");
}

void run_report(const std::vector<std::string>& run_dirs, const std::string& out_path) {
  struct RunRecord {
    std::string dir, mode;
    json eval;
    double runtime = 0.0;
    bool diverged = false;
  };
  std::vector<RunRecord> records;
  for (const auto& dir : run_dirs) {
    RunRecord rec;
    rec.dir = dir;
    const json run = read_json_file(dir + "/run.json");
    rec.mode = run.at("mode").get<std::string>();
    rec.runtime = run.value("runtime_seconds", 0.0);
    rec.diverged = run.value("diverged", false);
    if (!rec.diverged) rec.eval = read_json_file(dir + "/eval.json");
    records.push_back(std::move(rec));
  }

  const std::vector<std::string> metrics = {"ap11_bev", "ap40_bev", "ap11_3d", "ap40_3d"};
  std::map<std::string, std::map<std::string, double>> mode_means;
  std::map<std::string, int> mode_counts;
  for (const auto& rec : records) {
    if (rec.diverged) continue;
    auto& acc = mode_means[rec.mode];
    for (const auto& m : metrics) acc[m] += rec.eval.at("ap").at(m).get<double>();
    ++mode_counts[rec.mode];
  }
  for (auto& [mode, acc] : mode_means) {
    for (const auto& m : metrics) acc[m] /= mode_counts[mode];
  }

  json report;
  json runs = json::array();
  double total_runtime = 0.0;
  for (const auto& rec : records) {
    json r;
    r["dir"] = rec.dir;
    r["mode"] = rec.mode;
    r["diverged"] = rec.diverged;
    r["runtime_seconds"] = rec.runtime;
    if (!rec.diverged) r["ap"] = rec.eval.at("ap");
    runs.push_back(std::move(r));
    total_runtime += rec.runtime;
  }
  report["runs"] = std::move(runs);
  json means;
  for (const auto& [mode, acc] : mode_means) {
    json m;
    for (const auto& name : metrics) m[name] = acc.at(name);
    m["n_runs"] = mode_counts.at(mode);
    means[mode] = std::move(m);
  }
  report["mode_means"] = std::move(means);

  // Gap closure needs both baselines.
  const bool have_baselines =
      mode_means.count("source-only") > 0 && mode_means.count("oracle") > 0;
  json gaps;
  if (have_baselines) {
    for (const auto& [mode, acc] : mode_means) {
      if (mode == "source-only" || mode == "oracle") continue;
      json g;
      for (const auto& m : metrics) {
        const double src = mode_means.at("source-only").at(m);
        const double orc = mode_means.at("oracle").at(m);
        if (orc == src) {
          g[m] = nullptr;
        } else {
          g[m] = closed_gap(acc.at(m), src, orc);
        }
      }
      gaps[mode] = std::move(g);
    }
  }
  report["closed_gap"] = std::move(gaps);
  report["runtime_seconds"] = total_runtime;
  atomic_write_text(out_path, report.dump(2) + "\n");
}

void run_diagnostics(const std::string& model_path, const std::string& data_path,
                     const std::string& out_dir, const InferenceConfig& inf,
                     const std::string& train_log_path) {
  const Checkpoint ck = load_checkpoint(model_path);
  const auto scenes = load_dataset_jsonl(data_path);

  std::ostringstream scatter;
  scatter << "score,bev_iou,iou3d\n";
  std::array<size_t, 20> hist{};
  size_t n_dets = 0;
  for (const auto& scene : scenes) {
    const auto sd = run_inference(ck.params, scene, inf, ck.pixel_size_constant);
    for (const auto& det : sd.dets) {
      double best_bev = 0.0, best_3d = 0.0;
      for (const auto& gt : scene.gt_boxes) {
        best_bev = std::max(best_bev, bev_iou(det.box, gt));
        best_3d = std::max(best_3d, iou3d(det.box, gt));
      }
      scatter << csv_number(det.score) << ',' << csv_number(best_bev) << ','
              << csv_number(best_3d) << '\n';
      int bin = static_cast<int>(det.score * 20.0);
      if (bin > 19) bin = 19;
      if (bin < 0) bin = 0;
      ++hist[static_cast<size_t>(bin)];
      ++n_dets;
    }
  }
  std::filesystem::create_directories(out_dir);
  atomic_write_text(out_dir + "/score_iou_scatter.csv", scatter.str());

  std::ostringstream histcsv;
  histcsv << "bin_lo,bin_hi,count\n";
  for (int b = 0; b < 20; ++b) {
    histcsv << csv_number(b / 20.0) << ',' << csv_number((b + 1) / 20.0) << ','
            << hist[static_cast<size_t>(b)] << '\n';
  }
  atomic_write_text(out_dir + "/score_hist.csv", histcsv.str());
  (void)n_dets;

  if (!train_log_path.empty()) {
    const auto rows = load_metric_csv(train_log_path);
    std::ostringstream wcsv;
    wcsv << "window,iter_lo,iter_hi,mean_n_pseudo\n";
    int64_t window = 0;
    for (size_t i = 0; i < rows.size();) {
      const int64_t lo = window * 100;
      const int64_t hi = lo + 99;
      double sum = 0.0;
      int count = 0;
      while (i < rows.size() && rows[i].iter <= hi) {
        if (rows[i].n_pseudo) {
          sum += *rows[i].n_pseudo;
          ++count;
        }
        ++i;
      }
      if (count > 0) {
        wcsv << window << ',' << lo << ',' << hi << ',' << csv_number(sum / count) << '\n';
      }
      ++window;
    }
    atomic_write_text(out_dir + "/pseudo_counts.csv", wcsv.str());
  }
}

DepthRatioStats depth_ratio_stats(const ModelParams& params, double pixel_size_constant,
                                  const std::vector<SceneSample>& scenes) {
  std::vector<double> ratios;
  for (const auto& scene : scenes) {
    const auto heads = forward(params, scene);
    for (size_t i = 0; i < heads.size(); ++i) {
      const auto& cand = scene.candidates[i];
      if (!cand.gt) continue;
      const Detection det = decode(heads[i], cand.features, scene.camera, pixel_size_constant,
                                   params.depth_mode);
      if (!is_finite(det)) continue;
      ratios.push_back(det.box.cz / cand.gt->cz);
    }
  }
  DepthRatioStats out;
  out.n = ratios.size();
  if (ratios.empty()) return out;
  std::sort(ratios.begin(), ratios.end());
  const size_t mid = ratios.size() / 2;
  out.median_ratio =
      ratios.size() % 2 == 1 ? ratios[mid] : 0.5 * (ratios[mid - 1] + ratios[mid]);
  return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return 0.0;
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> order(v.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t l, size_t r) { return v[l] < v[r]; });
    std::vector<double> rank(v.size());
    size_t i = 0;
    while (i < order.size()) {
      size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
      i = j + 1;
    }
    return rank;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= ra.size();
  mb /= rb.size();
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace m3d
