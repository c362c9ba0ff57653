#include "m3d/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "m3d/errors.hpp"

namespace m3d {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

json camera_to_json(const CameraIntrinsics& k) {
  return json{{"fx", k.fx}, {"fy", k.fy}, {"px", k.px},
              {"py", k.py}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics camera_from_json(const json& j) {
  CameraIntrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.px = j.at("px").get<double>();
  k.py = j.at("py").get<double>();
  k.width = j.at("width").get<double>();
  k.height = j.at("height").get<double>();
  return k;
}

json box_to_json(const Box3D& b) {
  return json{{"cls", b.class_id},
              {"loc", {b.cx, b.cy, b.cz}},
              {"dim", {b.dx, b.dy, b.dz}},
              {"yaw", b.yaw}};
}

Box3D box_from_json(const json& j) {
  Box3D b;
  b.class_id = j.at("cls").get<int>();
  b.cx = j.at("loc").at(0).get<double>();
  b.cy = j.at("loc").at(1).get<double>();
  b.cz = j.at("loc").at(2).get<double>();
  b.dx = j.at("dim").at(0).get<double>();
  b.dy = j.at("dim").at(1).get<double>();
  b.dz = j.at("dim").at(2).get<double>();
  b.yaw = j.at("yaw").get<double>();
  return b;
}

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + tmp.string());
    out << content;
    if (!out.flush()) throw ConfigError("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void save_dataset_jsonl(const std::vector<SceneSample>& scenes, const std::string& path) {
  std::ostringstream out;
  for (const auto& scene : scenes) {
    json j;
    j["camera"] = camera_to_json(scene.camera);
    json cands = json::array();
    for (const auto& cand : scene.candidates) {
      json c;
      c["feat"] = cand.features;
      c["gt"] = cand.gt ? box_to_json(*cand.gt) : json(nullptr);
      cands.push_back(std::move(c));
    }
    j["candidates"] = std::move(cands);
    out << j.dump() << '\n';
  }
  atomic_write_text(path, out.str());
}

std::vector<SceneSample> load_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset: " + path);
  std::vector<SceneSample> scenes;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
    SceneSample scene;
    scene.camera = camera_from_json(j.at("camera"));
    for (const auto& c : j.at("candidates")) {
      Candidate cand;
      const auto& feat = c.at("feat");
      if (feat.size() != static_cast<size_t>(kFeatureDim)) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": bad feature length");
      }
      for (int i = 0; i < kFeatureDim; ++i) cand.features[i] = feat.at(i).get<double>();
      if (!c.at("gt").is_null()) {
        cand.gt = box_from_json(c.at("gt"));
        scene.gt_boxes.push_back(*cand.gt);
      }
      scene.candidates.push_back(std::move(cand));
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

void save_checkpoint(const ModelParams& params, double pixel_size_constant,
                     const std::string& path) {
  json j;
  j["layer_dims"] = params.manifest.dims;
  j["depth_mode"] = params.depth_mode == DepthMode::kMetric ? "METRIC" : "PIXEL_SIZE";
  j["pixel_size_constant"] = pixel_size_constant;
  j["params"] = params.values;
  atomic_write_text(path, j.dump());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": bad checkpoint JSON: " + std::string(e.what()));
  }
  Checkpoint ck;
  ck.params.manifest.dims = j.at("layer_dims").get<std::vector<int>>();
  const std::string mode = j.at("depth_mode").get<std::string>();
  if (mode == "METRIC") {
    ck.params.depth_mode = DepthMode::kMetric;
  } else if (mode == "PIXEL_SIZE") {
    ck.params.depth_mode = DepthMode::kPixelSize;
  } else {
    throw ConfigError(path + ": unknown depth mode: " + mode);
  }
  ck.pixel_size_constant = j.at("pixel_size_constant").get<double>();
  ck.params.values = j.at("params").get<std::vector<double>>();
  validate(ck.params);
  return ck;
}

std::string metric_csv_header() {
  return "iter,lr,tau,n_pseudo,loss_src_cls,loss_src_reg,loss_tgt_cls,loss_tgt_reg,"
         "teacher_ap,student_ap";
}

std::string metric_csv_row(const TrainLogRow& r) {
  std::ostringstream out;
  auto cell = [&out](const std::optional<double>& v) {
    out << ',';
    if (v) out << format_double(*v);
  };
  out << r.iter << ',' << format_double(r.lr);
  cell(r.tau);
  out << ',';
  if (r.n_pseudo) out << *r.n_pseudo;
  cell(r.loss_src_cls);
  cell(r.loss_src_reg);
  cell(r.loss_tgt_cls);
  cell(r.loss_tgt_reg);
  cell(r.teacher_ap);
  cell(r.student_ap);
  return out.str();
}

void save_metric_csv(const std::vector<TrainLogRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << metric_csv_header() << '\n';
  for (const auto& row : rows) out << metric_csv_row(row) << '\n';
  atomic_write_text(path, out.str());
}

std::vector<TrainLogRow> load_metric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metric csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty metric csv: " + path);
  if (line != metric_csv_header()) throw ConfigError("unexpected metric csv header in " + path);

  std::vector<TrainLogRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.resize(10);
    TrainLogRow r;
    r.iter = std::stoll(cells[0]);
    r.lr = std::stod(cells[1]);
    auto opt_double = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    r.tau = opt_double(cells[2]);
    if (!cells[3].empty()) r.n_pseudo = std::stoi(cells[3]);
    r.loss_src_cls = opt_double(cells[4]);
    r.loss_src_reg = opt_double(cells[5]);
    r.loss_tgt_cls = opt_double(cells[6]);
    r.loss_tgt_reg = opt_double(cells[7]);
    r.teacher_ap = opt_double(cells[8]);
    r.student_ap = opt_double(cells[9]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace m3d
