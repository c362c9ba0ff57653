#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "m3d/detector.hpp"
#include "m3d/scene.hpp"
#include "m3d/selftrain.hpp"

namespace m3d {

nlohmann::json camera_to_json(const CameraIntrinsics& k);
CameraIntrinsics camera_from_json(const nlohmann::json& j);
nlohmann::json box_to_json(const Box3D& b);
Box3D box_from_json(const nlohmann::json& j);

// Writes content to path via a temp file plus rename.
void atomic_write_text(const std::string& path, const std::string& content);

// One scene per line:
// {"camera":{...},"candidates":[{"feat":[u,v,w,h,a1..a4],"gt":{...}|null}]}
// Doubles round-trip exactly.
void save_dataset_jsonl(const std::vector<SceneSample>& scenes, const std::string& path);
std::vector<SceneSample> load_dataset_jsonl(const std::string& path);

// Flat parameter checkpoint with manifest header.
void save_checkpoint(const ModelParams& params, double pixel_size_constant,
                     const std::string& path);
struct Checkpoint {
  ModelParams params;
  double pixel_size_constant = kDefaultPixelSizeConstant;
};
Checkpoint load_checkpoint(const std::string& path);

// Metric log CSV. Absent values serialize as empty cells.
std::string metric_csv_header();
std::string metric_csv_row(const TrainLogRow& row);
void save_metric_csv(const std::vector<TrainLogRow>& rows, const std::string& path);
std::vector<TrainLogRow> load_metric_csv(const std::string& path);

}  // namespace m3d
