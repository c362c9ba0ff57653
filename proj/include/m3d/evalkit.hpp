#pragma once

#include <optional>
#include <span>
#include <vector>

#include "m3d/boxes.hpp"

namespace m3d {

enum class ApMode { kAp11, kAp40 };
enum class MatchSpace { kBev, k3d };

struct EvalConfig {
  double iou_threshold = 0.5;
  ApMode ap_mode = ApMode::kAp40;
  MatchSpace match_space = MatchSpace::k3d;
};

struct MatchedPair {
  Box3D pred;
  Box3D gt;
  double score = 0.0;
};

// Per-detection outcome in globally descending score order (ties broken by
// scene, then by within-scene input index).
struct MatchResult {
  std::vector<char> tp_flags;
  std::vector<double> scores;
  std::vector<MatchedPair> pairs;
  size_t n_gt = 0;
};

// Greedy single-match protocol: walk detections by descending score; a
// detection is a true positive iff its best still-unmatched ground truth in
// the same scene reaches the IoU threshold.
MatchResult match_detections(std::span<const std::vector<Detection>> dets_per_scene,
                             std::span<const std::vector<Box3D>> gts_per_scene,
                             const EvalConfig& cfg);

// Interpolated average precision over 11 or 40 recall anchors. Flags and
// scores are sorted internally (descending score, stable). n_gt == 0 yields 0.
double average_precision(std::span<const char> tp_flags, std::span<const double> scores,
                         size_t n_gt, ApMode mode);

// 100 * (result - source_only) / (oracle - source_only), in percent.
// Throws std::invalid_argument when oracle == source_only.
double closed_gap(double result, double source_only, double oracle);

struct ErrorMeans {
  double mate = 0.0;  // meters
  double mase = 0.0;  // dimensionless
  double maoe = 0.0;  // radians
};

// Means of pair_errors over matched pairs; absent when there are none.
std::optional<ErrorMeans> aggregate_errors(std::span<const MatchedPair> pairs);

struct EvalResult {
  double ap = 0.0;
  size_t tp = 0, fp = 0, fn = 0;
  std::optional<ErrorMeans> errors;
};

EvalResult evaluate(std::span<const std::vector<Detection>> dets_per_scene,
                    std::span<const std::vector<Box3D>> gts_per_scene,
                    const EvalConfig& cfg);

}  // namespace m3d
