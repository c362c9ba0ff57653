#include "m3d/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace m3d {

namespace {

double box_iou(const Box3D& a, const Box3D& b, MatchSpace space) {
  return space == MatchSpace::kBev ? bev_iou(a, b) : iou3d(a, b);
}

}  // namespace

MatchResult match_detections(std::span<const std::vector<Detection>> dets_per_scene,
                             std::span<const std::vector<Box3D>> gts_per_scene,
                             const EvalConfig& cfg) {
  if (dets_per_scene.size() != gts_per_scene.size()) {
    throw std::invalid_argument("match_detections: scene count mismatch");
  }
  struct Ref {
    size_t scene;
    size_t idx;
  };
  std::vector<Ref> refs;
  for (size_t s = 0; s < dets_per_scene.size(); ++s) {
    for (size_t i = 0; i < dets_per_scene[s].size(); ++i) refs.push_back({s, i});
  }
  std::sort(refs.begin(), refs.end(), [&](const Ref& l, const Ref& r) {
    const double sl = dets_per_scene[l.scene][l.idx].score;
    const double sr = dets_per_scene[r.scene][r.idx].score;
    if (sl != sr) return sl > sr;
    if (l.scene != r.scene) return l.scene < r.scene;
    return l.idx < r.idx;
  });

  MatchResult res;
  for (const auto& gts : gts_per_scene) res.n_gt += gts.size();

  std::vector<std::vector<char>> gt_used(gts_per_scene.size());
  for (size_t s = 0; s < gts_per_scene.size(); ++s) gt_used[s].assign(gts_per_scene[s].size(), 0);

  res.tp_flags.reserve(refs.size());
  res.scores.reserve(refs.size());
  for (const auto& ref : refs) {
    const Detection& det = dets_per_scene[ref.scene][ref.idx];
    const std::vector<Box3D>& gts = gts_per_scene[ref.scene];
    double best_iou = -1.0;
    size_t best_gt = 0;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[ref.scene][g]) continue;
      const double iou = box_iou(det.box, gts[g], cfg.match_space);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = g;
      }
    }
    const bool tp = best_iou >= cfg.iou_threshold;
    if (tp) {
      gt_used[ref.scene][best_gt] = 1;
      res.pairs.push_back({det.box, gts[best_gt], det.score});
    }
    res.tp_flags.push_back(tp ? 1 : 0);
    res.scores.push_back(det.score);
  }
  return res;
}

double average_precision(std::span<const char> tp_flags, std::span<const double> scores,
                         size_t n_gt, ApMode mode) {
  if (tp_flags.size() != scores.size()) {
    throw std::invalid_argument("average_precision: flags/scores size mismatch");
  }
  if (n_gt == 0) return 0.0;

  std::vector<size_t> order(tp_flags.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t l, size_t r) { return scores[l] > scores[r]; });

  std::vector<double> recall, precision;
  recall.reserve(order.size());
  precision.reserve(order.size());
  size_t tp = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (tp_flags[order[rank]]) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
  }

  const int n_anchor = mode == ApMode::kAp11 ? 11 : 40;
  double acc = 0.0;
  for (int a = 0; a < n_anchor; ++a) {
    const double anchor = mode == ApMode::kAp11 ? 0.1 * a : static_cast<double>(a + 1) / 40.0;
    double best = 0.0;
    for (size_t i = 0; i < recall.size(); ++i) {
      if (recall[i] >= anchor) best = std::max(best, precision[i]);
    }
    acc += best;
  }
  return acc / n_anchor;
}

double closed_gap(double result, double source_only, double oracle) {
  if (oracle == source_only) {
    throw std::invalid_argument("closed_gap: oracle equals source_only, gap undefined");
  }
  return 100.0 * (result - source_only) / (oracle - source_only);
}

std::optional<ErrorMeans> aggregate_errors(std::span<const MatchedPair> pairs) {
  if (pairs.empty()) return std::nullopt;
  ErrorMeans m;
  for (const auto& p : pairs) {
    const PairErrors e = pair_errors(p.pred, p.gt);
    m.mate += e.trans;
    m.mase += e.scale;
    m.maoe += e.orient;
  }
  const double n = static_cast<double>(pairs.size());
  m.mate /= n;
  m.mase /= n;
  m.maoe /= n;
  return m;
}

EvalResult evaluate(std::span<const std::vector<Detection>> dets_per_scene,
                    std::span<const std::vector<Box3D>> gts_per_scene,
                    const EvalConfig& cfg) {
  const MatchResult m = match_detections(dets_per_scene, gts_per_scene, cfg);
  EvalResult out;
  out.ap = average_precision(m.tp_flags, m.scores, m.n_gt, cfg.ap_mode);
  for (char f : m.tp_flags) {
    if (f) ++out.tp;
    else ++out.fp;
  }
  out.fn = m.n_gt - out.tp;
  out.errors = aggregate_errors(m.pairs);
  return out;
}

}  // namespace m3d
