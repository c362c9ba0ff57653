#include "m3d/boxes.hpp"

#include <algorithm>
#include <cmath>

namespace m3d {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kAreaEps = 1e-9;    // area below this counts as degenerate
constexpr double kVertexEps = 1e-12; // vertices closer than this are merged

using Point2 = std::array<double, 2>;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

double polygon_area(const std::vector<Point2>& poly) {
  double acc = 0.0;
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    acc += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * acc;
}

// Sutherland-Hodgman clip of `subject` against the CCW convex `clip`.
std::vector<Point2> clip_convex(std::vector<Point2> subject, const std::array<Point2, 4>& clip) {
  for (size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % clip.size()];
    std::vector<Point2> out;
    out.reserve(subject.size() + 2);
    for (size_t i = 0; i < subject.size(); ++i) {
      const Point2& p = subject[i];
      const Point2& q = subject[(i + 1) % subject.size()];
      const double dp = cross(a, b, p);
      const double dq = cross(a, b, q);
      if (dp >= 0.0) {
        out.push_back(p);
      }
      if ((dp > 0.0 && dq < 0.0) || (dp < 0.0 && dq > 0.0)) {
        const double t = dp / (dp - dq);
        out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
      }
    }
    subject = std::move(out);
  }
  // Merge near-coincident consecutive vertices left behind by clipping.
  std::vector<Point2> merged;
  merged.reserve(subject.size());
  for (const auto& p : subject) {
    if (!merged.empty() && std::abs(p[0] - merged.back()[0]) < kVertexEps &&
        std::abs(p[1] - merged.back()[1]) < kVertexEps) {
      continue;
    }
    merged.push_back(p);
  }
  while (merged.size() > 1 && std::abs(merged.front()[0] - merged.back()[0]) < kVertexEps &&
         std::abs(merged.front()[1] - merged.back()[1]) < kVertexEps) {
    merged.pop_back();
  }
  return merged;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  std::vector<Point2> subject(ca.begin(), ca.end());
  const auto poly = clip_convex(std::move(subject), cb);
  if (poly.size() < 3) return 0.0;
  const double area = polygon_area(poly);
  return area < kAreaEps ? 0.0 : area;
}

double vertical_overlap(const Box3D& a, const Box3D& b) {
  const double lo = std::max(a.cy - 0.5 * a.dz, b.cy - 0.5 * b.dz);
  const double hi = std::min(a.cy + 0.5 * a.dz, b.cy + 0.5 * b.dz);
  return std::max(0.0, hi - lo);
}

}  // namespace

double normalize_yaw(double yaw) {
  double r = std::fmod(yaw + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  return r - kPi;
}

std::array<std::array<double, 2>, 4> bev_corners(const Box3D& b) {
  const double hx = 0.5 * b.dx;
  const double hz = 0.5 * b.dy;
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const std::array<std::array<double, 2>, 4> local = {{{hx, hz}, {-hx, hz}, {-hx, -hz}, {hx, -hz}}};
  std::array<std::array<double, 2>, 4> out;
  for (size_t i = 0; i < 4; ++i) {
    out[i][0] = b.cx + local[i][0] * c - local[i][1] * s;
    out[i][1] = b.cz + local[i][0] * s + local[i][1] * c;
  }
  return out;
}

double bev_iou(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  const double area_a = a.dx * a.dy;
  const double area_b = b.dx * b.dy;
  const double uni = area_a + area_b - inter;
  if (uni < kAreaEps) return 0.0;
  return inter / uni;
}

double iou3d(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b) * vertical_overlap(a, b);
  const double vol_a = a.dx * a.dy * a.dz;
  const double vol_b = b.dx * b.dy * b.dz;
  const double uni = vol_a + vol_b - inter;
  if (uni < kAreaEps) return 0.0;
  return inter / uni;
}

std::vector<size_t> nms_indices(std::span<const Detection> dets, double iou_thr, size_t max_keep) {
  std::vector<size_t> order(dets.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t l, size_t r) {
    if (dets[l].score != dets[r].score) return dets[l].score > dets[r].score;
    return l < r;
  });
  std::vector<size_t> kept;
  for (size_t idx : order) {
    if (kept.size() >= max_keep) break;
    bool suppressed = false;
    for (size_t k : kept) {
      if (bev_iou(dets[idx].box, dets[k].box) > iou_thr) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_thr, size_t max_keep) {
  std::vector<Detection> out;
  for (size_t idx : nms_indices(dets, iou_thr, max_keep)) out.push_back(dets[idx]);
  return out;
}

PairErrors pair_errors(const Box3D& pred, const Box3D& gt) {
  PairErrors e;
  const double dx = pred.cx - gt.cx;
  const double dz = pred.cz - gt.cz;
  e.trans = std::sqrt(dx * dx + dz * dz);

  // Pure size IoU: overlap of the two extents with centers and yaw aligned.
  const double inter = std::min(pred.dx, gt.dx) * std::min(pred.dy, gt.dy) * std::min(pred.dz, gt.dz);
  const double uni = pred.dx * pred.dy * pred.dz + gt.dx * gt.dy * gt.dz - inter;
  e.scale = uni > 0.0 ? 1.0 - inter / uni : 0.0;

  e.orient = std::abs(normalize_yaw(pred.yaw - gt.yaw));
  return e;
}

}  // namespace m3d
