#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace m3d {

// Oriented 3D box in the camera frame. (cx, cz) is the ground-plane center,
// cy the vertical center (y down), dx/dy the ground-plane extents, dz the
// vertical extent. yaw rotates the footprint in the (x, z) plane and is kept
// normalized to [-pi, pi).
struct Box3D {
  int class_id = 0;
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double yaw = 0.0;
};

struct Detection {
  Box3D box;
  double score = 0.0;
};

// Wraps into [-pi, pi).
double normalize_yaw(double yaw);

// Footprint corners in the (x, z) ground plane, counter-clockwise.
std::array<std::array<double, 2>, 4> bev_corners(const Box3D& b);

// Rotated-rectangle intersection-over-union in the ground plane via convex
// polygon clipping. Numerically collapsed shapes yield 0.
double bev_iou(const Box3D& a, const Box3D& b);

// BEV intersection area times vertical overlap, over the union of volumes.
double iou3d(const Box3D& a, const Box3D& b);

// Greedy descending-score suppression with bev_iou > iou_thr; at most
// max_keep survivors; output ordered by score, ties by input index.
std::vector<size_t> nms_indices(std::span<const Detection> dets, double iou_thr, size_t max_keep);
std::vector<Detection> nms(std::span<const Detection> dets, double iou_thr, size_t max_keep);

struct PairErrors {
  double trans = 0.0;   // ground-plane center distance, meters
  double scale = 0.0;   // 1 - size IoU after aligning centers and yaw
  double orient = 0.0;  // smallest absolute yaw difference, [0, pi]
};

PairErrors pair_errors(const Box3D& pred, const Box3D& gt);

}  // namespace m3d
