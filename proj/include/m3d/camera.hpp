#pragma once

#include <array>
#include <span>

#include "m3d/rng.hpp"

namespace m3d {

// Pinhole intrinsics plus nominal image extent. Extents are real-valued:
// rescaling never rounds because no raster images exist in this world.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double px = 0.0;
  double py = 0.0;
  double width = 0.0;
  double height = 0.0;
};

bool is_valid(const CameraIntrinsics& k);
void validate(const CameraIntrinsics& k);  // throws std::invalid_argument

struct ScaleFactors {
  double rx = 1.0;
  double ry = 1.0;
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

// Camera-frame point (x right, y down, z forward) to pixel coordinates.
// Requires point z > 0.
PixelPoint project(const std::array<double, 3>& point, const CameraIntrinsics& k);

// Pixel plus depth back to the camera frame.
std::array<double, 3> backproject(double u, double v, double depth, const CameraIntrinsics& k);

// s = sqrt(1/fx^2 + 1/fy^2).
double pixel_size(const CameraIntrinsics& k);

// d_p = (s / c) * d_g. The constant c must be positive.
double metric_to_pixel_depth(double metric_depth, const CameraIntrinsics& k, double c);

// Exact inverse of metric_to_pixel_depth.
double pixel_to_metric_depth(double pixel_depth, const CameraIntrinsics& k, double c);

// Row-wise intrinsic rescale: row x of K by rx, row y by ry. The principal
// point scales with the focal length, as does the image extent.
CameraIntrinsics rescale_intrinsics(const CameraIntrinsics& k, const ScaleFactors& s);

// Uniform draw from a non-empty scale set; deterministic given the rng state.
ScaleFactors sample_scale(Rng& rng, std::span<const ScaleFactors> scale_set);

// Pixel size of a square-pixel f = 1000 reference camera. Pixel-size depths
// expressed against this constant have metric-like magnitudes.
inline constexpr double kDefaultPixelSizeConstant = 0.0014142135623730951;

}  // namespace m3d
