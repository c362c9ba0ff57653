#include "m3d/camera.hpp"

#include <cmath>
#include <stdexcept>

#include "m3d/errors.hpp"

namespace m3d {

bool is_valid(const CameraIntrinsics& k) {
  return k.fx > 0.0 && k.fy > 0.0 && k.width > 0.0 && k.height > 0.0 &&
         k.px >= 0.0 && k.px <= k.width && k.py >= 0.0 && k.py <= k.height &&
         std::isfinite(k.fx) && std::isfinite(k.fy) && std::isfinite(k.px) &&
         std::isfinite(k.py) && std::isfinite(k.width) && std::isfinite(k.height);
}

void validate(const CameraIntrinsics& k) {
  if (!is_valid(k)) {
    throw std::invalid_argument("camera intrinsics out of range");
  }
}

PixelPoint project(const std::array<double, 3>& point, const CameraIntrinsics& k) {
  if (!(point[2] > 0.0)) {
    throw std::invalid_argument("project: point depth must be positive");
  }
  PixelPoint p;
  p.u = k.fx * point[0] / point[2] + k.px;
  p.v = k.fy * point[1] / point[2] + k.py;
  p.depth = point[2];
  return p;
}

std::array<double, 3> backproject(double u, double v, double depth, const CameraIntrinsics& k) {
  return {(u - k.px) * depth / k.fx, (v - k.py) * depth / k.fy, depth};
}

double pixel_size(const CameraIntrinsics& k) {
  return std::sqrt(1.0 / (k.fx * k.fx) + 1.0 / (k.fy * k.fy));
}

double metric_to_pixel_depth(double metric_depth, const CameraIntrinsics& k, double c) {
  if (!(c > 0.0)) {
    throw ConfigError("pixel-size depth constant must be positive");
  }
  return pixel_size(k) / c * metric_depth;
}

double pixel_to_metric_depth(double pixel_depth, const CameraIntrinsics& k, double c) {
  if (!(c > 0.0)) {
    throw ConfigError("pixel-size depth constant must be positive");
  }
  return c / pixel_size(k) * pixel_depth;
}

CameraIntrinsics rescale_intrinsics(const CameraIntrinsics& k, const ScaleFactors& s) {
  CameraIntrinsics out;
  out.fx = s.rx * k.fx;
  out.px = s.rx * k.px;
  out.width = s.rx * k.width;
  out.fy = s.ry * k.fy;
  out.py = s.ry * k.py;
  out.height = s.ry * k.height;
  return out;
}

ScaleFactors sample_scale(Rng& rng, std::span<const ScaleFactors> scale_set) {
  if (scale_set.empty()) {
    throw ConfigError("sample_scale: empty scale set");
  }
  const auto idx = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(scale_set.size()) - 1));
  return scale_set[idx];
}

}  // namespace m3d
