#include "m3d/scene.hpp"

namespace m3d {

bool gt_boxes_aligned(const SceneSample& s) {
  size_t gi = 0;
  for (const auto& c : s.candidates) {
    if (!c.gt) continue;
    if (gi >= s.gt_boxes.size()) return false;
    const Box3D& a = *c.gt;
    const Box3D& b = s.gt_boxes[gi];
    if (a.class_id != b.class_id || a.cx != b.cx || a.cy != b.cy || a.cz != b.cz ||
        a.dx != b.dx || a.dy != b.dy || a.dz != b.dz || a.yaw != b.yaw) {
      return false;
    }
    ++gi;
  }
  return gi == s.gt_boxes.size();
}

SceneSample gams_rescale(const SceneSample& sample, const ScaleFactors& scale) {
  SceneSample out = sample;
  out.camera = rescale_intrinsics(sample.camera, scale);
  for (auto& cand : out.candidates) {
    cand.features[kFeatU] *= scale.rx;
    cand.features[kFeatV] *= scale.ry;
    cand.features[kFeatW] *= scale.rx;
    cand.features[kFeatH] *= scale.ry;
  }
  return out;
}

}  // namespace m3d
