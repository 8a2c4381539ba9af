#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "emotive/core.hpp"
#include "emotive/nurbs.hpp"

namespace emotive {

struct FlowField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> u, v;       // row-major H*W
  std::vector<std::uint8_t> valid;

  static FlowField zeros(std::size_t h, std::size_t w, bool all_valid = true) {
    FlowField f;
    f.height = h;
    f.width = w;
    f.u.assign(h * w, 0.0);
    f.v.assign(h * w, 0.0);
    f.valid.assign(h * w, all_valid ? 1 : 0);
    return f;
  }
};

/// Depth ratio Z(t)/Z(0) per pixel; invalid pixels hold 1.
struct MiDField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> m;
  std::vector<std::uint8_t> valid;

  static MiDField ones(std::size_t h, std::size_t w, bool all_valid = true) {
    MiDField f;
    f.height = h;
    f.width = w;
    f.m.assign(h * w, 1.0);
    f.valid.assign(h * w, all_valid ? 1 : 0);
    return f;
  }
};

/// Depth-normalized scene flow, three components per pixel.
struct NormalizedSceneFlow {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> s;  // H*W*3
};

struct MetricsReport {
  double epe = 0.0;
  double f1 = 0.0;      // percent
  double logmid = 0.0;  // 1e4 * mean |ln ratio error|
  std::size_t valid_count = 0;
};

/// Trajectory displacement at tau, bilinearly upsampled (corner-aligned) to
/// the sensor resolution when the control grid is smaller.
FlowField optical_flow(const Trajectory& traj, double tau, std::size_t sensor_h = 0,
                       std::size_t sensor_w = 0);

/// Per-pixel depth ratio from the local trajectory value and velocities:
///   M = (v(0) t1 + x(t1)) / (v(t1) t1 + x(t1))
/// evaluated on the x component, falling back to y when the denominator is
/// degenerate; pixels degenerate on both axes report 1 with valid = false.
MiDField motion_in_depth_single(const Trajectory& traj, double t1);

/// Transports single-view estimates at each timestamp to the last one via
/// M_k = (t_k/t_i)(M_i - 1) + 1 and averages the valid ones per pixel.
MiDField motion_in_depth_multiview(const Trajectory& traj, std::span<const double> timestamps);

/// The multi-view transport relation itself.
inline double transport_mid(double m, double t_from, double t_to) {
  return t_to / t_from * (m - 1.0) + 1.0;
}

/// S = (M - 1) * (x, y, 1) + M * (u, v, 0) per pixel. `intrinsics` is part
/// of the interface for parity with the direct 3D route; the pixel-domain
/// formula does not consume it.
NormalizedSceneFlow normalized_scene_flow(const FlowField& flow, const MiDField& mid,
                                          const CameraIntrinsics& intrinsics);

/// Depth-warp label M(x) = Z1(x + flow(x)) / Z0(x) with bilinear sampling
/// of Z1. Pixels whose warped sample lands near a depth discontinuity
/// (3x3 range above 10% of the center depth) or within `boundary_margin`
/// pixels of one (or of the image border) are masked out.
MiDField mid_label_from_depth(const Tensor& z0, const Tensor& z1, const FlowField& flow,
                              std::size_t boundary_margin);

/// EPE / outlier ratio (err > 3 px and > 5% of ground-truth magnitude) /
/// scaled log depth-ratio error over the valid mask.
MetricsReport metrics(const FlowField& pred_flow, const FlowField& gt_flow,
                      const MiDField& pred_mid, const MiDField& gt_mid,
                      const std::vector<std::uint8_t>& valid);

}  // namespace emotive
