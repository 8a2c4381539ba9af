#include "emotive/motion.hpp"

#include <algorithm>
#include <cmath>

namespace emotive {
namespace {

constexpr double kMidEps = 1e-6;

// Corner-aligned bilinear resize of an interleaved 2-channel field.
void upsample_bilinear(const DisplacementField& src, FlowField& dst) {
  const std::size_t H = dst.height, W = dst.width;
  const double sy = H > 1 ? static_cast<double>(src.height - 1) / static_cast<double>(H - 1) : 0.0;
  const double sx = W > 1 ? static_cast<double>(src.width - 1) / static_cast<double>(W - 1) : 0.0;
#pragma omp parallel for schedule(static)
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double fy = static_cast<double>(y) * sy;
      double fx = static_cast<double>(x) * sx;
      std::size_t y0 = std::min(static_cast<std::size_t>(fy), src.height - 1);
      std::size_t x0 = std::min(static_cast<std::size_t>(fx), src.width - 1);
      std::size_t y1 = std::min(y0 + 1, src.height - 1);
      std::size_t x1 = std::min(x0 + 1, src.width - 1);
      double wy = fy - static_cast<double>(y0);
      double wx = fx - static_cast<double>(x0);
      for (int c = 0; c < 2; ++c) {
        double v00 = src.uv[(y0 * src.width + x0) * 2 + c];
        double v01 = src.uv[(y0 * src.width + x1) * 2 + c];
        double v10 = src.uv[(y1 * src.width + x0) * 2 + c];
        double v11 = src.uv[(y1 * src.width + x1) * 2 + c];
        double val = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
        (c == 0 ? dst.u : dst.v)[y * W + x] = val;
      }
    }
}

}  // namespace

FlowField optical_flow(const Trajectory& traj, double tau, std::size_t sensor_h,
                       std::size_t sensor_w) {
  DisplacementField d = eval_trajectory(traj, tau);
  if (sensor_h == 0) sensor_h = d.height;
  if (sensor_w == 0) sensor_w = d.width;
  FlowField out = FlowField::zeros(sensor_h, sensor_w);
  if (sensor_h == d.height && sensor_w == d.width) {
    for (std::size_t i = 0; i < sensor_h * sensor_w; ++i) {
      out.u[i] = d.uv[2 * i];
      out.v[i] = d.uv[2 * i + 1];
    }
  } else {
    upsample_bilinear(d, out);
  }
  return out;
}

MiDField motion_in_depth_single(const Trajectory& traj, double t1) {
  if (!(t1 > 0.0) || !(t1 <= 1.0))
    raise(Errc::invalid_argument, "motion-in-depth time must lie in (0, 1]");
  DisplacementField x1 = eval_trajectory(traj, t1);
  DisplacementField v0 = eval_velocity(traj, 0.0);
  DisplacementField v1 = eval_velocity(traj, t1);

  MiDField out = MiDField::ones(x1.height, x1.width);
  const std::size_t cells = x1.height * x1.width;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < cells; ++i) {
    double m = 1.0;
    bool ok = false;
    for (int axis = 0; axis < 2 && !ok; ++axis) {
      double num = v0.uv[2 * i + axis] * t1 + x1.uv[2 * i + axis];
      double den = v1.uv[2 * i + axis] * t1 + x1.uv[2 * i + axis];
      if (std::abs(den) >= kMidEps) {
        m = num / den;
        ok = true;
      }
    }
    if (ok && !(m > 0.0)) ok = false;  // depth ratios are positive where meaningful
    out.m[i] = ok ? m : 1.0;
    out.valid[i] = ok ? 1 : 0;
  }
  return out;
}

MiDField motion_in_depth_multiview(const Trajectory& traj, std::span<const double> timestamps) {
  if (timestamps.empty()) raise(Errc::empty_timestamps, "need at least one timestamp");
  for (std::size_t i = 0; i + 1 < timestamps.size(); ++i)
    if (!(timestamps[i] < timestamps[i + 1]))
      raise(Errc::invalid_argument, "timestamps must be strictly increasing");

  const double t_k = timestamps.back();
  std::vector<MiDField> views;
  views.reserve(timestamps.size());
  for (double t : timestamps) views.push_back(motion_in_depth_single(traj, t));

  MiDField out = MiDField::ones(views[0].height, views[0].width);
  const std::size_t cells = out.height * out.width;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < cells; ++i) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (!views[v].valid[i]) continue;
      double t_i = timestamps[v];
      acc += t_i == t_k ? views[v].m[i] : transport_mid(views[v].m[i], t_i, t_k);
      count++;
    }
    if (count > 0) {
      out.m[i] = count == 1 ? acc : acc / static_cast<double>(count);
      out.valid[i] = 1;
    } else {
      out.m[i] = 1.0;
      out.valid[i] = 0;
    }
  }
  return out;
}

NormalizedSceneFlow normalized_scene_flow(const FlowField& flow, const MiDField& mid,
                                          [[maybe_unused]] const CameraIntrinsics& intrinsics) {
  if (flow.height != mid.height || flow.width != mid.width)
    raise(Errc::shape_mismatch, "flow and depth-ratio fields must share a shape");
  NormalizedSceneFlow out;
  out.height = flow.height;
  out.width = flow.width;
  out.s.assign(flow.height * flow.width * 3, 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t y = 0; y < flow.height; ++y)
    for (std::size_t x = 0; x < flow.width; ++x) {
      std::size_t i = y * flow.width + x;
      double m = mid.m[i];
      out.s[3 * i + 0] = (m - 1.0) * static_cast<double>(x) + m * flow.u[i];
      out.s[3 * i + 1] = (m - 1.0) * static_cast<double>(y) + m * flow.v[i];
      out.s[3 * i + 2] = m - 1.0;
    }
  return out;
}

MiDField mid_label_from_depth(const Tensor& z0, const Tensor& z1, const FlowField& flow,
                              std::size_t boundary_margin) {
  if (z0.rank() != 2 || !z0.same_shape(z1))
    raise(Errc::shape_mismatch, "depth maps must share a (H, W) shape");
  const std::size_t H = z0.dim(0), W = z0.dim(1);
  if (flow.height != H || flow.width != W)
    raise(Errc::shape_mismatch, "flow must match the depth maps");
  for (std::size_t i = 0; i < H * W; ++i)
    if (!(z0[i] > 0.0) || !(z1[i] > 0.0))
      raise(Errc::non_positive_depth, "depth maps must be strictly positive");

  // Depth-edge map of the target depth: 3x3 local range above 10% of the
  // center depth.
  std::vector<std::uint8_t> edge(H * W, 0);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double lo = z1[y * W + x], hi = lo;
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          long yy = std::clamp<long>(static_cast<long>(y) + dy, 0, static_cast<long>(H) - 1);
          long xx = std::clamp<long>(static_cast<long>(x) + dx, 0, static_cast<long>(W) - 1);
          double v = z1[static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx)];
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      if (hi - lo > 0.1 * z1[y * W + x]) edge[y * W + x] = 1;
    }

  MiDField out = MiDField::ones(H, W, false);
  const long margin = static_cast<long>(boundary_margin);
#pragma omp parallel for schedule(static)
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      std::size_t i = y * W + x;
      if (!flow.valid[i]) continue;
      double wx = static_cast<double>(x) + flow.u[i];
      double wy = static_cast<double>(y) + flow.v[i];
      if (wx < 0.0 || wy < 0.0 || wx > static_cast<double>(W - 1) ||
          wy > static_cast<double>(H - 1))
        continue;

      long cx = std::lround(wx), cy = std::lround(wy);
      bool near_edge = false;
      for (long dy = -margin; dy <= margin && !near_edge; ++dy)
        for (long dx = -margin; dx <= margin && !near_edge; ++dx) {
          long yy = std::clamp<long>(cy + dy, 0, static_cast<long>(H) - 1);
          long xx = std::clamp<long>(cx + dx, 0, static_cast<long>(W) - 1);
          if (edge[static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx)]) near_edge = true;
        }
      if (near_edge || edge[static_cast<std::size_t>(cy) * W + static_cast<std::size_t>(cx)])
        continue;

      std::size_t x0 = static_cast<std::size_t>(wx);
      std::size_t y0 = static_cast<std::size_t>(wy);
      std::size_t x1i = std::min(x0 + 1, W - 1);
      std::size_t y1i = std::min(y0 + 1, H - 1);
      double fx = wx - static_cast<double>(x0);
      double fy = wy - static_cast<double>(y0);
      double sample = (1 - fy) * ((1 - fx) * z1[y0 * W + x0] + fx * z1[y0 * W + x1i]) +
                      fy * ((1 - fx) * z1[y1i * W + x0] + fx * z1[y1i * W + x1i]);
      out.m[i] = sample / z0[i];
      out.valid[i] = 1;
    }
  return out;
}

MetricsReport metrics(const FlowField& pred_flow, const FlowField& gt_flow,
                      const MiDField& pred_mid, const MiDField& gt_mid,
                      const std::vector<std::uint8_t>& valid) {
  const std::size_t cells = gt_flow.height * gt_flow.width;
  if (pred_flow.height != gt_flow.height || pred_flow.width != gt_flow.width ||
      pred_mid.height != gt_mid.height || pred_mid.width != gt_mid.width ||
      gt_mid.height != gt_flow.height || gt_mid.width != gt_flow.width || valid.size() != cells)
    raise(Errc::shape_mismatch, "metric inputs must share a shape");

  double epe_sum = 0.0, log_sum = 0.0;
  std::size_t n = 0, outliers = 0, mid_n = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    if (!valid[i]) continue;
    n++;
    double du = pred_flow.u[i] - gt_flow.u[i];
    double dv = pred_flow.v[i] - gt_flow.v[i];
    double err = std::hypot(du, dv);
    epe_sum += err;
    double mag = std::hypot(gt_flow.u[i], gt_flow.v[i]);
    if (err > 3.0 && err > 0.05 * mag) outliers++;
    if (pred_mid.m[i] > 0.0 && gt_mid.m[i] > 0.0) {
      log_sum += std::abs(std::log(pred_mid.m[i]) - std::log(gt_mid.m[i]));
      mid_n++;
    }
  }
  if (n == 0) raise(Errc::empty_valid_mask, "no valid pixels to evaluate");

  MetricsReport r;
  r.valid_count = n;
  r.epe = epe_sum / static_cast<double>(n);
  r.f1 = 100.0 * static_cast<double>(outliers) / static_cast<double>(n);
  r.logmid = mid_n > 0 ? 1e4 * log_sum / static_cast<double>(mid_n) : 0.0;
  return r;
}

}  // namespace emotive
