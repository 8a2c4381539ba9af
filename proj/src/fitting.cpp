#include "emotive/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace emotive {
namespace {

double weighted_l1_series(std::size_t iters, double gamma,
                          const std::vector<double>& per_iter_means) {
  double loss = 0.0;
  for (std::size_t k = 0; k < iters; ++k)
    loss += std::pow(gamma, static_cast<double>(iters - 1 - k)) * per_iter_means[k];
  return loss;
}

}  // namespace

double flow_loss(std::span<const FlowField> preds, const FlowField& gt, double gamma) {
  if (preds.empty()) raise(Errc::invalid_argument, "need at least one prediction");
  if (!(gamma > 0.0) || !(gamma <= 1.0)) raise(Errc::invalid_argument, "gamma must lie in (0, 1]");
  std::vector<double> means;
  means.reserve(preds.size());
  for (const FlowField& p : preds) {
    if (p.height != gt.height || p.width != gt.width)
      raise(Errc::shape_mismatch, "prediction and ground truth must share a shape");
    double du = 0.0, dv = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < gt.u.size(); ++i) {
      if (!gt.valid[i] || !p.valid[i]) continue;
      du += std::abs(p.u[i] - gt.u[i]);
      dv += std::abs(p.v[i] - gt.v[i]);
      n++;
    }
    if (n == 0) raise(Errc::empty_valid_mask, "no valid pixels in the loss mask");
    means.push_back(du / static_cast<double>(n) + dv / static_cast<double>(n));
  }
  return weighted_l1_series(preds.size(), gamma, means);
}

double depth_loss(std::span<const MiDField> preds, const MiDField& gt, double gamma) {
  if (preds.empty()) raise(Errc::invalid_argument, "need at least one prediction");
  if (!(gamma > 0.0) || !(gamma <= 1.0)) raise(Errc::invalid_argument, "gamma must lie in (0, 1]");
  std::vector<double> means;
  means.reserve(preds.size());
  for (const MiDField& p : preds) {
    if (p.height != gt.height || p.width != gt.width)
      raise(Errc::shape_mismatch, "prediction and ground truth must share a shape");
    double dm = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < gt.m.size(); ++i) {
      if (!gt.valid[i] || !p.valid[i]) continue;
      dm += std::abs(p.m[i] - gt.m[i]);
      n++;
    }
    if (n == 0) raise(Errc::empty_valid_mask, "no valid pixels in the loss mask");
    means.push_back(dm / static_cast<double>(n));
  }
  return weighted_l1_series(preds.size(), gamma, means);
}

double temporal_regularizer(const Trajectory& traj, std::span<const double> t_grid) {
  if (t_grid.size() < 2) raise(Errc::grid_too_short, "need at least two grid times");
  for (std::size_t i = 0; i + 1 < t_grid.size(); ++i)
    if (!(t_grid[i] <= t_grid[i + 1])) raise(Errc::invalid_argument, "time grid must be sorted");

  std::vector<DisplacementField> vels;
  vels.reserve(t_grid.size());
  for (double t : t_grid) vels.push_back(eval_velocity(traj, t));

  const std::size_t cells = traj.height() * traj.width();
  double total = 0.0;
  for (std::size_t g = 0; g + 1 < t_grid.size(); ++g)
    for (std::size_t i = 0; i < cells; ++i)
      total += std::abs(vels[g + 1].uv[2 * i] - vels[g].uv[2 * i]) +
               std::abs(vels[g + 1].uv[2 * i + 1] - vels[g].uv[2 * i + 1]);
  return total / static_cast<double>(cells);
}

double composite_loss(std::span<const FlowField> flow_preds, const FlowField& flow_gt,
                      std::span<const MiDField> mid_preds, const MiDField& mid_gt,
                      const Trajectory& traj, std::span<const double> t_grid,
                      const LossConfig& cfg) {
  return flow_loss(flow_preds, flow_gt, cfg.gamma) + depth_loss(mid_preds, mid_gt, cfg.gamma) +
         cfg.lambda * temporal_regularizer(traj, t_grid);
}

FitResult fit_trajectory_lsq(const CorrespondenceSet& corr, const KnotVector& knots,
                             const std::vector<double>& weights, const FitOptions& opts) {
  knots.validate();
  const std::size_t n = knots.control_count();
  if (weights.size() != n) raise(Errc::shape_mismatch, "weight count must match control count");
  if (corr.height == 0 || corr.width == 0)
    raise(Errc::invalid_argument, "correspondence set needs a grid size");
  const std::size_t H = corr.height, W = corr.width;
  const std::size_t free = n - 1;  // first control pinned to zero

  // Group samples per pixel (CSR layout, preserving input order).
  std::vector<std::size_t> counts(H * W, 0);
  for (const auto& s : corr.samples) {
    if (s.x >= W || s.y >= H) raise(Errc::out_of_bounds, "correspondence pixel outside the grid");
    if (!(s.tau > 0.0) || !(s.tau <= 1.0))
      raise(Errc::invalid_argument, "correspondence times must lie in (0, 1]");
    if (!std::isfinite(s.dx) || !std::isfinite(s.dy))
      raise(Errc::invalid_argument, "correspondence displacements must be finite");
    counts[s.y * W + s.x]++;
  }
  std::vector<std::size_t> offsets(H * W + 1, 0);
  for (std::size_t i = 0; i < H * W; ++i) offsets[i + 1] = offsets[i] + counts[i];
  std::vector<std::size_t> sample_ix(corr.samples.size());
  {
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t s = 0; s < corr.samples.size(); ++s) {
      std::size_t px = corr.samples[s].y * W + corr.samples[s].x;
      sample_ix[cursor[px]++] = s;
    }
  }

  // Rational coefficient rows per distinct sample time.
  Trajectory probe(knots, weights, Tensor({n, 1, 1, 2}));
  std::unordered_map<double, std::size_t> tau_index;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> sample_tau(corr.samples.size());
  for (std::size_t s = 0; s < corr.samples.size(); ++s) {
    double tau = corr.samples[s].tau;
    auto it = tau_index.find(tau);
    if (it == tau_index.end()) {
      it = tau_index.emplace(tau, rows.size()).first;
      rows.push_back(probe.rational_basis(tau));
    }
    sample_tau[s] = it->second;
  }

  // Velocity-difference rows for the smoothness surrogate.
  std::vector<std::vector<double>> smooth_rows;
  if (opts.lambda_t > 0.0) {
    std::size_t g = opts.smoothness_grid ? opts.smoothness_grid : 2 * n + 1;
    std::vector<std::vector<double>> vel(g);
    for (std::size_t j = 0; j < g; ++j)
      vel[j] = probe.rational_basis_derivative(static_cast<double>(j) / static_cast<double>(g - 1));
    double scale = std::sqrt(opts.lambda_t);
    for (std::size_t j = 0; j + 1 < g; ++j) {
      std::vector<double> row(n);
      for (std::size_t i = 0; i < n; ++i) row[i] = scale * (vel[j + 1][i] - vel[j][i]);
      smooth_rows.push_back(std::move(row));
    }
  }

  FitResult result;
  result.trajectory = Trajectory(knots, weights, Tensor({n, H, W, 2}));
  double* ctrl = result.trajectory.control().data();
  const std::size_t cells = H * W * 2;

  double max_res = 0.0, sum_res = 0.0;
  std::size_t fit_px = 0, empty_px = 0, reg_px = 0;
  bool singular = false;
  std::string singular_what;

  // Exceptions may not escape the parallel region; singular pixels set a
  // flag that is rethrown afterwards.
#pragma omp parallel for schedule(static) reduction(max : max_res) \
    reduction(+ : sum_res, fit_px, empty_px, reg_px)
  for (std::size_t px = 0; px < H * W; ++px) {
    std::size_t s0 = offsets[px], s1 = offsets[px + 1];
    if (s0 == s1) {
      empty_px++;
      continue;
    }
    const std::size_t data_rows = s1 - s0;
    Eigen::MatrixXd a(data_rows + smooth_rows.size(), free);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(data_rows + smooth_rows.size(), 2);
    for (std::size_t r = 0; r < data_rows; ++r) {
      const auto& s = corr.samples[sample_ix[s0 + r]];
      const auto& coef = rows[sample_tau[sample_ix[s0 + r]]];
      double sw = std::sqrt(s.weight > 0.0 ? s.weight : 1.0);
      for (std::size_t i = 0; i < free; ++i) a(static_cast<long>(r), static_cast<long>(i)) =
          sw * coef[i + 1];
      b(static_cast<long>(r), 0) = sw * s.dx;
      b(static_cast<long>(r), 1) = sw * s.dy;
    }
    for (std::size_t r = 0; r < smooth_rows.size(); ++r)
      for (std::size_t i = 0; i < free; ++i)
        a(static_cast<long>(data_rows + r), static_cast<long>(i)) = smooth_rows[r][i + 1];

    Eigen::MatrixXd m = a.transpose() * a;
    if (opts.ridge > 0.0) m.diagonal().array() += opts.ridge;
    Eigen::MatrixXd rhs = a.transpose() * b;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    Eigen::MatrixXd sol;
    if (lu.isInvertible()) {
      sol = lu.solve(rhs);
    } else if (opts.fallback_ridge > 0.0) {
      m.diagonal().array() += opts.fallback_ridge;
      sol = m.ldlt().solve(rhs);
      reg_px++;
    } else {
#pragma omp critical
      {
        if (!singular) {
          singular = true;
          singular_what = "rank-deficient normal system at pixel (" + std::to_string(px % W) +
                          "," + std::to_string(px / W) + ") and no regularization enabled";
        }
      }
      continue;
    }

    for (std::size_t i = 0; i < free; ++i) {
      ctrl[(i + 1) * cells + px * 2] = sol(static_cast<long>(i), 0);
      ctrl[(i + 1) * cells + px * 2 + 1] = sol(static_cast<long>(i), 1);
    }
    fit_px++;

    for (std::size_t r = 0; r < data_rows; ++r) {
      const auto& s = corr.samples[sample_ix[s0 + r]];
      const auto& coef = rows[sample_tau[sample_ix[s0 + r]]];
      double ex = -s.dx, ey = -s.dy;
      for (std::size_t i = 0; i < free; ++i) {
        ex += coef[i + 1] * sol(static_cast<long>(i), 0);
        ey += coef[i + 1] * sol(static_cast<long>(i), 1);
      }
      double res = std::hypot(ex, ey);
      max_res = std::max(max_res, res);
      sum_res += res;
    }
  }

  if (singular) throw Error(Errc::singular_system, singular_what);

  result.max_residual = max_res;
  result.mean_residual = corr.samples.empty() ? 0.0 : sum_res / static_cast<double>(corr.samples.size());
  result.pixels_fit = fit_px;
  result.pixels_empty = empty_px;
  result.pixels_regularized = reg_px;
  return result;
}

Tensor ZeroUpdater::update(const FeatureBundle& bundle) {
  const auto& c = bundle.current.control();
  return Tensor(c.shape());
}

Tensor GradientDescentUpdater::update(const FeatureBundle& bundle) {
  const Trajectory& traj = bundle.current;
  const std::size_t n = traj.control_count();
  const std::size_t H = traj.height(), W = traj.width();
  const std::size_t q_total = bundle.query_times.size();
  const std::size_t q_temporal = bundle.temporal.values.dim(2);
  if (q_temporal + bundle.spatial.values.dim(2) != q_total)
    raise(Errc::shape_mismatch, "query times out of step with the patches");

  std::vector<std::vector<double>> coef(q_total);
  for (std::size_t q = 0; q < q_total; ++q) coef[q] = traj.rational_basis(bundle.query_times[q]);

  Tensor delta(traj.control().shape());
  double* d = delta.data();
  const std::size_t cells = H * W * 2;

  auto argmax_offset = [](const double* taps, std::size_t levels, int radius, double& ox,
                          double& oy) {
    const std::size_t side = 2 * static_cast<std::size_t>(radius) + 1;
    const std::size_t per_level = side * side;
    std::size_t center = static_cast<std::size_t>(radius) * side + static_cast<std::size_t>(radius);
    double best = taps[center];  // level-0 center tap wins ties
    ox = 0.0;
    oy = 0.0;
    for (std::size_t m = 0; m < levels; ++m) {
      double scale = static_cast<double>(std::size_t{1} << m);
      for (std::size_t t = 0; t < per_level; ++t) {
        double v = taps[m * per_level + t];
        if (v > best) {
          best = v;
          oy = (static_cast<double>(t / side) - radius) * scale;
          ox = (static_cast<double>(t % side) - radius) * scale;
        }
      }
    }
  };

#pragma omp parallel for schedule(static)
  for (std::size_t px = 0; px < H * W; ++px) {
    for (std::size_t q = 0; q < q_total; ++q) {
      const CostPatch& patch = q < q_temporal ? bundle.temporal : bundle.spatial;
      std::size_t qi = q < q_temporal ? q : q - q_temporal;
      const std::size_t width = patch.values.dim(3);
      const double* taps = patch.values.data() + (px * patch.values.dim(2) + qi) * width;
      double ox, oy;
      argmax_offset(taps, patch.levels, patch.radius, ox, oy);
      if (ox == 0.0 && oy == 0.0) continue;
      for (std::size_t i = 1; i < n; ++i) {
        d[i * cells + px * 2] += step_ * coef[q][i] * ox;
        d[i * cells + px * 2 + 1] += step_ * coef[q][i] * oy;
      }
    }
    for (std::size_t i = 1; i < n; ++i) {
      d[i * cells + px * 2] = std::clamp(d[i * cells + px * 2], -clip_, clip_);
      d[i * cells + px * 2 + 1] = std::clamp(d[i * cells + px * 2 + 1], -clip_, clip_);
    }
  }
  return delta;
}

RefineResult refine_trajectory(const Trajectory& traj0, const CostVolumeSet& pyramids,
                               const AdaptationResult& adapt, Updater& updater,
                               const LossConfig& cfg) {
  if (pyramids.temporal.kind != CostKind::TEMPORAL_FUSED ||
      pyramids.spatial.kind != CostKind::SPATIAL)
    raise(Errc::invalid_argument, "refinement needs a spatial and a fused temporal pyramid");
  const std::size_t n = traj0.control_count();
  if (adapt.anchor_times.size() != n)
    raise(Errc::shape_mismatch, "anchor count must match the control count");

  const std::size_t H = traj0.height(), W = traj0.width();
  const std::size_t slices = pyramids.temporal.levels[0].dim(0);
  const std::size_t blocks = slices + 1;

  std::vector<double> query_times(adapt.anchor_times.begin(), adapt.anchor_times.end());
  query_times.push_back(1.0);

  RefineResult out;
  out.trajectory = traj0;
  out.flow_history.reserve(cfg.iters);

  for (std::size_t it = 0; it < cfg.iters; ++it) {
    std::vector<PatchQuery> temporal_q(n);
    for (std::size_t j = 0; j < n; ++j) {
      DisplacementField disp = eval_trajectory(out.trajectory, adapt.anchor_times[j]);
      temporal_q[j].positions = Tensor({H, W, 2});
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          temporal_q[j].positions[(y * W + x) * 2] = static_cast<double>(x) + disp.u(y, x);
          temporal_q[j].positions[(y * W + x) * 2 + 1] = static_cast<double>(y) + disp.v(y, x);
        }
      // Anchors sourced from the reference block read the nearest slice.
      std::size_t block = std::clamp<std::size_t>(adapt.anchor_blocks[j], 2, blocks);
      temporal_q[j].slice = block - 2;
    }
    std::vector<PatchQuery> spatial_q(1);
    {
      DisplacementField disp = eval_trajectory(out.trajectory, 1.0);
      spatial_q[0].positions = Tensor({H, W, 2});
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          spatial_q[0].positions[(y * W + x) * 2] = static_cast<double>(x) + disp.u(y, x);
          spatial_q[0].positions[(y * W + x) * 2 + 1] = static_cast<double>(y) + disp.v(y, x);
        }
    }

    CostPatch temporal = query_neighborhood(pyramids.temporal, temporal_q, cfg.radius);
    CostPatch spatial = query_neighborhood(pyramids.spatial, spatial_q, cfg.radius);

    FeatureBundle bundle{temporal, spatial, query_times, out.trajectory};
    Tensor delta = updater.update(bundle);
    if (!delta.same_shape(out.trajectory.control()))
      raise(Errc::shape_mismatch, "updater increment has the wrong shape");

    // Skip the first control plane: the displacement at t=0 stays pinned.
    double* ctrl = out.trajectory.control().data();
    const std::size_t plane = H * W * 2;
    for (std::size_t i = plane; i < delta.size(); ++i) ctrl[i] += delta[i];

    DisplacementField flow_end = eval_trajectory(out.trajectory, 1.0);
    out.flow_history.push_back(std::move(flow_end));
  }
  return out;
}

}  // namespace emotive
