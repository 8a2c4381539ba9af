#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "emotive/core.hpp"
#include "emotive/projection.hpp"

namespace emotive {

/// Clamped knot vector over normalized time [0, 1]: the first and last
/// degree+1 knots are pinned to 0 and 1, interior knots are non-decreasing
/// and strictly inside (0, 1). m = n + p + 1 knots for n control points.
struct KnotVector {
  std::vector<double> knots;
  int degree = 0;

  std::size_t control_count() const { return knots.size() - static_cast<std::size_t>(degree) - 1; }
  void validate() const;
};

/// Builds [0]*(p+1) ++ interior ++ [1]*(p+1). `interior` must hold exactly
/// n - p - 1 values.
KnotVector clamped_knots(std::size_t n, int degree, const std::vector<double>& interior);

/// B-spline basis N_{i,p}(t) for a single 0-based index, Cox-de Boor with
/// 0/0 := 0 and the last nonzero span closed at t = 1.
double basis(std::size_t i, int degree, double t, const KnotVector& knots);

/// Analytic basis derivative
///   N'_{i,p} = p/(t_{i+p}-t_i) N_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) N_{i+1,p-1},
/// zero-width denominators contributing zero.
double basis_derivative(std::size_t i, int degree, double t, const KnotVector& knots);

/// All n basis values at t (span-based evaluation; zeros outside the span).
std::vector<double> basis_row(const KnotVector& knots, double t);
/// All n basis derivatives at t.
std::vector<double> basis_derivative_row(const KnotVector& knots, double t);

/// Per-pixel rational displacement curve: n control planes of (dx, dy),
/// positive weights, clamped knots. The first control plane is identically
/// zero so the displacement vanishes at t = 0.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(KnotVector knots, std::vector<double> weights, Tensor control);

  const KnotVector& knots() const { return knots_; }
  const std::vector<double>& weights() const { return weights_; }
  const Tensor& control() const { return control_; }
  Tensor& control() { return control_; }

  std::size_t control_count() const { return control_.dim(0); }
  std::size_t height() const { return control_.dim(1); }
  std::size_t width() const { return control_.dim(2); }
  int degree() const { return knots_.degree; }

  /// Rational basis coefficients R_i(t) = N_i w_i / sum_j N_j w_j.
  std::vector<double> rational_basis(double t) const;
  /// d/dt R_i(t); the velocity field is sum_i R'_i(t) P_i.
  std::vector<double> rational_basis_derivative(double t) const;

  void validate() const;

 private:
  KnotVector knots_;
  std::vector<double> weights_;
  Tensor control_;  // (n, H, W, 2)
};

/// Displacement (or velocity) field over the control grid, components
/// interleaved per pixel.
struct DisplacementField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> uv;  // (H*W*2), [2*i] = x component

  double& u(std::size_t y, std::size_t x) { return uv[(y * width + x) * 2]; }
  double& v(std::size_t y, std::size_t x) { return uv[(y * width + x) * 2 + 1]; }
  double u(std::size_t y, std::size_t x) const { return uv[(y * width + x) * 2]; }
  double v(std::size_t y, std::size_t x) const { return uv[(y * width + x) * 2 + 1]; }
};

/// Evaluates the displacement field at normalized time t.
DisplacementField eval_trajectory(const Trajectory& traj, double t);
/// Evaluates the time derivative of the displacement field at t.
DisplacementField eval_velocity(const Trajectory& traj, double t);

/// Density-derived curve parameters: anchor times, their source blocks
/// (1-based so time = block / n_blocks), adapted knots and softmax weights.
struct AdaptationResult {
  KnotVector knots;
  std::vector<double> weights;       // positive, sums to 1
  std::vector<double> anchor_times;  // ascending, in (0, 1]
  std::vector<std::size_t> anchor_blocks;
};

/// Selects the top-n temporal blocks of the density field (ties to the
/// lower block), converts them to anchor timestamps, averages consecutive
/// anchors into interior knots and softmax-normalizes the block densities
/// into curve weights.
AdaptationResult density_adapt(const DensityField& density, std::size_t n, int degree);

/// Spatial mean of the pooled density per temporal block.
std::vector<double> density_profile(const DensityField& density);

/// density_adapt on a raw temporal profile (one value per block).
AdaptationResult density_adapt_profile(const std::vector<double>& profile, std::size_t n,
                                       int degree);

}  // namespace emotive
