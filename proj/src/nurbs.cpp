#include "emotive/nurbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace emotive {
namespace {

constexpr double kInteriorEps = 1e-4;

void check_time(double t) {
  if (!(t >= 0.0) || !(t <= 1.0))
    raise(Errc::invalid_argument, "curve parameter must lie in [0, 1]");
}

// Degree-0 indicator row with the last nonzero span closed at t = 1.
std::vector<double> degree0_row(const std::vector<double>& k, double t) {
  std::size_t spans = k.size() - 1;
  std::vector<double> row(spans, 0.0);
  for (std::size_t j = 0; j < spans; ++j) {
    bool inside = k[j] <= t && t < k[j + 1];
    bool closed_end = t == 1.0 && k[j] < 1.0 && k[j + 1] == 1.0;
    if (inside || closed_end) row[j] = 1.0;
  }
  return row;
}

// Iterative Cox-de Boor triangle: rows of increasing degree, 0/0 := 0.
std::vector<double> basis_row_deg(const KnotVector& kv, int degree, double t) {
  const auto& k = kv.knots;
  std::vector<double> row = degree0_row(k, t);
  for (int q = 1; q <= degree; ++q) {
    std::size_t count = k.size() - static_cast<std::size_t>(q) - 1;
    for (std::size_t j = 0; j < count; ++j) {
      double left = 0.0, right = 0.0;
      double dl = k[j + q] - k[j];
      double dr = k[j + q + 1] - k[j + 1];
      if (dl > 0.0) left = (t - k[j]) / dl * row[j];
      if (dr > 0.0) right = (k[j + q + 1] - t) / dr * row[j + 1];
      row[j] = left + right;
    }
    row.resize(count);
  }
  return row;
}

}  // namespace

void KnotVector::validate() const {
  std::size_t p = static_cast<std::size_t>(degree);
  if (degree < 0 || knots.size() < 2 * (p + 1))
    raise(Errc::invalid_argument, "knot vector too short for its degree");
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    if (!(knots[i] <= knots[i + 1])) raise(Errc::unsorted_interior, "knots must be non-decreasing");
  for (std::size_t i = 0; i <= p; ++i) {
    if (knots[i] != 0.0) raise(Errc::invalid_argument, "first degree+1 knots must be 0");
    if (knots[knots.size() - 1 - i] != 1.0)
      raise(Errc::invalid_argument, "last degree+1 knots must be 1");
  }
  for (std::size_t i = p + 1; i + p + 1 < knots.size(); ++i)
    if (!(knots[i] > 0.0 && knots[i] < 1.0))
      raise(Errc::invalid_argument, "interior knots must lie strictly inside (0, 1)");
}

KnotVector clamped_knots(std::size_t n, int degree, const std::vector<double>& interior) {
  if (degree < 0 || n < static_cast<std::size_t>(degree) + 1)
    raise(Errc::invalid_argument, "need at least degree+1 control points");
  std::size_t expect = n - static_cast<std::size_t>(degree) - 1;
  if (interior.size() != expect)
    raise(Errc::wrong_interior_count, "expected " + std::to_string(expect) + " interior knots, got " +
                                          std::to_string(interior.size()));
  for (std::size_t i = 0; i < interior.size(); ++i) {
    if (!(interior[i] > 0.0 && interior[i] < 1.0))
      raise(Errc::invalid_argument, "interior knots must lie strictly inside (0, 1)");
    if (i > 0 && interior[i] < interior[i - 1])
      raise(Errc::unsorted_interior, "interior knots must be sorted");
  }
  KnotVector kv;
  kv.degree = degree;
  kv.knots.assign(static_cast<std::size_t>(degree) + 1, 0.0);
  kv.knots.insert(kv.knots.end(), interior.begin(), interior.end());
  kv.knots.insert(kv.knots.end(), static_cast<std::size_t>(degree) + 1, 1.0);
  return kv;
}

double basis(std::size_t i, int degree, double t, const KnotVector& knots) {
  check_time(t);
  if (degree < 0 || degree > knots.degree)
    raise(Errc::invalid_argument, "degree exceeds the knot vector degree");
  std::size_t count = knots.knots.size() - static_cast<std::size_t>(degree) - 1;
  if (i >= count) raise(Errc::index_out_of_range, "basis index out of range");
  return basis_row_deg(knots, degree, t)[i];
}

double basis_derivative(std::size_t i, int degree, double t, const KnotVector& knots) {
  check_time(t);
  if (degree < 0 || degree > knots.degree)
    raise(Errc::invalid_argument, "degree exceeds the knot vector degree");
  std::size_t count = knots.knots.size() - static_cast<std::size_t>(degree) - 1;
  if (i >= count) raise(Errc::index_out_of_range, "basis index out of range");
  if (degree == 0) return 0.0;

  const auto& k = knots.knots;
  std::vector<double> lower = basis_row_deg(knots, degree - 1, t);
  double p = static_cast<double>(degree);
  double out = 0.0;
  double dl = k[i + degree] - k[i];
  if (dl > 0.0) out += p / dl * lower[i];
  double dr = k[i + degree + 1] - k[i + 1];
  if (dr > 0.0) out -= p / dr * lower[i + 1];
  return out;
}

std::vector<double> basis_row(const KnotVector& knots, double t) {
  check_time(t);
  return basis_row_deg(knots, knots.degree, t);
}

std::vector<double> basis_derivative_row(const KnotVector& knots, double t) {
  check_time(t);
  std::size_t n = knots.control_count();
  std::vector<double> out(n, 0.0);
  if (knots.degree == 0) return out;
  std::vector<double> lower = basis_row_deg(knots, knots.degree - 1, t);
  const auto& k = knots.knots;
  double p = static_cast<double>(knots.degree);
  for (std::size_t i = 0; i < n; ++i) {
    double dl = k[i + knots.degree] - k[i];
    if (dl > 0.0) out[i] += p / dl * lower[i];
    double dr = k[i + knots.degree + 1] - k[i + 1];
    if (dr > 0.0) out[i] -= p / dr * lower[i + 1];
  }
  return out;
}

Trajectory::Trajectory(KnotVector knots, std::vector<double> weights, Tensor control)
    : knots_(std::move(knots)), weights_(std::move(weights)), control_(std::move(control)) {
  validate();
}

void Trajectory::validate() const {
  knots_.validate();
  std::size_t n = knots_.control_count();
  if (n < static_cast<std::size_t>(knots_.degree) + 1)
    raise(Errc::invalid_argument, "need at least degree+1 control points");
  if (weights_.size() != n) raise(Errc::shape_mismatch, "weight count must match control count");
  for (double w : weights_)
    if (!(w > 0.0) || !std::isfinite(w))
      raise(Errc::invalid_argument, "curve weights must be positive and finite");
  if (control_.rank() != 4 || control_.dim(0) != n || control_.dim(3) != 2)
    raise(Errc::shape_mismatch, "control tensor must have shape (n, H, W, 2)");
  std::size_t plane = control_.dim(1) * control_.dim(2) * 2;
  for (std::size_t i = 0; i < plane; ++i)
    if (control_[i] != 0.0)
      raise(Errc::invalid_argument, "first control plane must be zero (no displacement at t=0)");
}

std::vector<double> Trajectory::rational_basis(double t) const {
  std::vector<double> nb = basis_row(knots_, t);
  double denom = 0.0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    nb[i] *= weights_[i];
    denom += nb[i];
  }
  for (double& v : nb) v /= denom;
  return nb;
}

std::vector<double> Trajectory::rational_basis_derivative(double t) const {
  std::vector<double> nb = basis_row(knots_, t);
  std::vector<double> db = basis_derivative_row(knots_, t);
  double denom = 0.0, dden = 0.0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    nb[i] *= weights_[i];
    db[i] *= weights_[i];
    denom += nb[i];
    dden += db[i];
  }
  // R'_i = (N'_i w_i - R_i * sum_j N'_j w_j) / sum_j N_j w_j
  for (std::size_t i = 0; i < nb.size(); ++i) db[i] = (db[i] - nb[i] / denom * dden) / denom;
  return db;
}

namespace {

DisplacementField weighted_control_sum(const Trajectory& traj, const std::vector<double>& coef) {
  DisplacementField out;
  out.height = traj.height();
  out.width = traj.width();
  out.uv.assign(out.height * out.width * 2, 0.0);
  const std::size_t cells = out.height * out.width * 2;
  const double* ctrl = traj.control().data();
  const std::size_t n = traj.control_count();
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < cells; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += coef[i] * ctrl[i * cells + c];
    out.uv[c] = acc;
  }
  return out;
}

}  // namespace

DisplacementField eval_trajectory(const Trajectory& traj, double t) {
  return weighted_control_sum(traj, traj.rational_basis(t));
}

DisplacementField eval_velocity(const Trajectory& traj, double t) {
  return weighted_control_sum(traj, traj.rational_basis_derivative(t));
}

std::vector<double> density_profile(const DensityField& density) {
  if (density.ds.rank() != 3) raise(Errc::shape_mismatch, "density tensor must be (blocks, H, W)");
  std::size_t blocks = density.ds.dim(0);
  std::size_t cells = density.ds.dim(1) * density.ds.dim(2);
  std::vector<double> profile(blocks, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    double sum = 0.0;
    const double* d = density.ds.data() + b * cells;
    for (std::size_t i = 0; i < cells; ++i) sum += d[i];
    profile[b] = sum / static_cast<double>(cells);
  }
  return profile;
}

AdaptationResult density_adapt_profile(const std::vector<double>& profile, std::size_t n,
                                       int degree) {
  const std::size_t blocks = profile.size();
  if (n < 1) raise(Errc::invalid_argument, "need at least one anchor");
  if (blocks < n)
    raise(Errc::too_few_blocks, "top-" + std::to_string(n) + " selection needs >= n blocks, have " +
                                    std::to_string(blocks));
  if (degree < 0 || n < static_cast<std::size_t>(degree) + 1)
    raise(Errc::invalid_argument, "need at least degree+1 control points");

  // Top-n block indices by density, ties resolved to the lower block.
  std::vector<std::size_t> order(blocks);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return profile[a] > profile[b]; });
  std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(picked.begin(), picked.end());

  AdaptationResult out;
  out.anchor_blocks.reserve(n);
  out.anchor_times.reserve(n);
  std::vector<double> values(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.anchor_blocks.push_back(picked[j] + 1);  // 1-based
    out.anchor_times.push_back(static_cast<double>(picked[j] + 1) / static_cast<double>(blocks));
    values[j] = profile[picked[j]];
  }

  // Max-shifted softmax; a floor keeps saturated entries strictly positive
  // (the curve weights must stay valid for arbitrary density scales).
  double vmax = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  out.weights.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.weights[j] = std::max(std::exp(values[j] - vmax), 1e-12);
    sum += out.weights[j];
  }
  for (double& w : out.weights) w /= sum;

  // Interior knots: sliding window of `degree` consecutive anchor times.
  std::size_t q = n - static_cast<std::size_t>(degree) - 1;
  std::vector<double> interior(q);
  for (std::size_t i = 0; i < q; ++i) {
    double acc = 0.0;
    for (int k = 0; k < degree; ++k) acc += out.anchor_times[i + static_cast<std::size_t>(k)];
    interior[i] = acc / static_cast<double>(degree);
  }
  for (std::size_t i = 0; i < q; ++i) {
    double lo = kInteriorEps + static_cast<double>(i) * kInteriorEps;
    interior[i] = std::max(interior[i], lo);
    if (i > 0) interior[i] = std::max(interior[i], interior[i - 1] + kInteriorEps);
  }
  for (std::size_t i = q; i-- > 0;) {
    double hi = 1.0 - kInteriorEps - static_cast<double>(q - 1 - i) * kInteriorEps;
    interior[i] = std::min(interior[i], hi);
    if (i + 1 < q) interior[i] = std::min(interior[i], interior[i + 1] - kInteriorEps);
  }

  out.knots = clamped_knots(n, degree, interior);
  out.knots.validate();
  return out;
}

AdaptationResult density_adapt(const DensityField& density, std::size_t n, int degree) {
  return density_adapt_profile(density_profile(density), n, degree);
}

}  // namespace emotive
