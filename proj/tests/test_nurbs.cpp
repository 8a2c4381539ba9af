#include <doctest.h>

#include <cmath>
#include <random>

#include "emotive/nurbs.hpp"
#include "emotive/reference.hpp"

using namespace emotive;

namespace {

Trajectory scalar_trajectory(const KnotVector& kv, std::vector<double> weights,
                             const std::vector<std::pair<double, double>>& controls) {
  Tensor c({controls.size(), 1, 1, 2});
  for (std::size_t i = 0; i < controls.size(); ++i) {
    c[2 * i] = controls[i].first;
    c[2 * i + 1] = controls[i].second;
  }
  return Trajectory(kv, std::move(weights), std::move(c));
}

KnotVector random_knots(std::mt19937_64& rng, std::size_t& n_out, int& p_out) {
  std::uniform_int_distribution<int> dp(1, 3);
  int p = dp(rng);
  std::uniform_int_distribution<std::size_t> dn(static_cast<std::size_t>(p) + 1,
                                                static_cast<std::size_t>(p) + 5);
  std::size_t n = dn(rng);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<double> interior(n - static_cast<std::size_t>(p) - 1);
  for (auto& v : interior) v = u(rng);
  std::sort(interior.begin(), interior.end());
  n_out = n;
  p_out = p;
  return clamped_knots(n, p, interior);
}

}  // namespace

TEST_CASE("clamped knot construction") {
  auto kv = clamped_knots(5, 3, {0.5});
  CHECK(kv.knots == std::vector<double>{0, 0, 0, 0, 0.5, 1, 1, 1, 1});
  CHECK(kv.knots.size() == 9);
  CHECK(kv.control_count() == 5);

  auto bezier = clamped_knots(4, 3, {});
  CHECK(bezier.knots == std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1});

  try {
    clamped_knots(5, 3, {0.5, 0.6});
    FAIL("expected interior count error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::wrong_interior_count);
  }
  CHECK_THROWS_AS(clamped_knots(5, 3, {0.7, 0.2}), Error);  // two needed for n=6; unsorted for n=5
  CHECK_THROWS_AS(clamped_knots(6, 3, {0.7, 0.2}), Error);
}

TEST_CASE("degree-0 basis is the span indicator") {
  auto kv = clamped_knots(5, 3, {0.5});
  for (std::size_t i = 0; i + 1 < kv.knots.size(); ++i) {
    double expect_in = basis(i, 0, 0.25, kv);
    CHECK(expect_in == ((kv.knots[i] <= 0.25 && 0.25 < kv.knots[i + 1]) ? 1.0 : 0.0));
  }
}

TEST_CASE("clamped endpoints select the first and last basis") {
  auto kv = clamped_knots(5, 3, {0.5});
  CHECK(basis(0, 3, 0.0, kv) == 1.0);
  for (std::size_t i = 1; i < 5; ++i) CHECK(basis(i, 3, 0.0, kv) == 0.0);
  CHECK(basis(4, 3, 1.0, kv) == 1.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(basis(i, 3, 1.0, kv) == 0.0);
  CHECK_THROWS_AS(basis(5, 3, 0.5, kv), Error);
  CHECK_THROWS_AS(basis(0, 3, 1.5, kv), Error);
}

TEST_CASE("basis row matches the recursive oracle and sums to one") {
  auto kv = clamped_knots(5, 3, {0.5});
  auto row = basis_row(kv, 0.25);
  double sum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(row[i] == doctest::Approx(ref::basis_recursive(i, 3, 0.25, kv.knots)).epsilon(1e-14));
    sum += row[i];
  }
  CHECK(std::abs(sum - 1.0) <= 1e-12);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n;
    int p;
    auto k = random_knots(rng, n, p);
    double t = ut(rng);
    auto r = basis_row(k, t);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(r[i] - ref::basis_recursive(i, p, t, k.knots)) <= 1e-13);
      s += r[i];
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("basis derivatives sum to zero and match finite differences") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> ut(0.05, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n;
    int p;
    auto k = random_knots(rng, n, p);
    double t = ut(rng);
    auto d = basis_derivative_row(k, t);
    double s = 0.0;
    for (double v : d) s += v;
    CHECK(std::abs(s) <= 1e-10);

    const double h = 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
      double fd = (basis(i, p, t + h, k) - basis(i, p, t - h, k)) / (2 * h);
      double scale = std::max(1.0, std::abs(d[i]));
      CHECK(std::abs(d[i] - fd) / scale <= 1e-5);
    }
  }
}

TEST_CASE("cubic Bernstein end derivative") {
  auto kv = clamped_knots(4, 3, {});
  CHECK(basis_derivative(0, 3, 0.0, kv) == doctest::Approx(-3.0).epsilon(1e-14));
  CHECK(basis_derivative(1, 3, 0.0, kv) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("trajectory evaluation trivial fields") {
  auto kv = clamped_knots(4, 3, {});
  auto zero = scalar_trajectory(kv, {1, 1, 1, 1}, {{0, 0}, {0, 0}, {0, 0}, {0, 0}});
  for (double t : {0.0, 0.3, 1.0}) {
    auto f = eval_trajectory(zero, t);
    CHECK(f.u(0, 0) == 0.0);
    CHECK(f.v(0, 0) == 0.0);
  }
  auto vel = eval_velocity(zero, 0.5);
  CHECK(vel.u(0, 0) == 0.0);
}

TEST_CASE("collinear cubic controls give an exactly linear displacement") {
  auto kv = clamped_knots(4, 3, {});
  auto traj = scalar_trajectory(kv, {1, 1, 1, 1}, {{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  for (double t : {0.0, 0.125, 0.25, 0.5, 0.75, 1.0}) {
    auto f = eval_trajectory(traj, t);
    CHECK(std::abs(f.u(0, 0) - 3.0 * t) <= 1e-12);
    CHECK(f.v(0, 0) == 0.0);
    auto v = eval_velocity(traj, t);
    CHECK(std::abs(v.u(0, 0) - 3.0) <= 1e-11);
  }
}

TEST_CASE("endpoint interpolation is exact") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-5.0, 5.0), uw(0.1, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n;
    int p;
    auto k = random_knots(rng, n, p);
    std::vector<std::pair<double, double>> ctrl(n, {0.0, 0.0});
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) ctrl[i] = {u(rng), u(rng)};
      w[i] = uw(rng);
    }
    auto traj = scalar_trajectory(k, w, ctrl);
    auto f0 = eval_trajectory(traj, 0.0);
    CHECK(f0.u(0, 0) == 0.0);
    CHECK(f0.v(0, 0) == 0.0);
    auto f1 = eval_trajectory(traj, 1.0);
    CHECK(f1.u(0, 0) == ctrl[n - 1].first);
    CHECK(f1.v(0, 0) == ctrl[n - 1].second);
  }
}

TEST_CASE("common weight rescaling leaves the curve unchanged") {
  auto kv = clamped_knots(5, 3, {0.4});
  std::vector<std::pair<double, double>> ctrl = {{0, 0}, {1, -2}, {0.5, 3}, {2, 1}, {-1, 0.5}};
  auto a = scalar_trajectory(kv, {0.5, 1.5, 2.0, 0.7, 1.1}, ctrl);
  auto b = scalar_trajectory(kv, {0.5 * 7, 1.5 * 7, 2.0 * 7, 0.7 * 7, 1.1 * 7}, ctrl);
  for (double t : {0.1, 0.33, 0.77, 1.0}) {
    auto fa = eval_trajectory(a, t), fb = eval_trajectory(b, t);
    CHECK(std::abs(fa.u(0, 0) - fb.u(0, 0)) <= 1e-12);
    CHECK(std::abs(fa.v(0, 0) - fb.v(0, 0)) <= 1e-12);
    auto va = eval_velocity(a, t), vb = eval_velocity(b, t);
    CHECK(std::abs(va.u(0, 0) - vb.u(0, 0)) <= 1e-11);
  }
}

TEST_CASE("uniform weights reduce to the polynomial B-spline") {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(-3.0, 3.0), ut(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t n;
    int p;
    auto k = random_knots(rng, n, p);
    std::vector<std::pair<double, double>> ctrl(n, {0.0, 0.0});
    std::vector<double> cx(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
      ctrl[i] = {u(rng), 0.0};
      cx[i] = ctrl[i].first;
    }
    auto traj = scalar_trajectory(k, std::vector<double>(n, 1.0), ctrl);
    double t = ut(rng);
    auto f = eval_trajectory(traj, t);
    CHECK(std::abs(f.u(0, 0) - ref::bspline_point(k.knots, p, cx, t)) <= 1e-12);
  }
}

TEST_CASE("velocity matches a finite difference of the displacement") {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(-2.0, 2.0), uw(0.2, 3.0), ut(0.05, 0.95);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n;
    int p;
    auto k = random_knots(rng, n, p);
    std::vector<std::pair<double, double>> ctrl(n, {0.0, 0.0});
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) ctrl[i] = {u(rng), u(rng)};
      w[i] = uw(rng);
    }
    auto traj = scalar_trajectory(k, w, ctrl);
    double t = ut(rng);
    const double h = 1e-6;
    auto fp = eval_trajectory(traj, t + h), fm = eval_trajectory(traj, t - h);
    auto v = eval_velocity(traj, t);
    double fd = (fp.u(0, 0) - fm.u(0, 0)) / (2 * h);
    CHECK(std::abs(v.u(0, 0) - fd) / std::max(1.0, std::abs(v.u(0, 0))) <= 1e-5);
  }
}

TEST_CASE("control point perturbations stay inside the basis support") {
  auto kv = clamped_knots(6, 2, {0.25, 0.5, 0.75});
  std::vector<std::pair<double, double>> ctrl = {{0, 0}, {1, 1}, {2, 0}, {1, -1}, {0, 2}, {3, 3}};
  auto base = scalar_trajectory(kv, std::vector<double>(6, 1.0), ctrl);
  // Perturb control 4 (0-based): support is [t_4, t_7) = [0.5, 1).
  auto moved = ctrl;
  moved[4].first += 10.0;
  auto pert = scalar_trajectory(kv, std::vector<double>(6, 1.0), moved);
  for (double t : {0.0, 0.1, 0.3, 0.49}) {
    auto a = eval_trajectory(base, t), b = eval_trajectory(pert, t);
    CHECK(a.u(0, 0) == b.u(0, 0));
  }
  auto a = eval_trajectory(base, 0.6), b = eval_trajectory(pert, 0.6);
  CHECK(a.u(0, 0) != b.u(0, 0));
}

TEST_CASE("trajectory validation rejects bad inputs") {
  auto kv = clamped_knots(4, 3, {});
  CHECK_THROWS_AS(scalar_trajectory(kv, {1, 1, 1, -1}, {{0, 0}, {0, 0}, {0, 0}, {0, 0}}), Error);
  CHECK_THROWS_AS(scalar_trajectory(kv, {1, 1, 1, 1}, {{1, 0}, {0, 0}, {0, 0}, {0, 0}}), Error);
  CHECK_THROWS_AS(scalar_trajectory(kv, {1, 1, 1}, {{0, 0}, {0, 0}, {0, 0}, {0, 0}}), Error);
}

TEST_CASE("density adaptation hand cases") {
  SUBCASE("uniform profile picks the leading blocks with equal weights") {
    auto r = density_adapt_profile(std::vector<double>(6, 2.5), 5, 3);
    CHECK(r.anchor_blocks == std::vector<std::size_t>{1, 2, 3, 4, 5});
    for (double w : r.weights) CHECK(std::abs(w - 0.2) <= 1e-12);
    REQUIRE(r.knots.knots.size() == 9);
    CHECK(r.knots.knots[4] == doctest::Approx((1.0 + 2.0 + 3.0) / (6.0 * 3.0)).epsilon(1e-14));
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(r.anchor_times[j] == doctest::Approx((j + 1) / 6.0).epsilon(1e-14));
  }
  SUBCASE("two-anchor spike profile") {
    auto r = density_adapt_profile({0, 0, 9, 9, 0, 0}, 2, 1);
    CHECK(r.anchor_blocks == std::vector<std::size_t>{3, 4});
    CHECK(r.anchor_times[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.anchor_times[1] == doctest::Approx(4.0 / 6.0).epsilon(1e-14));
    CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("too few blocks") {
    CHECK_THROWS_AS(density_adapt_profile({1.0, 2.0}, 5, 3), Error);
  }
}

TEST_CASE("density adaptation invariants on random profiles") {
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_int_distribution<std::size_t> dblocks(6, 24);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t blocks = dblocks(rng);
    std::vector<double> profile(blocks);
    for (auto& v : profile) v = u(rng);
    auto r = density_adapt_profile(profile, 5, 3);
    CHECK_NOTHROW(r.knots.validate());
    double sum = 0.0;
    for (double w : r.weights) {
      CHECK(w > 0.0);
      sum += w;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    for (std::size_t j = 0; j + 1 < r.anchor_times.size(); ++j)
      CHECK(r.anchor_times[j] < r.anchor_times[j + 1]);
    CHECK(r.anchor_times.front() > 0.0);
    CHECK(r.anchor_times.back() <= 1.0);
  }
}

TEST_CASE("density adaptation scale and shift behavior") {
  std::mt19937_64 rng(27);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  std::vector<double> profile(8);
  for (auto& v : profile) v = u(rng);

  auto base = density_adapt_profile(profile, 4, 2);

  std::vector<double> scaled = profile;
  for (auto& v : scaled) v *= 3.7;
  auto s = density_adapt_profile(scaled, 4, 2);
  CHECK(s.anchor_blocks == base.anchor_blocks);  // argmax set unchanged

  std::vector<double> shifted = profile;
  for (auto& v : shifted) v += 11.0;
  auto sh = density_adapt_profile(shifted, 4, 2);
  CHECK(sh.anchor_blocks == base.anchor_blocks);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(sh.weights[j] == doctest::Approx(base.weights[j]).epsilon(1e-12));
}

TEST_CASE("density field to adaptation plumbing") {
  DensityField d;
  d.n_a = 6;
  d.es = Tensor({6, 4, 4});
  d.ds = Tensor({6, 4, 4});
  for (std::size_t b = 0; b < 6; ++b)
    for (std::size_t i = 0; i < 16; ++i) d.ds[b * 16 + i] = static_cast<double>(b == 2 ? 5 : 1);
  auto profile = density_profile(d);
  CHECK(profile[2] == doctest::Approx(5.0));
  auto r = density_adapt(d, 4, 2);
  CHECK(r.anchor_blocks.front() == 1);  // block 3 leads, rest tie upward from 1
  CHECK(std::find(r.anchor_blocks.begin(), r.anchor_blocks.end(), 3) != r.anchor_blocks.end());
}
