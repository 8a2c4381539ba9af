// Kernel benchmark: times the brute-force serial reference against the
// library implementation at one thread and at the full thread count, and
// verifies that both paths agree numerically.
//
//   emotive_bench [--events N] [--quick]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "emotive/correlation.hpp"
#include "emotive/events.hpp"
#include "emotive/fitting.hpp"
#include "emotive/projection.hpp"
#include "emotive/reference.hpp"

using namespace emotive;

namespace {

double time_run(const std::function<void()>& fn, int reps = 3) {
  double best = 1e30;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

void row(const char* name, double ref_s, double s1, double sn, double max_diff) {
  std::printf("%-26s %10.4fs %10.4fs %10.4fs %8.2fx %8.2fx   %.3e\n", name, ref_s, s1, sn,
              ref_s / s1, s1 / sn, max_diff);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

EventStream random_stream(std::size_t n, std::size_t h, std::size_t w, std::uint64_t span) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> dt(0, span);
  std::uniform_int_distribution<int> dx(0, static_cast<int>(w) - 1);
  std::uniform_int_distribution<int> dy(0, static_cast<int>(h) - 1);
  std::uniform_int_distribution<int> dp(0, 1);
  EventStream s;
  s.height = h;
  s.width = w;
  s.t_start = 0;
  s.t_end = span;
  s.events.resize(n);
  for (auto& e : s.events)
    e = Event{dt(rng), static_cast<std::uint16_t>(dx(rng)), static_cast<std::uint16_t>(dy(rng)),
              static_cast<std::int8_t>(dp(rng) ? 1 : -1)};
  std::sort(s.events.begin(), s.events.end(),
            [](const Event& a, const Event& b) { return a.t < b.t; });
  return s;
}

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t big_events = 1000000;
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--events") && i + 1 < argc) big_events = std::stoul(argv[++i]);
    if (!std::strcmp(argv[i], "--quick")) quick = true;
  }
  const int nt = max_threads();
  std::printf("threads available: %d\n\n", nt);
  std::printf("%-26s %11s %11s %11s %9s %9s   %s\n", "kernel", "reference", "1 thread",
              "max thr", "ref/1t", "1t/max", "max |diff|");

  {
    auto s = random_stream(quick ? 500 : 2000, 32, 32, 50000);
    Tensor ref;
    double tr = time_run([&] { ref = ref::event_voxel(s, 7); }, 1);
    Voxel v1, vn;
    set_threads(1);
    double t1 = time_run([&] { v1 = event_voxel(s, 7); });
    set_threads(nt);
    double tn = time_run([&] { vn = event_voxel(s, 7); });
    row("event_voxel 32x32", tr, t1, tn,
        std::max(max_abs_diff(ref, v1.data), max_abs_diff(v1.data, vn.data)));
  }

  {
    auto s = random_stream(quick ? 1000 : 4000, 48, 64, 80000);
    Tensor rx, ry;
    double tr = time_run([&] { ref::event_kymograph(s, 64, 8.0, rx, ry); }, 1);
    Kymograph k1, kn;
    set_threads(1);
    double t1 = time_run([&] { k1 = event_kymograph(s, 64, 8.0); });
    set_threads(nt);
    double tn = time_run([&] { kn = event_kymograph(s, 64, 8.0); });
    row("event_kymograph 48x64", tr, t1, tn,
        std::max({max_abs_diff(rx, k1.kx), max_abs_diff(ry, k1.ky), max_abs_diff(k1.kx, kn.kx)}));
  }

  {
    auto fp = random_tensor({8, 24, 24}, 1);
    auto fn = random_tensor({8, 24, 24}, 2);
    FeatureMap mp{fp, FeatureAxis::XY, 0}, mn{fn, FeatureAxis::XY, 0};
    Tensor ref0, ref1;
    double tr = time_run(
        [&] {
          ref0 = ref::spatial_cost_level(fp, fn, 1);
          ref1 = ref::spatial_cost_level(fp, fn, 2);
        },
        1);
    CostPyramid p1, pn;
    set_threads(1);
    double t1 = time_run([&] { p1 = spatial_cost_pyramid(mp, mn, 2); });
    set_threads(nt);
    double tn = time_run([&] { pn = spatial_cost_pyramid(mp, mn, 2); });
    row("spatial_cost 8x24x24", tr, t1, tn,
        std::max({max_abs_diff(ref0, p1.levels[0]), max_abs_diff(ref1, p1.levels[1]),
                  max_abs_diff(p1.levels[0], pn.levels[0])}));
  }

  {
    Kymograph k;
    k.t_bins = 120;
    k.sigma = 10.0;
    k.kx = random_tensor({120, 64}, 3);
    k.ky = random_tensor({120, 64}, 4);
    DensityField d1, dn;
    set_threads(1);
    double t1 = time_run([&] { d1 = density_field(k, 6, {3, 3, 3}); });
    Tensor ref;
    double tr = time_run([&] { ref = ref::mean_pool3(d1.es, {3, 3, 3}); }, 1);
    set_threads(nt);
    double tn = time_run([&] { dn = density_field(k, 6, {3, 3, 3}); });
    row("density_field 6x64x64", tr, t1, tn,
        std::max(max_abs_diff(ref, d1.ds), max_abs_diff(d1.ds, dn.ds)));
  }

  {
    auto kv = clamped_knots(5, 3, {0.4});
    Tensor c({5, 240, 320, 2});
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (std::size_t i = c.dim(1) * c.dim(2) * 2; i < c.size(); ++i) c[i] = u(rng);
    Trajectory traj(kv, {1, 0.7, 1.3, 0.9, 1.1}, std::move(c));

    // Serial reference: the same weighted sum without the parallel map.
    std::vector<double> ref_field(240 * 320 * 2);
    auto eval_ref = [&](double t) {
      auto nb = traj.rational_basis(t);
      const auto& ctrl = traj.control();
      std::size_t cells = 240 * 320 * 2;
      for (std::size_t px = 0; px < cells; ++px) {
        double v = 0.0;
        for (std::size_t i = 0; i < 5; ++i) v += nb[i] * ctrl[i * cells + px];
        ref_field[px] = v;
      }
    };
    double tr = time_run([&] { eval_ref(0.37); });
    DisplacementField f1, fn2;
    set_threads(1);
    double t1 = time_run([&] { f1 = eval_trajectory(traj, 0.37); });
    set_threads(nt);
    double tn = time_run([&] { fn2 = eval_trajectory(traj, 0.37); });
    double diff = 0.0;
    for (std::size_t i = 0; i < f1.uv.size(); ++i)
      diff = std::max(diff, std::abs(f1.uv[i] - fn2.uv[i]));
    row("eval_trajectory 240x320", tr, t1, tn, diff);
  }

  std::printf("\nthroughput: %zu events -> kymograph 120 bins at 240x320\n", big_events);
  {
    auto s = random_stream(big_events, 240, 320, 100000);
    Kymograph k;
    set_threads(1);
    double t1 = time_run([&] { k = event_kymograph(s, 120, 10.0); }, 2);
    set_threads(nt);
    double tn = time_run([&] { k = event_kymograph(s, 120, 10.0); }, 2);
    std::printf("  1 thread  %.3fs  (%.2f Mev/s)\n", t1, big_events / t1 / 1e6);
    std::printf("  %d threads %.3fs  (%.2f Mev/s)\n", nt, tn, big_events / tn / 1e6);
    set_threads(1);
    double tv = time_run([&] { auto v = event_voxel(s, 7); (void)v; }, 2);
    std::printf("  voxel, 1 thread %.3fs (%.2f Mev/s)\n", tv, big_events / tv / 1e6);
  }
  return 0;
}
