#include "emotive/projection.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace emotive {
namespace {

// Owner-partitioned range [begin, end) of `total` cells for thread `tid` of
// `nt`. Each output cell has exactly one owner, so accumulation order per
// cell equals input order regardless of thread count.
inline void thread_range(std::size_t total, int tid, int nt, std::size_t& begin,
                         std::size_t& end) {
  std::size_t chunk = (total + static_cast<std::size_t>(nt) - 1) / static_cast<std::size_t>(nt);
  begin = std::min(total, chunk * static_cast<std::size_t>(tid));
  end = std::min(total, begin + chunk);
}

// Gaussian row accumulator: adds p * exp(-((b - center)/sigma)^2) to
// col[b] for every bin b in [0, t_bins). Uses the identity
//   exp(-(k+d)^2/s^2) = w0 * E^k * G[|k|],  w0 = exp(-d^2/s^2), E = exp(-2d/s^2)
// walking outward from the nearest bin, so the hot loop is two multiplies
// per bin. G underflowing to zero bounds the walk; with sigma < 1 bin the
// intermediates can overflow, so that regime evaluates exp directly.
struct GaussianScatter {
  std::size_t t_bins;
  double sigma;
  std::vector<double> g;  // g[k] = exp(-(k/sigma)^2)
  std::size_t k_cut;
  bool direct;

  GaussianScatter(std::size_t bins, double sig, bool truncate) : t_bins(bins), sigma(sig) {
    g.resize(t_bins);
    k_cut = t_bins;
    for (std::size_t k = 0; k < t_bins; ++k) {
      double a = static_cast<double>(k) / sigma;
      g[k] = std::exp(-a * a);
      if (g[k] == 0.0 && k < k_cut) k_cut = k;
    }
    if (truncate) {
      auto lim = static_cast<std::size_t>(std::ceil(4.0 * sigma));
      k_cut = std::min(k_cut, lim + 1);
    }
    direct = sigma < 1.0;
  }

  void add(double* col, double center, double p) const {
    long b0 = static_cast<long>(center + 0.5);  // center >= 0 by construction
    if (b0 >= static_cast<long>(t_bins)) b0 = static_cast<long>(t_bins) - 1;
    double d0 = static_cast<double>(b0) - center;

    if (direct) {
      long lo = std::max<long>(0, b0 - static_cast<long>(k_cut));
      long hi = std::min<long>(static_cast<long>(t_bins) - 1, b0 + static_cast<long>(k_cut));
      for (long b = lo; b <= hi; ++b) {
        double a = (static_cast<double>(b) - center) / sigma;
        col[b] += p * std::exp(-a * a);
      }
      return;
    }

    double inv_s2 = 1.0 / (sigma * sigma);
    double w0 = p * std::exp(-d0 * d0 * inv_s2);
    double e = std::exp(-2.0 * d0 * inv_s2);
    double einv = 1.0 / e;

    col[b0] += w0 * g[0];
    double epow = 1.0;
    std::size_t kmax_r = std::min<std::size_t>(k_cut, t_bins - 1 - static_cast<std::size_t>(b0));
    for (std::size_t k = 1; k <= kmax_r; ++k) {
      epow *= e;
      col[b0 + static_cast<long>(k)] += w0 * epow * g[k];
    }
    epow = 1.0;
    std::size_t kmax_l = std::min<std::size_t>(k_cut, static_cast<std::size_t>(b0));
    for (std::size_t k = 1; k <= kmax_l; ++k) {
      epow *= einv;
      col[b0 - static_cast<long>(k)] += w0 * epow * g[k];
    }
  }
};

}  // namespace

double gaussian_kernel(double a, double sigma) {
  if (!(sigma > 0.0)) raise(Errc::non_positive_sigma, "gaussian kernel needs sigma > 0");
  double r = a / sigma;
  return std::exp(-r * r);
}

Voxel event_voxel(const EventStream& stream, std::size_t bins) {
  if (bins < 1) raise(Errc::invalid_argument, "voxel needs at least one bin");
  Voxel out;
  out.bins = bins;
  out.data = Tensor({bins, stream.height, stream.width});
  if (stream.events.empty()) return out;
  if (stream.t_end <= stream.t_start && bins > 1)
    raise(Errc::invalid_argument, "voxel needs a non-degenerate stream window");

  const double window = stream.window_length_s();
  out.bin_duration = bins > 1 ? window / static_cast<double>(bins - 1) : 0.0;
  const double t_scale =
      bins > 1 ? static_cast<double>(bins - 1) / static_cast<double>(stream.t_end - stream.t_start)
               : 0.0;

  const std::size_t H = stream.height, W = stream.width;
  double* v = out.data.data();
  const Event* ev = stream.events.data();
  const std::size_t n = stream.events.size();

#pragma omp parallel
  {
#ifdef _OPENMP
    int tid = omp_get_thread_num();
    int nt = omp_get_num_threads();
#else
    int tid = 0, nt = 1;
#endif
    std::size_t y_begin, y_end;
    thread_range(H, tid, nt, y_begin, y_end);
    for (std::size_t i = 0; i < n; ++i) {
      const Event& e = ev[i];
      if (e.y < y_begin || e.y >= y_end) continue;
      double ts = static_cast<double>(e.t - stream.t_start) * t_scale;
      std::size_t b0 = static_cast<std::size_t>(ts);
      if (b0 >= bins - (bins > 1 ? 1 : 0) && bins > 1) b0 = bins - 2;
      double wb1 = bins > 1 ? ts - static_cast<double>(b0) : 0.0;
      double wb0 = 1.0 - wb1;
      double p = static_cast<double>(e.p);
      std::size_t base = (b0 * H + e.y) * W + e.x;
      v[base] += p * wb0;
      if (bins > 1 && wb1 != 0.0) v[base + H * W] += p * wb1;
    }
  }
  return out;
}

Kymograph event_kymograph(const EventStream& stream, std::size_t t_bins, double sigma,
                          bool truncate) {
  if (t_bins < 2) raise(Errc::invalid_argument, "kymograph needs at least two time bins");
  if (!(sigma > 0.0)) raise(Errc::non_positive_sigma, "kymograph needs sigma > 0");
  Kymograph out;
  out.t_bins = t_bins;
  out.sigma = sigma;
  out.kx = Tensor({t_bins, stream.width});
  out.ky = Tensor({t_bins, stream.height});
  if (stream.events.empty()) return out;
  if (stream.t_end <= stream.t_start)
    raise(Errc::invalid_argument, "kymograph needs a non-degenerate stream window");

  const double t_scale = static_cast<double>(t_bins - 1) /
                         static_cast<double>(stream.t_end - stream.t_start);
  const GaussianScatter scatter(t_bins, sigma, truncate);
  const Event* ev = stream.events.data();
  const std::size_t n = stream.events.size();

  // Accumulate into (pixel, bin) stripes so each event writes one contiguous
  // run, then transpose to the (bin, pixel) layout.
  Tensor accx({stream.width, t_bins});
  Tensor accy({stream.height, t_bins});

#pragma omp parallel
  {
#ifdef _OPENMP
    int tid = omp_get_thread_num();
    int nt = omp_get_num_threads();
#else
    int tid = 0, nt = 1;
#endif
    std::size_t x_begin, x_end;
    thread_range(stream.width, tid, nt, x_begin, x_end);
    for (std::size_t i = 0; i < n; ++i) {
      const Event& e = ev[i];
      if (e.x < x_begin || e.x >= x_end) continue;
      double center = static_cast<double>(e.t - stream.t_start) * t_scale;
      scatter.add(accx.data() + static_cast<std::size_t>(e.x) * t_bins, center,
                  static_cast<double>(e.p));
    }
#pragma omp barrier
    std::size_t y_begin, y_end;
    thread_range(stream.height, tid, nt, y_begin, y_end);
    for (std::size_t i = 0; i < n; ++i) {
      const Event& e = ev[i];
      if (e.y < y_begin || e.y >= y_end) continue;
      double center = static_cast<double>(e.t - stream.t_start) * t_scale;
      scatter.add(accy.data() + static_cast<std::size_t>(e.y) * t_bins, center,
                  static_cast<double>(e.p));
    }
  }

#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < t_bins; ++t) {
    double* kx_row = out.kx.data() + t * stream.width;
    double* ky_row = out.ky.data() + t * stream.height;
    for (std::size_t x = 0; x < stream.width; ++x) kx_row[x] = accx[x * t_bins + t];
    for (std::size_t y = 0; y < stream.height; ++y) ky_row[y] = accy[y * t_bins + t];
  }
  return out;
}

DensityField density_field(const Kymograph& kymo, std::size_t n_a,
                           std::array<std::size_t, 3> pool) {
  if (n_a < 1) raise(Errc::bad_anchor_count, "density field needs at least one temporal block");
  for (std::size_t k : pool)
    if (k < 1) raise(Errc::invalid_argument, "pool kernel dims must be >= 1");

  const std::size_t T = kymo.t_bins;
  const std::size_t W = kymo.kx.dim(1);
  const std::size_t H = kymo.ky.dim(1);
  const std::size_t block_len = (T + n_a - 1) / n_a;  // tail block zero-padded

  Tensor bkx({n_a, W});
  Tensor bky({n_a, H});
  for (std::size_t b = 0; b < n_a; ++b) {
    std::size_t t0 = b * block_len;
    std::size_t t1 = std::min(T, t0 + block_len);
    for (std::size_t t = t0; t < t1; ++t) {
      const double* kx_row = kymo.kx.data() + t * W;
      const double* ky_row = kymo.ky.data() + t * H;
      double* ox = bkx.data() + b * W;
      double* oy = bky.data() + b * H;
      for (std::size_t x = 0; x < W; ++x) ox[x] += kx_row[x];
      for (std::size_t y = 0; y < H; ++y) oy[y] += ky_row[y];
    }
  }

  DensityField out;
  out.n_a = n_a;
  out.pool_size = pool;
  out.es = Tensor({n_a, H, W});
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < n_a; ++b)
    for (std::size_t y = 0; y < H; ++y) {
      double row_mass = bky[b * H + y];
      double* dst = out.es.data() + (b * H + y) * W;
      const double* col_mass = bkx.data() + b * W;
      for (std::size_t x = 0; x < W; ++x) dst[x] = row_mass * col_mass[x];
    }

  // Same-padded mean filter with edge replication.
  const long pt = static_cast<long>(pool[0]), py = static_cast<long>(pool[1]),
             px = static_cast<long>(pool[2]);
  const double inv = 1.0 / static_cast<double>(pt * py * px);
  auto clampi = [](long v, long n) { return v < 0 ? 0L : (v >= n ? n - 1 : v); };
  out.ds = Tensor({n_a, H, W});
#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t b = 0; b < n_a; ++b)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        double sum = 0.0;
        for (long ob = -(pt - 1) / 2; ob <= pt / 2; ++ob)
          for (long oy = -(py - 1) / 2; oy <= py / 2; ++oy)
            for (long ox = -(px - 1) / 2; ox <= px / 2; ++ox) {
              long bb = clampi(static_cast<long>(b) + ob, static_cast<long>(n_a));
              long yy = clampi(static_cast<long>(y) + oy, static_cast<long>(H));
              long xx = clampi(static_cast<long>(x) + ox, static_cast<long>(W));
              sum += out.es[(static_cast<std::size_t>(bb) * H + static_cast<std::size_t>(yy)) * W +
                            static_cast<std::size_t>(xx)];
            }
        out.ds[(b * H + y) * W + x] = sum * inv;
      }
  return out;
}

}  // namespace emotive
