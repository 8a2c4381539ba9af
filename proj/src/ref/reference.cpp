#include "emotive/reference.hpp"

#include <cmath>

namespace emotive::ref {

Tensor event_voxel(const EventStream& stream, std::size_t bins) {
  Tensor out({bins, stream.height, stream.width});
  if (stream.events.empty()) return out;
  double t_scale = bins > 1 ? static_cast<double>(bins - 1) /
                                  static_cast<double>(stream.t_end - stream.t_start)
                            : 0.0;
  for (std::size_t b = 0; b < bins; ++b)
    for (std::size_t y = 0; y < stream.height; ++y)
      for (std::size_t x = 0; x < stream.width; ++x) {
        double acc = 0.0;
        for (const Event& e : stream.events) {
          double ts = static_cast<double>(e.t - stream.t_start) * t_scale;
          acc += static_cast<double>(e.p) *
                 triangular_kernel(static_cast<double>(x) - static_cast<double>(e.x)) *
                 triangular_kernel(static_cast<double>(y) - static_cast<double>(e.y)) *
                 triangular_kernel(static_cast<double>(b) - ts);
        }
        out[(b * stream.height + y) * stream.width + x] = acc;
      }
  return out;
}

void event_kymograph(const EventStream& stream, std::size_t t_bins, double sigma, Tensor& kx,
                     Tensor& ky) {
  kx = Tensor({t_bins, stream.width});
  ky = Tensor({t_bins, stream.height});
  if (stream.events.empty()) return;
  double t_scale =
      static_cast<double>(t_bins - 1) / static_cast<double>(stream.t_end - stream.t_start);
  for (std::size_t t = 0; t < t_bins; ++t) {
    for (std::size_t x = 0; x < stream.width; ++x) {
      double acc = 0.0;
      for (const Event& e : stream.events) {
        double ts = static_cast<double>(e.t - stream.t_start) * t_scale;
        double a = (static_cast<double>(t) - ts) / sigma;
        acc += static_cast<double>(e.p) *
               triangular_kernel(static_cast<double>(x) - static_cast<double>(e.x)) *
               std::exp(-a * a);
      }
      kx[t * stream.width + x] = acc;
    }
    for (std::size_t y = 0; y < stream.height; ++y) {
      double acc = 0.0;
      for (const Event& e : stream.events) {
        double ts = static_cast<double>(e.t - stream.t_start) * t_scale;
        double a = (static_cast<double>(t) - ts) / sigma;
        acc += static_cast<double>(e.p) *
               triangular_kernel(static_cast<double>(y) - static_cast<double>(e.y)) *
               std::exp(-a * a);
      }
      ky[t * stream.height + y] = acc;
    }
  }
}

Tensor mean_pool3(const Tensor& es, std::array<std::size_t, 3> pool) {
  const long B = static_cast<long>(es.dim(0)), H = static_cast<long>(es.dim(1)),
             W = static_cast<long>(es.dim(2));
  const long pb = static_cast<long>(pool[0]), py = static_cast<long>(pool[1]),
             px = static_cast<long>(pool[2]);
  Tensor out(es.shape());
  for (long b = 0; b < B; ++b)
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        double sum = 0.0;
        for (long ob = -(pb - 1) / 2; ob <= pb / 2; ++ob)
          for (long oy = -(py - 1) / 2; oy <= py / 2; ++oy)
            for (long ox = -(px - 1) / 2; ox <= px / 2; ++ox) {
              long bb = std::min(std::max(b + ob, 0L), B - 1);
              long yy = std::min(std::max(y + oy, 0L), H - 1);
              long xx = std::min(std::max(x + ox, 0L), W - 1);
              sum += es[static_cast<std::size_t>((bb * H + yy) * W + xx)];
            }
        out[static_cast<std::size_t>((b * H + y) * W + x)] =
            sum / static_cast<double>(pb * py * px);
      }
  return out;
}

double basis_recursive(std::size_t i, int degree, double t, const std::vector<double>& knots) {
  if (degree == 0) {
    if (knots[i] <= t && t < knots[i + 1]) return 1.0;
    if (t == 1.0 && knots[i] < 1.0 && knots[i + 1] == 1.0) return 1.0;
    return 0.0;
  }
  double left = 0.0, right = 0.0;
  double dl = knots[i + static_cast<std::size_t>(degree)] - knots[i];
  if (dl > 0.0) left = (t - knots[i]) / dl * basis_recursive(i, degree - 1, t, knots);
  double dr = knots[i + static_cast<std::size_t>(degree) + 1] - knots[i + 1];
  if (dr > 0.0)
    right = (knots[i + static_cast<std::size_t>(degree) + 1] - t) / dr *
            basis_recursive(i + 1, degree - 1, t, knots);
  return left + right;
}

double bspline_point(const std::vector<double>& knots, int degree, std::span<const double> ctrl,
                     double t) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ctrl.size(); ++i)
    acc += basis_recursive(i, degree, t, knots) * ctrl[i];
  return acc;
}

namespace {

Tensor pool2_naive(const Tensor& f, std::size_t kernel) {
  const std::size_t D = f.dim(0), H = f.dim(1), W = f.dim(2);
  const std::size_t oh = H / kernel, ow = W / kernel;
  Tensor out({D, oh, ow});
  for (std::size_t c = 0; c < D; ++c)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double sum = 0.0;
        for (std::size_t ky = 0; ky < kernel; ++ky)
          for (std::size_t kx = 0; kx < kernel; ++kx)
            sum += f[(c * H + y * kernel + ky) * W + x * kernel + kx];
        out[(c * oh + y) * ow + x] = sum / static_cast<double>(kernel * kernel);
      }
  return out;
}

Tensor pool1_naive(const Tensor& f, std::size_t kernel) {
  const std::size_t D = f.dim(0), L = f.dim(1);
  const std::size_t ol = L / kernel;
  Tensor out({D, ol});
  for (std::size_t c = 0; c < D; ++c)
    for (std::size_t j = 0; j < ol; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < kernel; ++k) sum += f[c * L + j * kernel + k];
      out[c * ol + j] = sum / static_cast<double>(kernel);
    }
  return out;
}

}  // namespace

Tensor spatial_cost_level(const Tensor& f_prev, const Tensor& f_next, std::size_t kernel) {
  Tensor pooled = kernel > 1 ? pool2_naive(f_next, kernel) : f_next;
  const std::size_t D = f_prev.dim(0), H = f_prev.dim(1), W = f_prev.dim(2);
  const std::size_t ph = pooled.dim(1), pw = pooled.dim(2);
  Tensor out({H, W, ph, pw});
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t k = 0; k < ph; ++k)
        for (std::size_t l = 0; l < pw; ++l) {
          double acc = 0.0;
          for (std::size_t c = 0; c < D; ++c)
            acc += f_prev[(c * H + i) * W + j] * pooled[(c * ph + k) * pw + l];
          out[((i * W + j) * ph + k) * pw + l] = acc / static_cast<double>(D);
        }
  return out;
}

Tensor temporal_cost_level(const Tensor& f_ref, const Tensor& f_target, std::size_t kernel) {
  Tensor pooled = kernel > 1 ? pool1_naive(f_target, kernel) : f_target;
  const std::size_t D = f_ref.dim(0), L = f_ref.dim(1), pl = pooled.dim(1);
  Tensor out({L, pl});
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < pl; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < D; ++c) acc += f_ref[c * L + i] * pooled[c * pl + j];
      out[i * pl + j] = acc / static_cast<double>(D);
    }
  return out;
}

Tensor fuse_level(const Tensor& ht, const Tensor& wt) {
  const std::size_t nb = ht.dim(0), H = ht.dim(1), ph = ht.dim(2), W = wt.dim(1), pw = wt.dim(2);
  Tensor out({nb, H, W, ph, pw});
  for (std::size_t n = 0; n < nb; ++n)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t k = 0; k < W; ++k)
        for (std::size_t j = 0; j < ph; ++j)
          for (std::size_t l = 0; l < pw; ++l)
            out[((((n * H + i) * W + k) * ph + j) * pw) + l] =
                ht[(n * H + i) * ph + j] * wt[(n * W + k) * pw + l];
  return out;
}

double bilinear_sample(const Tensor& slab2d, double y, double x) {
  const long H = static_cast<long>(slab2d.dim(0)), W = static_cast<long>(slab2d.dim(1));
  long x0 = static_cast<long>(std::floor(x)), y0 = static_cast<long>(std::floor(y));
  double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
  auto read = [&](long yy, long xx) {
    if (yy < 0 || xx < 0 || yy >= H || xx >= W) return 0.0;
    return slab2d[static_cast<std::size_t>(yy * W + xx)];
  };
  return (1 - fy) * ((1 - fx) * read(y0, x0) + fx * read(y0, x0 + 1)) +
         fy * ((1 - fx) * read(y0 + 1, x0) + fx * read(y0 + 1, x0 + 1));
}

}  // namespace emotive::ref
