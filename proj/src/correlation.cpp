#include "emotive/correlation.hpp"

#include <cmath>

namespace emotive {
namespace {

void check_levels(const Tensor& t, std::size_t levels, std::size_t tail_dims) {
  if (levels < 1) raise(Errc::invalid_argument, "need at least one pyramid level");
  std::size_t kernel = std::size_t{1} << (levels - 1);
  for (std::size_t d = 0; d < tail_dims; ++d)
    if (t.dim(t.rank() - 1 - d) < kernel)
      raise(Errc::shape_mismatch, "feature extent too small for the pyramid depth");
}

// Bilinear read with zero padding outside [0, h) x [0, w).
inline double bilinear_zero(const double* slab, std::size_t h, std::size_t w, double y, double x) {
  long x0 = static_cast<long>(std::floor(x));
  long y0 = static_cast<long>(std::floor(y));
  double fx = x - static_cast<double>(x0);
  double fy = y - static_cast<double>(y0);
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      long yy = y0 + dy, xx = x0 + dx;
      if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
      double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      acc += wgt * slab[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
    }
  return acc;
}

}  // namespace

Tensor mean_pool_tail(const Tensor& t, std::size_t kernel, std::size_t tail_dims) {
  if (kernel == 1) return t;
  std::vector<std::size_t> shape = t.shape();
  std::size_t rank = shape.size();
  std::size_t lead = 1;
  for (std::size_t d = 0; d + tail_dims < rank; ++d) lead *= shape[d];

  if (tail_dims == 1) {
    std::size_t len = shape[rank - 1];
    std::size_t out_len = len / kernel;
    std::vector<std::size_t> out_shape = shape;
    out_shape[rank - 1] = out_len;
    Tensor out(out_shape);
    double inv = 1.0 / static_cast<double>(kernel);
    for (std::size_t l = 0; l < lead; ++l) {
      const double* src = t.data() + l * len;
      double* dst = out.data() + l * out_len;
      for (std::size_t o = 0; o < out_len; ++o) {
        double acc = 0.0;
        for (std::size_t k = 0; k < kernel; ++k) acc += src[o * kernel + k];
        dst[o] = acc * inv;
      }
    }
    return out;
  }

  std::size_t h = shape[rank - 2], w = shape[rank - 1];
  std::size_t oh = h / kernel, ow = w / kernel;
  std::vector<std::size_t> out_shape = shape;
  out_shape[rank - 2] = oh;
  out_shape[rank - 1] = ow;
  Tensor out(out_shape);
  double inv = 1.0 / static_cast<double>(kernel * kernel);
  for (std::size_t l = 0; l < lead; ++l) {
    const double* src = t.data() + l * h * w;
    double* dst = out.data() + l * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < kernel; ++ky)
          for (std::size_t kx = 0; kx < kernel; ++kx)
            acc += src[(oy * kernel + ky) * w + ox * kernel + kx];
        dst[oy * ow + ox] = acc * inv;
      }
  }
  return out;
}

CostPyramid spatial_cost_pyramid(const FeatureMap& f_prev, const FeatureMap& f_next,
                                 std::size_t levels) {
  if (f_prev.axis != FeatureAxis::XY || f_next.axis != FeatureAxis::XY)
    raise(Errc::invalid_argument, "spatial correlation expects XY features");
  if (f_prev.data.rank() != 3 || !f_prev.data.same_shape(f_next.data))
    raise(Errc::shape_mismatch, "spatial features must share a (D, H, W) shape");
  check_levels(f_prev.data, levels, 2);

  const std::size_t D = f_prev.data.dim(0);
  const std::size_t H = f_prev.data.dim(1);
  const std::size_t W = f_prev.data.dim(2);
  const double inv_d = 1.0 / static_cast<double>(D);

  CostPyramid pyr;
  pyr.kind = CostKind::SPATIAL;
  for (std::size_t m = 0; m < levels; ++m) {
    Tensor pooled = mean_pool_tail(f_next.data, std::size_t{1} << m, 2);
    const std::size_t ph = pooled.dim(1), pw = pooled.dim(2);
    Tensor level({H, W, ph, pw});
    const double* fp = f_prev.data.data();
    const double* fn = pooled.data();
    double* dst = level.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        double* cell = dst + (i * W + j) * ph * pw;
        for (std::size_t kl = 0; kl < ph * pw; ++kl) {
          double acc = 0.0;
          for (std::size_t c = 0; c < D; ++c) acc += fp[(c * H + i) * W + j] * fn[c * ph * pw + kl];
          cell[kl] = acc * inv_d;
        }
      }
    pyr.levels.push_back(std::move(level));
  }
  return pyr;
}

CostPyramid temporal_cost_pyramid(std::span<const FeatureMap> blocks, std::size_t levels) {
  if (blocks.size() < 2)
    raise(Errc::fewer_than_two_blocks, "temporal correlation needs a reference and a target block");
  FeatureAxis axis = blocks[0].axis;
  if (axis == FeatureAxis::XY) raise(Errc::invalid_argument, "temporal correlation expects axis features");
  for (const FeatureMap& b : blocks) {
    if (b.axis != axis) raise(Errc::shape_mismatch, "temporal blocks must share an axis");
    if (b.data.rank() != 2 || !b.data.same_shape(blocks[0].data))
      raise(Errc::shape_mismatch, "temporal blocks must share a (D, L) shape");
  }
  check_levels(blocks[0].data, levels, 1);

  const std::size_t D = blocks[0].data.dim(0);
  const std::size_t L = blocks[0].data.dim(1);
  const std::size_t nb = blocks.size() - 1;
  const double inv_d = 1.0 / static_cast<double>(D);

  CostPyramid pyr;
  pyr.kind = axis == FeatureAxis::HT ? CostKind::TEMPORAL_HT : CostKind::TEMPORAL_WT;
  for (std::size_t m = 0; m < levels; ++m) {
    std::size_t pl = L / (std::size_t{1} << m);
    Tensor level({nb, L, pl});
#pragma omp parallel for schedule(static)
    for (std::size_t n = 0; n < nb; ++n) {
      Tensor pooled = mean_pool_tail(blocks[n + 1].data, std::size_t{1} << m, 1);
      const double* ref = blocks[0].data.data();
      const double* tgt = pooled.data();
      double* dst = level.data() + n * L * pl;
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < pl; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < D; ++c) acc += ref[c * L + i] * tgt[c * pl + j];
          dst[i * pl + j] = acc * inv_d;
        }
    }
    pyr.levels.push_back(std::move(level));
  }
  return pyr;
}

CostPyramid fuse_temporal(const CostPyramid& c_ht, const CostPyramid& c_wt) {
  if (c_ht.kind != CostKind::TEMPORAL_HT || c_wt.kind != CostKind::TEMPORAL_WT)
    raise(Errc::invalid_argument, "fusion expects an HT and a WT pyramid");
  if (c_ht.levels.size() != c_wt.levels.size())
    raise(Errc::level_mismatch, "pyramids must have the same level count");

  CostPyramid out;
  out.kind = CostKind::TEMPORAL_FUSED;
  for (std::size_t m = 0; m < c_ht.levels.size(); ++m) {
    const Tensor& ht = c_ht.levels[m];
    const Tensor& wt = c_wt.levels[m];
    if (ht.dim(0) != wt.dim(0)) raise(Errc::level_mismatch, "pyramids must share the block count");
    const std::size_t nb = ht.dim(0), H = ht.dim(1), ph = ht.dim(2), W = wt.dim(1), pw = wt.dim(2);
    Tensor fused({nb, H, W, ph, pw});
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t n = 0; n < nb; ++n)
      for (std::size_t i = 0; i < H; ++i) {
        const double* hrow = ht.data() + (n * H + i) * ph;
        for (std::size_t k = 0; k < W; ++k) {
          const double* wrow = wt.data() + (n * W + k) * pw;
          double* dst = fused.data() + (((n * H + i) * W) + k) * ph * pw;
          for (std::size_t j = 0; j < ph; ++j)
            for (std::size_t l = 0; l < pw; ++l) dst[j * pw + l] = hrow[j] * wrow[l];
        }
      }
    out.levels.push_back(std::move(fused));
  }
  return out;
}

CostPatch query_neighborhood(const CostPyramid& pyr, std::span<const PatchQuery> queries,
                             int radius) {
  if (radius < 0) raise(Errc::invalid_argument, "query radius must be >= 0");
  if (pyr.levels.empty()) raise(Errc::invalid_argument, "empty pyramid");
  if (pyr.kind == CostKind::TEMPORAL_HT || pyr.kind == CostKind::TEMPORAL_WT)
    raise(Errc::invalid_argument, "query axis pyramids after fusion");
  if (queries.empty()) raise(Errc::invalid_argument, "need at least one query");

  const bool fused = pyr.kind == CostKind::TEMPORAL_FUSED;
  const Tensor& l0 = pyr.levels[0];
  const std::size_t H = fused ? l0.dim(1) : l0.dim(0);
  const std::size_t W = fused ? l0.dim(2) : l0.dim(1);
  const std::size_t side = 2 * static_cast<std::size_t>(radius) + 1;
  const std::size_t taps = side * side;
  const std::size_t levels = pyr.levels.size();

  for (const PatchQuery& q : queries) {
    if (q.positions.rank() != 3 || q.positions.dim(0) != H || q.positions.dim(1) != W ||
        q.positions.dim(2) != 2)
      raise(Errc::shape_mismatch, "query positions must be (H, W, 2)");
    if (fused && q.slice >= l0.dim(0)) raise(Errc::index_out_of_range, "query slice out of range");
  }

  CostPatch patch;
  patch.radius = radius;
  patch.levels = levels;
  patch.values = Tensor({H, W, queries.size(), levels * taps});
  double* out = patch.values.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t k = 0; k < W; ++k)
      for (std::size_t q = 0; q < queries.size(); ++q) {
        const double px = queries[q].positions[(i * W + k) * 2];
        const double py = queries[q].positions[(i * W + k) * 2 + 1];
        double* dst = out + ((i * W + k) * queries.size() + q) * levels * taps;
        for (std::size_t m = 0; m < levels; ++m) {
          const Tensor& lvl = pyr.levels[m];
          const std::size_t ph = lvl.dim(lvl.rank() - 2);
          const std::size_t pw = lvl.dim(lvl.rank() - 1);
          const double* slab =
              fused ? lvl.data() + (((queries[q].slice * H + i) * W) + k) * ph * pw
                    : lvl.data() + (i * W + k) * ph * pw;
          const double scale = 1.0 / static_cast<double>(std::size_t{1} << m);
          const double cx = px * scale;
          const double cy = py * scale;
          for (long dy = -radius; dy <= radius; ++dy)
            for (long dx = -radius; dx <= radius; ++dx) {
              double v;
              double sx = cx + static_cast<double>(dx);
              double sy = cy + static_cast<double>(dy);
              // Integer taps inside the slab read the raw cell exactly.
              long ix = static_cast<long>(sx), iy = static_cast<long>(sy);
              if (static_cast<double>(ix) == sx && static_cast<double>(iy) == sy && ix >= 0 &&
                  iy >= 0 && ix < static_cast<long>(pw) && iy < static_cast<long>(ph))
                v = slab[static_cast<std::size_t>(iy) * pw + static_cast<std::size_t>(ix)];
              else
                v = bilinear_zero(slab, ph, pw, sy, sx);
              dst[m * taps + static_cast<std::size_t>(dy + radius) * side +
                  static_cast<std::size_t>(dx + radius)] = v;
            }
        }
      }
  return patch;
}

}  // namespace emotive
