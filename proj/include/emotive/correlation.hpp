#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "emotive/core.hpp"

namespace emotive {

enum class FeatureAxis { XY, HT, WT };

/// Feature tensor: (D, H, W) for XY features, (D, L) for single-axis
/// temporal features. `block` is the 0-based temporal block of axis
/// features.
struct FeatureMap {
  Tensor data;
  FeatureAxis axis = FeatureAxis::XY;
  std::size_t block = 0;
};

enum class CostKind { SPATIAL, TEMPORAL_HT, TEMPORAL_WT, TEMPORAL_FUSED };

/// Multi-level correlation volume. Level m pools the target features with a
/// non-overlapping mean of kernel 2^m (level 0 is unpooled).
///   SPATIAL         (H, W, H/2^m, W/2^m)
///   TEMPORAL_HT/WT  (blocks-1, L, L/2^m)
///   TEMPORAL_FUSED  (blocks-1, H, W, H/2^m, W/2^m)
struct CostPyramid {
  std::vector<Tensor> levels;
  CostKind kind = CostKind::SPATIAL;
};

/// Sampled correlation neighborhoods: for each grid pixel and query, the
/// (2r+1)^2 bilinear taps of every level, laid out level-major.
struct CostPatch {
  Tensor values;  // (H, W, n_queries, levels*(2r+1)^2)
  int radius = 0;
  std::size_t levels = 0;
};

/// One lookup into a pyramid: target positions (H, W, 2) in level-0 cells,
/// plus the block slice to read for fused temporal pyramids (ignored for
/// spatial ones).
struct PatchQuery {
  Tensor positions;
  std::size_t slice = 0;
};

/// Mean inner product between reference features and pooled target
/// features at every level: entry (i,j,k,l) = 1/D * sum_c f_prev(c,i,j) *
/// pool(f_next)(c,k,l).
CostPyramid spatial_cost_pyramid(const FeatureMap& f_prev, const FeatureMap& f_next,
                                 std::size_t levels);

/// Correlates temporal block 0 (the reference) against blocks 1..B-1 along
/// one spatial axis, with 1D pooling of the target axis.
CostPyramid temporal_cost_pyramid(std::span<const FeatureMap> blocks, std::size_t levels);

/// Outer product of the two axis pyramids over their spatial dimensions:
/// fused(n,i,k,j,l) = ht(n,i,j) * wt(n,k,l).
CostPyramid fuse_temporal(const CostPyramid& c_ht, const CostPyramid& c_wt);

/// Bilinear neighborhood lookup at positions p + delta, delta in
/// {-r..r}^2, with the lookup center scaled by 2^-m at level m.
/// Out-of-bounds taps read zero.
CostPatch query_neighborhood(const CostPyramid& pyr, std::span<const PatchQuery> queries,
                             int radius);

/// Non-overlapping mean pooling of the trailing spatial dims (1 for axis
/// features, 2 for XY); output dims floor-divided, remainders dropped.
Tensor mean_pool_tail(const Tensor& t, std::size_t kernel, std::size_t tail_dims);

}  // namespace emotive
