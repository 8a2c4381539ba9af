#pragma once

#include <array>
#include <cstddef>

#include "emotive/core.hpp"
#include "emotive/events.hpp"

namespace emotive {

/// Triangular sampling kernel max(0, 1 - |a|).
inline double triangular_kernel(double a) {
  double w = 1.0 - (a < 0 ? -a : a);
  return w > 0.0 ? w : 0.0;
}

/// Unnormalized Gaussian kernel exp(-(a/sigma)^2).
double gaussian_kernel(double a, double sigma);

/// Spatially binned event tensor: signed kernel mass over (bin, y, x).
/// Bin centers span the stream window; an event at t_start lands on bin 0
/// and one at t_end on bin B-1.
struct Voxel {
  Tensor data;              // (B, H, W)
  std::size_t bins = 0;
  double bin_duration = 0;  // seconds; 0 for B == 1 or an empty window
};

/// Decoupled temporal projections: kx over (time-bin, x), ky over
/// (time-bin, y), built with the Gaussian temporal kernel.
struct Kymograph {
  Tensor kx;  // (T, W)
  Tensor ky;  // (T, H)
  std::size_t t_bins = 0;
  double sigma = 0;  // in time-bins
};

/// Block-wise spatio-temporal event distribution and its pooled density.
struct DensityField {
  Tensor es;  // (n_a, H, W): outer product of per-block column/row masses
  Tensor ds;  // same shape: mean-pooled es (edge-replicating same padding)
  std::array<std::size_t, 3> pool_size{1, 1, 1};
  std::size_t n_a = 0;
};

/// Accumulates the stream into B temporal bins with triangular kernels in
/// x, y and bin index. Empty streams produce an all-zero voxel.
Voxel event_voxel(const EventStream& stream, std::size_t bins);

/// Accumulates the stream into t_bins temporal rows with a triangular
/// spatial kernel and the Gaussian temporal kernel (sigma in bins).
/// By default the Gaussian is evaluated at every bin; `truncate` cuts it
/// off beyond 4*sigma (error below exp(-16) of the peak).
Kymograph event_kymograph(const EventStream& stream, std::size_t t_bins, double sigma,
                          bool truncate = false);

/// Splits the kymograph into n_a equal temporal blocks (zero-padding the
/// tail when t_bins is not divisible), sums each block, forms the per-block
/// outer product field, and mean-pools it with `pool` (same padding with
/// edge replication).
DensityField density_field(const Kymograph& kymo, std::size_t n_a,
                           std::array<std::size_t, 3> pool);

}  // namespace emotive
