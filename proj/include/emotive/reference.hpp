#pragma once

// Serial brute-force implementations of the kernels, written straight from
// their defining sums. They are deliberately slow and kept free of the
// optimizations and parallelism of the main library so tests and the
// benchmark can compare against an independent path. Only tests and the
// benchmark link this.

#include <array>
#include <span>
#include <vector>

#include "emotive/core.hpp"
#include "emotive/correlation.hpp"
#include "emotive/events.hpp"
#include "emotive/nurbs.hpp"
#include "emotive/projection.hpp"

namespace emotive::ref {

/// Definition-direct voxel: evaluates the full kernel product at every cell.
Tensor event_voxel(const EventStream& stream, std::size_t bins);

/// Per-bin Gaussian evaluation at every (bin, pixel) cell.
void event_kymograph(const EventStream& stream, std::size_t t_bins, double sigma, Tensor& kx,
                     Tensor& ky);

/// Same-padded 3D mean filter, edge replication, direct window loops.
Tensor mean_pool3(const Tensor& es, std::array<std::size_t, 3> pool);

/// Naive recursive Cox-de Boor basis (the last nonzero span closed at 1).
double basis_recursive(std::size_t i, int degree, double t, const std::vector<double>& knots);

/// Plain polynomial B-spline point: sum_i N_{i,p}(t) P_i via the recursion.
double bspline_point(const std::vector<double>& knots, int degree, std::span<const double> ctrl,
                     double t);

/// Spatial correlation by explicit pre-pooling and a quadruple loop.
Tensor spatial_cost_level(const Tensor& f_prev, const Tensor& f_next, std::size_t kernel);

/// Temporal correlation of the reference block against one target block.
Tensor temporal_cost_level(const Tensor& f_ref, const Tensor& f_target, std::size_t kernel);

/// Five-loop outer product of the axis correlations.
Tensor fuse_level(const Tensor& ht, const Tensor& wt);

/// Single bilinear sample with zero padding, written from the definition.
double bilinear_sample(const Tensor& slab2d, double y, double x);

}  // namespace emotive::ref
