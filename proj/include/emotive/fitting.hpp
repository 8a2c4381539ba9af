#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "emotive/correlation.hpp"
#include "emotive/core.hpp"
#include "emotive/motion.hpp"
#include "emotive/nurbs.hpp"

namespace emotive {

/// Sparse displacement observations: pixel, normalized time, displacement,
/// optional confidence.
struct CorrespondenceSet {
  struct Sample {
    std::size_t x = 0, y = 0;
    double tau = 1.0;
    double dx = 0.0, dy = 0.0;
    double weight = 1.0;
  };
  std::vector<Sample> samples;
  std::size_t height = 0;
  std::size_t width = 0;
};

struct LossConfig {
  double gamma = 0.8;
  double lambda = 1e-7;
  std::size_t iters = 6;
  int radius = 4;  // correlation lookup radius during refinement
};

/// Exponentially iteration-weighted mean-L1 flow error:
/// sum_k gamma^(N-k) (mean|du| + mean|dv|).
double flow_loss(std::span<const FlowField> preds, const FlowField& gt, double gamma);

/// Same weighting over the single-channel depth-ratio error.
double depth_loss(std::span<const MiDField> preds, const MiDField& gt, double gamma);

/// Mean over pixels of the summed L1 difference of consecutive velocities
/// on the given time grid.
double temporal_regularizer(const Trajectory& traj, std::span<const double> t_grid);

/// flow_loss + depth_loss + lambda * temporal_regularizer.
double composite_loss(std::span<const FlowField> flow_preds, const FlowField& flow_gt,
                      std::span<const MiDField> mid_preds, const MiDField& mid_gt,
                      const Trajectory& traj, std::span<const double> t_grid,
                      const LossConfig& cfg);

struct FitOptions {
  double lambda_t = 0.0;            // velocity-smoothness penalty weight
  double ridge = 0.0;               // Tikhonov term; 0 = exact solve
  double fallback_ridge = 0.0;      // applied only when the exact solve is singular
  std::size_t smoothness_grid = 0;  // 0 = 2n+1 uniform samples
};

struct FitResult {
  Trajectory trajectory;
  double max_residual = 0.0;   // max |T(tau_s) - d_s| over all samples
  double mean_residual = 0.0;
  std::size_t pixels_fit = 0;
  std::size_t pixels_empty = 0;
  std::size_t pixels_regularized = 0;  // solved with the fallback ridge
};

/// Per-pixel linear least squares for the control points, first control
/// pinned to zero. With ridge == 0 a rank-deficient pixel system raises
/// SingularSystem unless lambda_t makes it definite; pixels without any
/// samples fit a zero curve.
FitResult fit_trajectory_lsq(const CorrespondenceSet& corr, const KnotVector& knots,
                             const std::vector<double>& weights, const FitOptions& opts = {});

/// Inputs handed to an updater each refinement step.
struct FeatureBundle {
  const CostPatch& temporal;             // one query per anchor time
  const CostPatch& spatial;              // one query at t = 1
  std::span<const double> query_times;   // anchor times ++ {1.0}
  const Trajectory& current;
};

/// Control-point update rule standing in for a learned recurrent cell.
/// Implementations must be pure and leave the first control plane at zero.
class Updater {
 public:
  virtual ~Updater() = default;
  virtual Tensor update(const FeatureBundle& bundle) = 0;
};

/// Moves each control point along the least-squares data-term gradient of
/// pseudo-correspondences read off the cost patches (per query, the argmax
/// offset around the current warp, ties preferring the center tap).
class GradientDescentUpdater : public Updater {
 public:
  explicit GradientDescentUpdater(double step = 0.5, double clip = 2.0)
      : step_(step), clip_(clip) {}
  Tensor update(const FeatureBundle& bundle) override;

 private:
  double step_;
  double clip_;
};

/// No-op updater; refinement becomes the identity.
class ZeroUpdater : public Updater {
 public:
  Tensor update(const FeatureBundle& bundle) override;
};

struct CostVolumeSet {
  CostPyramid spatial;
  CostPyramid temporal;  // TEMPORAL_FUSED
};

struct RefineResult {
  Trajectory trajectory;
  std::vector<DisplacementField> flow_history;  // displacement at t=1 per iteration
};

/// Iterative control-point refinement: per iteration, query the temporal
/// pyramid at the warped anchor positions and the spatial pyramid at the
/// t=1 warp, hand the patches to the updater and apply its increment.
RefineResult refine_trajectory(const Trajectory& traj0, const CostVolumeSet& pyramids,
                               const AdaptationResult& adapt, Updater& updater,
                               const LossConfig& cfg);

}  // namespace emotive
