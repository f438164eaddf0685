#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "ngsplat/field.hpp"

namespace ngs {

/// Monte-Carlo check of the kernel-regression convergence rate: draw N
/// centers i.i.d. from a box, attach noisy target values, build an
/// isotropic axes-aligned field with the bandwidth rule
/// h(N) = c·N^(-1/(2β+q)), and measure RMSE at fixed interior test points.
struct RateExperiment {
  int q = 1;
  int beta = 2;
  double noise_sigma = 0.1;
  std::vector<int> sample_counts;  // strictly increasing
  double bandwidth_constant = 1.0;
  int trials = 20;
  int test_points = 64;
  /// Sampling box per axis; test points keep a 10% interior margin to
  /// avoid kernel boundary bias, which the pointwise theory does not
  /// cover.
  double box_lo = 0.0;
  double box_hi = 1.0;
  std::uint64_t seed = 0;
  std::function<double(const Eigen::VectorXd&)> target;  // β-smooth on the box

  void validate() const;
};

struct RateResult {
  std::vector<int> sample_counts;
  std::vector<double> mean_rmse;
  double slope = 0.0;           // least-squares fit of log RMSE vs log N
  double slope_stderr = 0.0;
  bool exact_fit = false;       // all errors ~0 (constant target, no noise)
};

/// Expected slope is -β/(2β+q) under the bias/variance-balancing
/// bandwidth. Rejects experiments with fewer than 3 sample counts.
RateResult run_rate_experiment(const RateExperiment& exp);

struct DecayProbe {
  double distance = 0.0;       // from the last center, in units of sigma
  double unnormalized_norm = 0.0;
  double normalized_norm = 0.0;
};

/// Probes the unnormalized and normalized predictions along a ray leaving
/// the data support: the unnormalized magnitude collapses with distance
/// while the normalized one stays inside the convex value bounds.
std::vector<DecayProbe> run_unnormalized_decay_demo(int n_gaussians, double sigma,
                                                    const std::vector<double>& probe_distances,
                                                    std::uint64_t seed = 0);

}  // namespace ngs
