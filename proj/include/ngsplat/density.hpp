#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "ngsplat/field.hpp"
#include "ngsplat/splat.hpp"

namespace ngs {

/// Adaptive density-control thresholds. Defaults follow the standard
/// settings: densify at 2× the median error, act only above a position-
/// gradient norm of 2e-4, merge above cosine similarity 0.9, every 100
/// epochs.
struct DensifyConfig {
  double densify_threshold = 2.0;
  double split_clone_threshold = 2.0e-4;
  double merge_threshold = 0.9;
  int interval = 100;

  void validate() const;
};

/// Per-Gaussian error mass ε_i = Σ_k L_k z_ik / ‖z_i‖₂ where L_k is the
/// per-point loss; columns with zero norm get ε = 0.
Eigen::VectorXd gaussian_errors(const InfluenceMatrix& influence,
                                const Eigen::VectorXd& point_losses);

/// Indices with ε_i > median(ε) · densify_threshold (median = average of
/// the two middle order statistics for even N).
std::vector<int> select_densify(const Eigen::VectorXd& errors, const DensifyConfig& cfg);

/// Maps each Gaussian of a density-control result back to its origin:
/// carried_from[i] is the pre-pass index whose parameters survived
/// unchanged, or -1 for a freshly created block (clone children, split
/// children, merged representatives). Optimizer state follows this map.
struct DensityUpdate {
  GaussianField field;
  std::vector<int> carried_from;
  int clones = 0;
  int splits = 0;
  int merged_clusters = 0;
};

/// Split/clone pass. For each selected index whose averaged position-
/// gradient norm exceeds split_clone_threshold:
///  - CLONE when its largest axis scale is below the field median of
///    largest axis scales: an exact duplicate whose center is offset by
///    one position-gradient step (-clone_step · averaged gradient);
///  - SPLIT otherwise: the parent is replaced by two children with halved
///    scales and centers drawn uniformly from the parent's ±1σ box.
/// Survivors keep their order; clones then split children are appended in
/// ascending parent index.
DensityUpdate densify(const GaussianField& field, const std::vector<int>& indices,
                      const Eigen::MatrixXd& avg_position_grad, double clone_step,
                      const DensifyConfig& cfg, std::uint64_t rng_seed);

/// Similarity-graph merge: influence vectors at the training points, edges
/// where the cosine similarity of the (unnormalized) columns exceeds
/// merge_threshold, connected components merged in one pass. A cluster of
/// size ≥ 2 becomes one Gaussian with the mean center, the mean of the
/// member scales, and the pre-merge field's prediction at the new center.
/// Survivors are ordered by ascending minimum original index.
DensityUpdate merge(const GaussianField& field, const Eigen::MatrixXd& training_points,
                    const DensifyConfig& cfg, int threads = 0);

/// Connected components of an undirected graph on N nodes; clusters are
/// returned sorted by their minimum member, members ascending. Rejects
/// edges with endpoints outside [0, N).
std::vector<std::vector<int>> connected_components(int n,
                                                   const std::vector<std::pair<int, int>>& edges);

}  // namespace ngs
