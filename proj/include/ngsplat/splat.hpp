#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "ngsplat/dataset.hpp"
#include "ngsplat/field.hpp"

namespace ngs {

/// Unnormalized influence z(x) = exp(-½ Σ_j (x_j-μ_j)²/h_j²). Equals 1
/// exactly at the center.
double influence(const AxesGaussian& g, const Eigen::VectorXd& x);

/// Normalized weights w_i = z_i / Σ_j z_j with the field's influence
/// cutoff applied: entries whose raw z falls below z_threshold are exact
/// zeros. If every entry is below the cutoff the weights renormalize over
/// the raw values, and if even the raw sum underflows (< 1e-300) the
/// weight collapses to a one-hot on the nearest center, so prediction is a
/// total function.
Eigen::VectorXd weights(const GaussianField& field, const Eigen::VectorXd& x);

/// Normalized splatting prediction v̂(x) = Σ w_i(x) v_i — a convex
/// combination of the contributing property vectors.
Eigen::VectorXd predict(const GaussianField& field, const Eigen::VectorXd& x);

/// Unnormalized sum Σ z_i(x) v_i; decays to zero away from all centers.
/// Kept as the ablation path.
Eigen::VectorXd predict_unnormalized(const GaussianField& field, const Eigen::VectorXd& x);

/// Row-parallel batch form of predict(); chunked so results are identical
/// for any thread count.
Eigen::MatrixXd predict_many(const GaussianField& field, const Eigen::MatrixXd& points,
                             int threads = 0);
Eigen::MatrixXd predict_many_unnormalized(const GaussianField& field,
                                          const Eigen::MatrixXd& points, int threads = 0);

/// Sparse K×N matrix of influences z_i(x_k); entries below the field's
/// z_threshold are not stored. Column i is the influence vector of
/// Gaussian i over the K points.
class InfluenceMatrix {
 public:
  InfluenceMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_entries_(rows) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  /// Entries of one row as (gaussian index, z), ascending index.
  const std::vector<std::pair<int, double>>& row(int k) const { return row_entries_[k]; }
  std::vector<std::pair<int, double>>& mutable_row(int k) { return row_entries_[k]; }

  Eigen::MatrixXd dense() const;
  /// Per-column Euclidean norms ‖z_i‖₂.
  Eigen::VectorXd column_norms() const;
  /// Per-column weighted sums Σ_k c_k z_ik.
  Eigen::VectorXd column_weighted_sums(const Eigen::VectorXd& point_weights) const;
  /// Gram matrix Zᵀ Z (dense N×N), accumulated row by row.
  Eigen::MatrixXd gram() const;

 private:
  int rows_, cols_;
  std::vector<std::vector<std::pair<int, double>>> row_entries_;
};

InfluenceMatrix influence_matrix(const GaussianField& field, const Eigen::MatrixXd& points,
                                 int threads = 0);

/// Classic kernel-regression baseline: identical to predict() on a field
/// whose Gaussians sit at the dataset points with the dataset values,
/// isotropic bandwidth, and no influence cutoff.
Eigen::VectorXd nadaraya_watson(const FieldDataset& dataset, double bandwidth,
                                const Eigen::VectorXd& x);

/// The equivalent field, exposed so the definitional equivalence is
/// testable directly.
GaussianField nadaraya_watson_field(const FieldDataset& dataset, double bandwidth);

}  // namespace ngs
