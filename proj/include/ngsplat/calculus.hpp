#pragma once

#include <Eigen/Dense>

#include "ngsplat/field.hpp"
#include "ngsplat/physics.hpp"

namespace ngs {

// Closed-form derivatives of the normalized predictor. With
//   z_i = exp(e_i),  e_i = -½ Σ_j (x_j-μ_ij)²/h_ij²,
//   w_i = z_i/Σz,    s_ij = ∂e_i/∂x_j = -(x_j-μ_ij)/h_ij²,
// the first derivative is
//   ∂v̂_a/∂x_j = Σ_i v_ia w_i (s_ij - s̄_j),        s̄_j = Σ_l w_l s_lj,
// and the per-axis second derivative is
//   ∂²v̂_a/∂x_j² = Σ_i v_ia w_i [ (s_ij - s̄_j)²
//                  - (m2_j - s̄_j²) - 1/h_ij² + r_j ],
//   m2_j = Σ_l w_l s_lj²,  r_j = Σ_l w_l / h_lj².
// The influence cutoff acts as a hard gate: entries with z below the
// threshold contribute neither value nor gradient.

/// p×q matrix of first spatial derivatives ∂v̂_a/∂x_j at x.
Eigen::MatrixXd spatial_jacobian(const GaussianField& field, const Eigen::VectorXd& x);

/// p×q matrix of per-axis second derivatives ∂²v̂_a/∂x_j² at x (the row
/// sums over spatial axes give the Laplacian; mixed partials are never
/// needed).
Eigen::MatrixXd spatial_second_diag(const GaussianField& field, const Eigen::VectorXd& x);

struct GradientOptions {
  double lambda = 1.0;
  int threads = 0;
  /// Ablation: predict with the unnormalized sum; only value and
  /// log-bandwidth blocks receive gradients and the PDE term is skipped.
  bool unnormalized = false;
  /// Extra PDE collocation points appended to the batch (no data term).
  const Eigen::MatrixXd* extra_collocation = nullptr;
};

struct LossGradient {
  double total = 0.0;
  double data = 0.0;
  double pde = 0.0;
  Eigen::VectorXd grad;           // length N*(2q+p), flatten() layout
  Eigen::MatrixXd position_grad;  // N×q block of the same gradient
};

/// Gradient of L = L_data + λ·L_PDE over the batch with respect to every
/// Gaussian parameter, evaluated in one fused pass (losses come out of the
/// same traversal). Hand-derived closed forms throughout; the
/// finite-difference oracle lives only in the tests.
LossGradient loss_param_gradient(const GaussianField& field, const Eigen::MatrixXd& coords,
                                 const Eigen::MatrixXd& values, const Eigen::VectorXd& mask,
                                 const PdeSpec& spec, const GradientOptions& options = {});

}  // namespace ngs
