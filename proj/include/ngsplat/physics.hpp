#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ngsplat/field.hpp"

namespace ngs {

/// Which residual family applies and how value channels / coordinates map
/// onto it. Velocity channels are the first `spatial_dims` value
/// components and correspond, in order, to the non-time coordinate axes.
class PdeSpec {
 public:
  enum class Kind { NoPde, SteadyNS2D, UnsteadyNS, Burgers };

  static PdeSpec none();
  /// Steady 2D momentum + continuity; q=2, p≥3 (u, v, p̃).
  static PdeSpec steady_ns_2d(double reynolds, int pressure_channel = 2);
  /// Unsteady momentum + continuity in 2 or 3 spatial dimensions plus
  /// time; q = spatial_dims+1 with time on axis `time_axis` (default
  /// last), p ≥ spatial_dims+1.
  static PdeSpec unsteady_ns(double reynolds, int spatial_dims, int time_axis = -1,
                             int pressure_channel = -1);
  /// u_t + u u_x - ν u_xx on (x,t); q=2, p≥1 with u in channel 0.
  static PdeSpec burgers(double nu, int time_axis = 1);

  Kind kind() const { return kind_; }
  bool has_pde() const { return kind_ != Kind::NoPde; }
  double reynolds() const { return reynolds_; }
  double viscosity() const { return nu_; }
  int spatial_dims() const { return spatial_dims_; }
  int time_axis() const { return time_axis_; }
  int pressure_channel() const { return pressure_channel_; }
  /// Number of residual entries M (momentum components then continuity,
  /// or the single Burgers residual).
  int residual_count() const;
  /// Coordinate indices of the spatial axes, in order.
  const std::vector<int>& spatial_axes() const { return spatial_axes_; }
  /// True when the residuals need second spatial derivatives.
  bool needs_second_derivatives() const { return has_pde(); }

  /// Throws std::invalid_argument when the field's (q, p) cannot carry
  /// this residual family.
  void check_layout(int q, int p) const;

  std::string describe() const;

 private:
  Kind kind_ = Kind::NoPde;
  double reynolds_ = 0.0;
  double nu_ = 0.0;
  int spatial_dims_ = 0;
  int time_axis_ = -1;
  int pressure_channel_ = -1;
  std::vector<int> spatial_axes_;
};

/// Residual vector g(x) of the spec's constraint family, assembled from
/// predict, the spatial Jacobian, and the second-derivative diagonal.
Eigen::VectorXd residual(const GaussianField& field, const Eigen::VectorXd& x,
                         const PdeSpec& spec);

/// Same residual built from an externally supplied prediction/Jacobian/
/// second-diagonal triplet (used by the finite-difference oracle and the
/// fused gradient path).
Eigen::VectorXd residual_from_derivatives(const Eigen::VectorXd& v, const Eigen::MatrixXd& jac,
                                          const Eigen::MatrixXd& second_diag, const PdeSpec& spec);

/// Mean over the batch of ‖ω ⊙ (v̂(x_k) - v_k)‖².
double data_loss(const GaussianField& field, const Eigen::MatrixXd& coords,
                 const Eigen::MatrixXd& values, const Eigen::VectorXd& mask, int threads = 0);

/// Mean over the collocation points of Σ_m g_m(x_k)².
double pde_loss(const GaussianField& field, const Eigen::MatrixXd& points, const PdeSpec& spec,
                int threads = 0);

struct LossBreakdown {
  double total = 0.0;
  double data = 0.0;
  double pde = 0.0;
};

/// total = data + λ·pde, with the PDE term evaluated at the batch points.
LossBreakdown total_loss(const GaussianField& field, const Eigen::MatrixXd& coords,
                         const Eigen::MatrixXd& values, const Eigen::VectorXd& mask,
                         const PdeSpec& spec, double lambda, int threads = 0);

}  // namespace ngs
