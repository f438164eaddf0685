#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ngs {

struct FieldDataset;

/// One axes-aligned Gaussian: center, per-axis log bandwidth, and the
/// attached physical-property vector (velocity components, then pressure).
/// Bandwidths are stored as logs so they stay positive under unconstrained
/// gradient updates.
struct AxesGaussian {
  Eigen::VectorXd mu;      // length q
  Eigen::VectorXd log_h;   // length q
  Eigen::VectorXd value;   // length p
};

/// Explicit field representation: an ordered set of axes-aligned Gaussians
/// mapping q-dimensional coordinates to p-dimensional properties.
///
/// Per-Gaussian data is packed row-wise into N×q / N×p matrices; exp(log_h)
/// and h^-2 are cached and refreshed on every mutation. A constructed field
/// is immutable during prediction and safe to read from many threads.
class GaussianField {
 public:
  static constexpr double kDefaultZThreshold = 1e-4;

  GaussianField(int q, int p, std::vector<AxesGaussian> gaussians,
                double z_threshold = kDefaultZThreshold);

  int dim() const { return q_; }
  int channels() const { return p_; }
  int size() const { return static_cast<int>(mu_.rows()); }
  double z_threshold() const { return z_threshold_; }
  void set_z_threshold(double z);

  const Eigen::MatrixXd& centers() const { return mu_; }        // N×q
  const Eigen::MatrixXd& log_scales() const { return log_h_; }  // N×q
  const Eigen::MatrixXd& scales() const { return h_; }          // N×q, exp cache
  const Eigen::MatrixXd& inv_scales_sq() const { return u_; }   // N×q, h^-2 cache
  const Eigen::MatrixXd& values() const { return v_; }          // N×p

  AxesGaussian gaussian(int i) const;

  /// Replaces the whole Gaussian list (used by density control).
  void replace(std::vector<AxesGaussian> gaussians);

  /// Index of the Gaussian whose center is closest to x (Euclidean
  /// distance, ties broken by lowest index).
  int nearest_center(const Eigen::VectorXd& x) const;

  /// Flat parameter vector: (mu | log_h | value) per Gaussian, in list
  /// order; length N*(2q+p).
  Eigen::VectorXd flatten() const;

  /// Inverse of flatten(); rejects a vector of the wrong length.
  void apply(const Eigen::VectorXd& params);

  int params_per_gaussian() const { return 2 * q_ + p_; }
  int param_count() const { return size() * params_per_gaussian(); }

 private:
  void validate() const;
  void refresh_cache();

  int q_ = 0;
  int p_ = 0;
  double z_threshold_ = kDefaultZThreshold;
  Eigen::MatrixXd mu_, log_h_, v_;
  Eigen::MatrixXd h_, u_;
};

/// Grid-based initialization request: exactly one of `count` (total target,
/// per-axis counts chosen to match extents), `axis_counts` (explicit), or
/// `stride` (every stride-th dataset point in row-major order becomes a
/// center; the low-resolution-subsampling variant).
struct GridInit {
  std::optional<int> count;
  std::vector<int> axis_counts;
  std::optional<int> stride;
};

/// Places Gaussian centers on a uniform grid covering the dataset bounding
/// box. Each value vector is copied from the nearest dataset point; initial
/// per-axis bandwidth equals the grid spacing along that axis so neighbors
/// overlap from the start. A degenerate axis gets a single grid line and a
/// bandwidth equal to the dataset's mean nearest-neighbor spacing.
GaussianField init_from_grid(const FieldDataset& dataset, const GridInit& spec,
                             double z_threshold = GaussianField::kDefaultZThreshold);

/// Writes / reads the plain-text checkpoint: a header line (q p N
/// z_threshold) followed by N rows of (mu | log_h | value). Values are
/// printed with 17 significant digits, so load(save(f)) is bit-exact.
void save_field(const GaussianField& field, const std::filesystem::path& path);
GaussianField load_field(const std::filesystem::path& path);

}  // namespace ngs
