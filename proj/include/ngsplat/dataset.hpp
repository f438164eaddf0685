#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ngs {

/// Structured-grid metadata for datasets produced by generators or read
/// from files. Points are stored row-major with the first axis slowest.
/// `time_axis` marks the coordinate that spatial averaging must not touch
/// (-1 when there is none).
struct GridMeta {
  std::vector<int> axis_counts;
  std::vector<double> spacing;
  std::vector<double> origin;
  int time_axis = -1;

  int point_count() const;
};

/// Optional physical scales; when length/velocity scales are present the
/// loader non-dimensionalizes at ingestion so the core only ever sees
/// dimensionless quantities.
struct PhysicsMeta {
  std::optional<double> reynolds;
  std::optional<double> viscosity;
  std::optional<double> length_scale;
  std::optional<double> velocity_scale;
};

/// Point cloud of coordinates and physical values with an observability
/// mask over the value channels (1 = observed, 0 = hidden from the data
/// loss, e.g. pressure in flow-MRI layouts).
struct FieldDataset {
  Eigen::MatrixXd coords;  // K×q
  Eigen::MatrixXd values;  // K×p
  Eigen::VectorXd mask;    // length p, entries in {0,1}
  std::optional<GridMeta> grid;
  PhysicsMeta physics;

  int count() const { return static_cast<int>(coords.rows()); }
  int dim() const { return static_cast<int>(coords.cols()); }
  int channels() const { return static_cast<int>(values.cols()); }

  /// Throws std::invalid_argument on inconsistent shapes, non-finite
  /// entries, mask entries outside {0,1}, or grid metadata that does not
  /// match the point count.
  void validate() const;

  /// Mean nearest-neighbor distance over coordinates (brute force).
  double mean_nearest_neighbor_spacing() const;
};

/// Column layout for files without embedded metadata: q leading coordinate
/// columns, then p value columns.
struct DatasetLayout {
  int q = 0;
  int p = 0;
};

/// Reads a delimited-text dataset (one point per row, header row naming
/// columns, optional `# key=value` metadata lines). When the file carries
/// no metadata the layout argument is required. Physical scales present in
/// the metadata are applied here: coordinates /L, time·U/L, velocities /U,
/// pressure /U².
FieldDataset load_dataset(const std::filesystem::path& path,
                          std::optional<DatasetLayout> layout = std::nullopt);

/// Writes the dataset with full precision; save→load round-trips bit-exactly.
void save_dataset(const FieldDataset& dataset, const std::filesystem::path& path);

/// Block-mean downsampling over the spatial axes: `factor` (2 or 4) is the
/// per-axis block edge per pass, new points sit at block centers, any time
/// axis is left untouched, and remainder rows along non-divisible axes are
/// dropped (with a warning on stderr). Repeated passes compose.
FieldDataset spatial_average(const FieldDataset& dataset, int factor, int passes = 1);

/// f(x,y) = (1-x)^2 + 100(x-y^2)^2 sampled on an nx×ny grid over
/// [lo,hi]^2 (default [-2,2]^2); p = 1.
FieldDataset generate_rosenbrock(int nx, int ny, double lo = -2.0, double hi = 2.0);

/// Decaying planar vortex lattice on [0,2π]² × uniform time samples:
///   u = -cos x sin y e^{-2νt}, v = sin x cos y e^{-2νt},
///   p̃ = -¼(cos 2x + cos 2y) e^{-4νt},
/// an exact solution of the dimensionless incompressible momentum and
/// continuity equations with Re = 1/ν. p = 3 (u, v, p̃); time is the last
/// coordinate.
FieldDataset generate_taylor_green(int nx, int ny, int nt, double t_end, double nu);

/// Closed-form sample of the same solution at one point.
Eigen::Vector3d taylor_green_value(double x, double y, double t, double nu);

struct BurgersOptions {
  double nu = 0.01 / M_PI;
  double t_end = 1.0;
  /// Maximum |Cole-Hopf - finite difference| allowed before the reference
  /// solution is trusted; generation aborts above it.
  double cross_check_tol = 1e-4;
};

/// Reference solution of u_t + u u_x = ν u_xx on [-1,1]×[0,t_end] with
/// u(x,0) = -sin πx and u(±1,t) = 0, sampled on an nx×nt grid. The values
/// come from a Cole-Hopf quadrature cross-validated against an independent
/// implicit finite-difference solve; see burgers.cpp.
FieldDataset generate_burgers(int nx, int nt, const BurgersOptions& opts = {});

/// The two Burgers oracles, exposed for the cross-validation tests.
Eigen::MatrixXd burgers_cole_hopf(const Eigen::VectorXd& xs, const Eigen::VectorXd& ts, double nu);
Eigen::MatrixXd burgers_finite_difference(const Eigen::VectorXd& xs, const Eigen::VectorXd& ts,
                                          double nu);

/// √(Σ‖v̂-v‖² / Σ‖v‖²) over the masked (velocity) components. Throws when
/// the masked truth is identically zero.
double relative_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                   const Eigen::VectorXd& mask);

/// √((1/K)Σ‖v̂-v‖²) over the masked components.
double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
            const Eigen::VectorXd& mask);

}  // namespace ngs
