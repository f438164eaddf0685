#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ngsplat/physics.hpp"
#include "support/test_support.hpp"

using namespace ngs;
using namespace ngs::testing;

namespace {

// Residual assembled only from finite differences of predict, fully
// independent of the analytic derivative path.
Eigen::VectorXd fd_residual(const GaussianField& f, const Eigen::VectorXd& x,
                            const PdeSpec& spec) {
  return residual_from_derivatives(predict(f, x), fd_jacobian(f, x), fd_second_diag(f, x), spec);
}

GaussianField constant_field(std::mt19937_64& rng, int q, int p, double value) {
  GaussianField f = random_field(rng, q, p, 6);
  Eigen::VectorXd theta = f.flatten();
  const int stride = f.params_per_gaussian();
  for (int i = 0; i < f.size(); ++i)
    theta.segment(i * stride + 2 * q, p).setConstant(value);
  f.apply(theta);
  return f;
}

}  // namespace

TEST_CASE("pde spec layout checks") {
  CHECK_THROWS_AS(PdeSpec::steady_ns_2d(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(PdeSpec::unsteady_ns(10.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(PdeSpec::burgers(0.0), std::invalid_argument);

  const PdeSpec steady = PdeSpec::steady_ns_2d(100.0);
  CHECK(steady.residual_count() == 3);
  CHECK_NOTHROW(steady.check_layout(2, 3));
  CHECK_THROWS_AS(steady.check_layout(3, 3), std::invalid_argument);
  CHECK_THROWS_AS(steady.check_layout(2, 2), std::invalid_argument);

  const PdeSpec unsteady3 = PdeSpec::unsteady_ns(50.0, 3);
  CHECK(unsteady3.residual_count() == 4);
  CHECK(unsteady3.time_axis() == 3);
  CHECK_NOTHROW(unsteady3.check_layout(4, 4));
  CHECK_THROWS_AS(unsteady3.check_layout(3, 4), std::invalid_argument);

  const PdeSpec burgers = PdeSpec::burgers(0.01);
  CHECK(burgers.residual_count() == 1);
  CHECK_NOTHROW(burgers.check_layout(2, 1));
  CHECK_THROWS_AS(burgers.check_layout(3, 1), std::invalid_argument);
}

TEST_CASE("constant fields have zero residuals") {
  std::mt19937_64 rng(211);
  GaussianField f2 = constant_field(rng, 2, 3, 0.8);
  const Eigen::VectorXd r_steady =
      residual(f2, random_point(rng, 2), PdeSpec::steady_ns_2d(100.0));
  CHECK(r_steady.cwiseAbs().maxCoeff() < 1e-12);

  GaussianField f3 = constant_field(rng, 3, 3, -0.4);
  const Eigen::VectorXd r_unsteady =
      residual(f3, random_point(rng, 3), PdeSpec::unsteady_ns(10.0, 2));
  CHECK(r_unsteady.cwiseAbs().maxCoeff() < 1e-12);

  GaussianField fb = constant_field(rng, 2, 1, 2.0);
  CHECK(residual(fb, random_point(rng, 2), PdeSpec::burgers(0.5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("continuity entry equals the velocity-trace of the jacobian") {
  std::mt19937_64 rng(223);
  for (int trial = 0; trial < 50; ++trial) {
    GaussianField f = random_field(rng, 2, 3, 7);
    const Eigen::VectorXd x = random_point(rng, 2);
    const PdeSpec spec = PdeSpec::steady_ns_2d(42.0);
    const Eigen::MatrixXd jac = spatial_jacobian(f, x);
    const Eigen::VectorXd r = residual(f, x, spec);
    CHECK(r[2] == doctest::Approx(jac(0, 0) + jac(1, 1)).epsilon(1e-12));
  }
}

TEST_CASE("analytic residuals match the finite-difference residual oracle") {
  std::mt19937_64 rng(227);
  for (int trial = 0; trial < 30; ++trial) {
    GaussianField f = random_field(rng, 3, 3, 8);
    const Eigen::VectorXd x = random_point(rng, 3, 0.3, 1.7);
    const PdeSpec spec = PdeSpec::unsteady_ns(25.0, 2);
    CHECK(rel_error(residual(f, x, spec), fd_residual(f, x, spec)) < 1e-3);
  }
  for (int trial = 0; trial < 30; ++trial) {
    GaussianField f = random_field(rng, 2, 1, 8);
    const Eigen::VectorXd x = random_point(rng, 2, 0.3, 1.7);
    const PdeSpec spec = PdeSpec::burgers(0.02);
    CHECK(rel_error(residual(f, x, spec), fd_residual(f, x, spec)) < 1e-3);
  }
}

TEST_CASE("data loss: interpolation, full mask, arithmetic") {
  std::mt19937_64 rng(229);
  GaussianField f = random_field(rng, 2, 1, 4);
  Eigen::MatrixXd coords = random_points(rng, 6, 2);
  Eigen::MatrixXd exact(6, 1);
  for (int r = 0; r < 6; ++r) exact(r, 0) = predict(f, coords.row(r).transpose())[0];
  CHECK(data_loss(f, coords, exact, Eigen::VectorXd::Ones(1)) < 1e-24);

  Eigen::MatrixXd wrong = exact.array() + 10.0;
  CHECK(data_loss(f, coords, wrong, Eigen::VectorXd::Zero(1)) == 0.0);

  // K=1, p=1, prediction 2, truth 0 → 4
  AxesGaussian g;
  g.mu = Eigen::VectorXd::Zero(1);
  g.log_h = Eigen::VectorXd::Zero(1);
  g.value = Eigen::VectorXd::Constant(1, 2.0);
  GaussianField single(1, 1, {g});
  CHECK(data_loss(single, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1),
                  Eigen::VectorXd::Ones(1)) == 4.0);
}

TEST_CASE("pde loss: compositional recomputation and arithmetic") {
  std::mt19937_64 rng(233);
  GaussianField f = random_field(rng, 2, 3, 6);
  const PdeSpec spec = PdeSpec::steady_ns_2d(10.0);
  const Eigen::MatrixXd pts = random_points(rng, 9, 2);
  double expected = 0.0;
  for (int r = 0; r < 9; ++r) expected += residual(f, pts.row(r).transpose(), spec).squaredNorm();
  expected /= 9.0;
  CHECK(pde_loss(f, pts, spec) == doctest::Approx(expected).epsilon(1e-15));

  // single point: loss is the squared residual norm
  CHECK(pde_loss(f, pts.topRows(1), spec) ==
        doctest::Approx(residual(f, pts.row(0).transpose(), spec).squaredNorm()).epsilon(1e-15));
}

TEST_CASE("total loss composition") {
  std::mt19937_64 rng(239);
  GaussianField f = random_field(rng, 2, 3, 6);
  const Eigen::MatrixXd coords = random_points(rng, 8, 2);
  const Eigen::MatrixXd values = random_points(rng, 8, 3, -1.0, 1.0);
  const Eigen::VectorXd mask = Eigen::VectorXd::Ones(3);
  const PdeSpec spec = PdeSpec::steady_ns_2d(10.0);

  const LossBreakdown zero = total_loss(f, coords, values, mask, spec, 0.0);
  CHECK(zero.total == zero.data);

  const LossBreakdown nopde = total_loss(f, coords, values, mask, PdeSpec::none(), 1.0);
  CHECK(nopde.pde == 0.0);

  const LossBreakdown both = total_loss(f, coords, values, mask, spec, 0.5);
  CHECK(both.total == doctest::Approx(both.data + 0.5 * both.pde).epsilon(1e-15));
}

TEST_CASE("nondimensional consistency: rescaled ingestion leaves residuals unchanged") {
  // A dataset expressed in physical units (L, U) loads to the same
  // dimensionless dataset, so any residual evaluated downstream agrees.
  std::mt19937_64 rng(241);
  const double L = 0.05, U = 2.5, nu = 2.0e-4;

  FieldDataset dimensionless;
  dimensionless.coords = random_points(rng, 16, 2, 0.0, 1.0);
  dimensionless.values = random_points(rng, 16, 3, -1.0, 1.0);
  dimensionless.mask = Eigen::VectorXd::Ones(3);

  FieldDataset physical = dimensionless;
  physical.coords *= L;
  physical.values.leftCols(2) *= U;
  physical.values.col(2) *= U * U;
  physical.physics.length_scale = L;
  physical.physics.velocity_scale = U;
  physical.physics.viscosity = nu;

  const auto path = std::filesystem::temp_directory_path() / "ngsplat_nondim.csv";
  save_dataset(physical, path);
  const FieldDataset loaded = load_dataset(path);
  std::filesystem::remove(path);

  CHECK(loaded.physics.reynolds.has_value());
  CHECK(*loaded.physics.reynolds == doctest::Approx(U * L / nu).epsilon(1e-12));

  GridInit spec;
  spec.count = 9;
  GaussianField fa = init_from_grid(dimensionless, spec);
  GaussianField fb = init_from_grid(loaded, spec);
  const PdeSpec pde = PdeSpec::steady_ns_2d(U * L / nu);
  for (int t = 0; t < 40; ++t) {
    const Eigen::VectorXd x = random_point(rng, 2, 0.1, 0.9);
    const Eigen::VectorXd ra = residual(fa, x, pde);
    const Eigen::VectorXd rb = residual(fb, x, pde);
    CHECK((ra - rb).norm() <= 1e-10 * std::max(1.0, ra.norm()));
  }
}
