#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "ngsplat/dataset.hpp"
#include "ngsplat/field.hpp"
#include "ngsplat/splat.hpp"
#include "support/test_support.hpp"

using namespace ngs;

namespace {

AxesGaussian make_gaussian(std::vector<double> mu, std::vector<double> log_h,
                           std::vector<double> value) {
  AxesGaussian g;
  g.mu = Eigen::Map<Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  g.log_h = Eigen::Map<Eigen::VectorXd>(log_h.data(), static_cast<Eigen::Index>(log_h.size()));
  g.value = Eigen::Map<Eigen::VectorXd>(value.data(), static_cast<Eigen::Index>(value.size()));
  return g;
}

}  // namespace

TEST_CASE("field construction validates dimensions") {
  GaussianField f(2, 3, {make_gaussian({0, 0}, {0, 0}, {1, 2, 3})});
  CHECK(f.size() == 1);
  CHECK(f.dim() == 2);
  CHECK(f.channels() == 3);

  CHECK_THROWS_WITH_AS(GaussianField(2, 3, {make_gaussian({0, 0, 0}, {0, 0}, {1, 2, 3})}),
                       doctest::Contains("gaussian 0"), std::invalid_argument);
  CHECK_THROWS_AS(GaussianField(2, 3, {}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianField(2, 3, {make_gaussian({0, 0}, {0, 0}, {1, 2, 3})}, -1.0),
                  std::invalid_argument);
}

TEST_CASE("field accepts the larger population sizes used in practice") {
  std::vector<AxesGaussian> gs;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 753; ++i) {
    Eigen::VectorXd mu(4), lh(4), v(4);
    for (int j = 0; j < 4; ++j) mu[j] = u(rng);
    lh.setZero();
    for (int a = 0; a < 4; ++a) v[a] = u(rng);
    gs.push_back(AxesGaussian{mu, lh, v});
  }
  GaussianField f(4, 4, std::move(gs));
  CHECK(f.size() == 753);
}

TEST_CASE("flatten length and round-trip identity") {
  GaussianField f(1, 1, {make_gaussian({0.5}, {-0.2}, {2.0})});
  CHECK(f.flatten().size() == 3);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianField field = ngs::testing::random_field(rng, 2, 3, 10, 1e-4);
    const Eigen::VectorXd theta = field.flatten();
    GaussianField copy = field;
    copy.apply(theta);
    CHECK(copy.flatten() == theta);  // bit-equal
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd x = ngs::testing::random_point(rng, 2);
      CHECK(predict(copy, x) == predict(field, x));
    }
  }
}

TEST_CASE("apply rejects wrong lengths and scale perturbation is local") {
  std::mt19937_64 rng(3);
  GaussianField f = ngs::testing::random_field(rng, 2, 2, 4);
  CHECK_THROWS_AS(f.apply(Eigen::VectorXd::Zero(5)), std::invalid_argument);

  Eigen::VectorXd theta = f.flatten();
  const int stride = f.params_per_gaussian();
  theta[1 * stride + 2] += std::log(2.0);  // gaussian 1, log_h axis 0
  GaussianField g = f;
  g.apply(theta);
  CHECK(g.scales()(1, 0) == doctest::Approx(2.0 * f.scales()(1, 0)).epsilon(1e-12));
  CHECK(g.scales()(0, 0) == f.scales()(0, 0));
  CHECK(g.scales()(1, 1) == f.scales()(1, 1));
  CHECK(g.centers() == f.centers());
}

TEST_CASE("grid init covers the bounding box with spacing-matched bandwidths") {
  // 20×20 over the unit square: spacing 1/19 on both axes.
  FieldDataset ds;
  ds.coords.resize(4, 2);
  ds.coords << 0, 0, 1, 0, 0, 1, 1, 1;
  ds.values.resize(4, 1);
  ds.values << 1, 2, 3, 4;
  ds.mask = Eigen::VectorXd::Ones(1);

  GridInit spec;
  spec.count = 400;
  GaussianField f = init_from_grid(ds, spec);
  CHECK(f.size() == 400);
  CHECK(f.scales()(0, 0) == doctest::Approx(1.0 / 19.0).epsilon(1e-12));
  CHECK(f.scales()(0, 1) == doctest::Approx(1.0 / 19.0).epsilon(1e-12));
  CHECK(f.centers().colwise().minCoeff().transpose().isApprox(Eigen::Vector2d(0, 0), 1e-12));
  CHECK(f.centers().colwise().maxCoeff().transpose().isApprox(Eigen::Vector2d(1, 1), 1e-12));
}

TEST_CASE("grid init: single point dataset and value constancy") {
  FieldDataset single;
  single.coords.resize(1, 2);
  single.coords << 0.3, -0.7;
  single.values.resize(1, 2);
  single.values << 5.0, 6.0;
  single.mask = Eigen::VectorXd::Ones(2);
  GridInit one;
  one.count = 1;
  GaussianField f = init_from_grid(single, one);
  CHECK(f.size() == 1);
  CHECK(f.centers().row(0).transpose().isApprox(Eigen::Vector2d(0.3, -0.7)));
  CHECK(f.values().row(0).transpose().isApprox(Eigen::Vector2d(5.0, 6.0)));

  // Constant-valued dataset: every initialized value carries the constant.
  std::mt19937_64 rng(5);
  FieldDataset constant;
  constant.coords = ngs::testing::random_points(rng, 40, 3);
  constant.values = Eigen::MatrixXd::Constant(40, 2, 3.25);
  constant.mask = Eigen::VectorXd::Ones(2);
  GridInit spec;
  spec.count = 27;
  GaussianField g = init_from_grid(constant, spec);
  CHECK((g.values().array() == 3.25).all());
}

TEST_CASE("grid init: nearest-point values match the generating function") {
  std::mt19937_64 rng(17);
  FieldDataset ds;
  ds.coords = ngs::testing::random_points(rng, 60, 2);
  ds.values.resize(60, 1);
  for (int r = 0; r < 60; ++r)
    ds.values(r, 0) = std::sin(ds.coords(r, 0)) + ds.coords(r, 1);
  ds.mask = Eigen::VectorXd::Ones(1);
  GridInit spec;
  spec.count = 25;
  GaussianField f = init_from_grid(ds, spec);
  for (int i = 0; i < f.size(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int r = 0; r < ds.count(); ++r) {
      const double d = (ds.coords.row(r) - f.centers().row(i)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = r;
      }
    }
    CHECK(f.values()(i, 0) == ds.values(best, 0));
  }
}

TEST_CASE("grid init covers every dataset point within one spacing") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const int q = 1 + static_cast<int>(rng() % 3);
    FieldDataset ds;
    ds.coords = ngs::testing::random_points(rng, 50, q, -1.0, 3.0);
    ds.values = Eigen::MatrixXd::Zero(50, 1);
    ds.mask = Eigen::VectorXd::Ones(1);
    GridInit spec;
    spec.count = 1 << (2 * q);
    GaussianField f = init_from_grid(ds, spec);
    const Eigen::VectorXd lo = f.centers().colwise().minCoeff().transpose();
    const Eigen::VectorXd hi = f.centers().colwise().maxCoeff().transpose();
    for (int r = 0; r < ds.count(); ++r)
      for (int j = 0; j < q; ++j) {
        const double pad = std::max(f.scales().col(j).maxCoeff(), 1e-9);
        CHECK(ds.coords(r, j) >= lo[j] - pad);
        CHECK(ds.coords(r, j) <= hi[j] + pad);
      }
  }
}

TEST_CASE("strided init takes every k-th point in row-major order") {
  FieldDataset ds;
  ds.coords.resize(10, 1);
  ds.values.resize(10, 1);
  for (int i = 0; i < 10; ++i) {
    ds.coords(i, 0) = i;
    ds.values(i, 0) = 10.0 * i;
  }
  ds.mask = Eigen::VectorXd::Ones(1);
  GridInit spec;
  spec.stride = 3;
  GaussianField f = init_from_grid(ds, spec);
  CHECK(f.size() == 4);  // points 0, 3, 6, 9
  CHECK(f.centers()(1, 0) == 3.0);
  CHECK(f.values()(3, 0) == 90.0);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  std::mt19937_64 rng(29);
  GaussianField f = ngs::testing::random_field(rng, 3, 2, 17, 1e-4);
  const auto path = std::filesystem::temp_directory_path() / "ngsplat_field_test.txt";
  save_field(f, path);
  GaussianField g = load_field(path);
  CHECK(g.size() == f.size());
  CHECK(g.z_threshold() == f.z_threshold());
  CHECK(g.flatten() == f.flatten());
  std::filesystem::remove(path);
}
