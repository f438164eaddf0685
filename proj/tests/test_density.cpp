#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ngsplat/density.hpp"
#include "support/test_support.hpp"

using namespace ngs;
using namespace ngs::testing;

namespace {

AxesGaussian g1d(double mu, double h, double v) {
  AxesGaussian g;
  g.mu = Eigen::VectorXd::Constant(1, mu);
  g.log_h = Eigen::VectorXd::Constant(1, std::log(h));
  g.value = Eigen::VectorXd::Constant(1, v);
  return g;
}

}  // namespace

TEST_CASE("gaussian errors: single point, uniform loss, zero loss") {
  // K=1: every Gaussian with nonzero influence gets ε = L₁.
  GaussianField f(1, 1, {g1d(0, 1, 1), g1d(0.5, 1, 2)}, 0.0);
  Eigen::MatrixXd one_point(1, 1);
  one_point << 0.2;
  const InfluenceMatrix m1 = influence_matrix(f, one_point);
  Eigen::VectorXd losses1(1);
  losses1 << 3.5;
  const Eigen::VectorXd e1 = gaussian_errors(m1, losses1);
  CHECK(e1[0] == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(e1[1] == doctest::Approx(3.5).epsilon(1e-14));

  // Uniform loss c: ε_i = c·‖z_i‖₁/‖z_i‖₂ — frozen from a fixed matrix
  // evaluated by hand: columns (1, .25, 0) and (.5, 1, .125).
  InfluenceMatrix fixed(3, 2);
  fixed.mutable_row(0) = {{0, 1.0}, {1, 0.5}};
  fixed.mutable_row(1) = {{0, 0.25}, {1, 1.0}};
  fixed.mutable_row(2) = {{1, 0.125}};
  const Eigen::VectorXd eu = gaussian_errors(fixed, Eigen::VectorXd::Constant(3, 0.7));
  CHECK(eu[0] == doctest::Approx(0.8488746876271224).epsilon(1e-12));
  CHECK(eu[1] == doctest::Approx(1.0111111111111111).epsilon(1e-12));

  // Zero losses → all ε = 0; zero column → ε = 0.
  InfluenceMatrix with_empty(2, 2);
  with_empty.mutable_row(0) = {{0, 0.8}};
  with_empty.mutable_row(1) = {{0, 0.4}};
  const Eigen::VectorXd ez = gaussian_errors(with_empty, Eigen::VectorXd::Zero(2));
  CHECK(ez.isZero(0.0));
  const Eigen::VectorXd ecol = gaussian_errors(with_empty, Eigen::VectorXd::Ones(2));
  CHECK(ecol[1] == 0.0);
}

TEST_CASE("densify selection by median multiple") {
  DensifyConfig cfg;
  Eigen::VectorXd equal = Eigen::VectorXd::Constant(4, 2.0);
  CHECK(select_densify(equal, cfg).empty());

  Eigen::VectorXd skewed(4);
  skewed << 1, 1, 1, 10;
  const auto sel = select_densify(skewed, cfg);
  REQUIRE(sel.size() == 1);
  CHECK(sel[0] == 3);

  Eigen::VectorXd single = Eigen::VectorXd::Constant(1, 5.0);
  CHECK(select_densify(single, cfg).empty());
}

TEST_CASE("densify: empty selection, clone, split") {
  std::mt19937_64 rng(307);
  GaussianField f = random_field(rng, 2, 1, 6, 1e-4);
  DensifyConfig cfg;
  const Eigen::MatrixXd no_grad = Eigen::MatrixXd::Zero(6, 2);

  const DensityUpdate unchanged = densify(f, {}, no_grad, 0.01, cfg, 1);
  CHECK(unchanged.field.size() == 6);
  CHECK(unchanged.field.flatten() == f.flatten());

  // Force one clone: pick the Gaussian with the smallest max-scale and
  // give it a large position gradient.
  Eigen::VectorXd max_scales(6);
  for (int i = 0; i < 6; ++i) max_scales[i] = f.scales().row(i).maxCoeff();
  int smallest = 0, largest = 0;
  max_scales.minCoeff(&smallest);
  max_scales.maxCoeff(&largest);

  Eigen::MatrixXd grads = Eigen::MatrixXd::Zero(6, 2);
  grads.row(smallest) << 1.0, -2.0;
  const DensityUpdate cloned = densify(f, {smallest}, grads, 0.01, cfg, 2);
  CHECK(cloned.clones == 1);
  CHECK(cloned.splits == 0);
  CHECK(cloned.field.size() == 7);
  // Child value equals parent value; center moved one gradient step.
  CHECK(cloned.field.values().row(6) == f.values().row(smallest));
  CHECK(cloned.field.centers()(6, 0) ==
        doctest::Approx(f.centers()(smallest, 0) - 0.01 * 1.0).epsilon(1e-14));
  CHECK(cloned.carried_from[6] == -1);
  CHECK(cloned.carried_from[smallest] == smallest);

  // Force one split on the widest Gaussian.
  grads.setZero();
  grads.row(largest) << 0.5, 0.5;
  const DensityUpdate split = densify(f, {largest}, grads, 0.01, cfg, 3);
  CHECK(split.splits == 1);
  CHECK(split.field.size() == 7);  // -1 parent +2 children
  // Children scales are half the parent's; they sit inside the 1σ box.
  for (int c = 5; c < 7; ++c) {
    CHECK(split.field.scales().row(c).isApprox(0.5 * f.scales().row(largest), 1e-12));
    for (int j = 0; j < 2; ++j) {
      CHECK(split.field.centers()(c, j) >=
            f.centers()(largest, j) - f.scales()(largest, j) - 1e-12);
      CHECK(split.field.centers()(c, j) <=
            f.centers()(largest, j) + f.scales()(largest, j) + 1e-12);
    }
    CHECK(split.carried_from[c] == -1);
  }

  // Below the gradient threshold nothing acts.
  grads.row(largest) << 1e-6, 1e-6;
  const DensityUpdate idle = densify(f, {largest}, grads, 0.01, cfg, 4);
  CHECK(idle.field.size() == 6);
}

TEST_CASE("connected components") {
  const auto singletons = connected_components(4, {});
  CHECK(singletons.size() == 4);

  const auto chain = connected_components(3, {{0, 1}, {1, 2}});
  REQUIRE(chain.size() == 1);
  CHECK(chain[0] == std::vector<int>{0, 1, 2});

  const auto two = connected_components(5, {{0, 1}, {2, 3}});
  REQUIRE(two.size() == 3);
  CHECK(two[0] == std::vector<int>{0, 1});
  CHECK(two[1] == std::vector<int>{2, 3});
  CHECK(two[2] == std::vector<int>{4});

  CHECK_THROWS_AS(connected_components(2, {{0, 5}}), std::invalid_argument);
}

TEST_CASE("merge: duplicates collapse and predictions survive") {
  // Exactly two identical Gaussians: merged into one carrying the shared
  // value; predictions unchanged at every training point.
  GaussianField dup(1, 1, {g1d(1.0, 0.5, 2.5), g1d(1.0, 0.5, 2.5)}, 1e-4);
  Eigen::MatrixXd pts = Eigen::VectorXd::LinSpaced(21, 0.0, 2.0);
  DensifyConfig cfg;
  const DensityUpdate merged = merge(dup, pts, cfg);
  CHECK(merged.field.size() == 1);
  CHECK(merged.merged_clusters == 1);
  for (int r = 0; r < pts.rows(); ++r) {
    const Eigen::VectorXd x = pts.row(r).transpose();
    CHECK(std::abs(predict(merged.field, x)[0] - predict(dup, x)[0]) <= 1e-12);
  }

  // Disjoint supports: cosine 0, nothing merges.
  GaussianField apart(1, 1, {g1d(0.0, 0.05, 1.0), g1d(10.0, 0.05, 2.0)}, 1e-4);
  Eigen::MatrixXd pts2(4, 1);
  pts2 << -0.1, 0.1, 9.9, 10.1;
  const DensityUpdate kept = merge(apart, pts2, cfg);
  CHECK(kept.field.size() == 2);
  CHECK(kept.field.flatten() == apart.flatten());
  CHECK(kept.carried_from == std::vector<int>{0, 1});

  // Three co-located Gaussians collapse to one.
  GaussianField tri(1, 1, {g1d(0.5, 0.4, 1.0), g1d(0.5, 0.4, 2.0), g1d(0.5, 0.4, 3.0)}, 1e-4);
  const DensityUpdate tri_merged = merge(tri, pts, cfg);
  CHECK(tri_merged.field.size() == 1);
  // Merged parameters: mean center, mean scale, re-predicted value.
  CHECK(tri_merged.field.centers()(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tri_merged.field.scales()(0, 0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(tri_merged.field.values()(0, 0) ==
        doctest::Approx(predict(tri, Eigen::VectorXd::Constant(1, 0.5))[0]).epsilon(1e-12));
}

TEST_CASE("merge is idempotent and never grows the field") {
  std::mt19937_64 rng(311);
  DensifyConfig cfg;
  for (int trial = 0; trial < 25; ++trial) {
    GaussianField f = random_field(rng, 2, 2, 12, 1e-4);
    const Eigen::MatrixXd pts = random_points(rng, 30, 2);
    const DensityUpdate once = merge(f, pts, cfg);
    CHECK(once.field.size() <= f.size());
    const DensityUpdate twice = merge(once.field, pts, cfg);
    CHECK(twice.field.size() == once.field.size());
    CHECK(twice.field.flatten() == once.field.flatten());
  }
}

TEST_CASE("density passes preserve field invariants") {
  std::mt19937_64 rng(313);
  DensifyConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    GaussianField f = random_field(rng, 2, 1, 10, 1e-4);
    const Eigen::MatrixXd pts = random_points(rng, 25, 2);
    Eigen::MatrixXd grads = Eigen::MatrixXd::Random(10, 2) * 0.01;
    std::vector<int> all(10);
    std::iota(all.begin(), all.end(), 0);
    const DensityUpdate d = densify(f, all, grads, 0.01, cfg, trial);
    CHECK(d.field.size() >= f.size());
    CHECK((d.field.scales().array() > 0.0).all());
    const DensityUpdate m = merge(d.field, pts, cfg);
    CHECK(m.field.size() <= d.field.size());
    CHECK((m.field.scales().array() > 0.0).all());
    CHECK(m.field.dim() == 2);
    CHECK(m.field.channels() == 1);
  }
}

TEST_CASE("merge keeps far-away gaussians while collapsing a duplicate pair") {
  // Pair at the origin plus two isolated Gaussians beyond the cutoff.
  GaussianField f(1, 1,
                  {g1d(0.0, 0.3, 1.0), g1d(0.0, 0.3, 1.0), g1d(50.0, 0.3, 2.0),
                   g1d(-50.0, 0.3, 3.0)},
                  1e-4);
  Eigen::MatrixXd pts(6, 1);
  pts << -0.5, 0.0, 0.5, 50.0, -50.0, 49.5;
  DensifyConfig cfg;
  const DensityUpdate m = merge(f, pts, cfg);
  CHECK(m.field.size() == 3);
  for (int r = 0; r < pts.rows(); ++r) {
    const Eigen::VectorXd x = pts.row(r).transpose();
    CHECK(std::abs(predict(m.field, x)[0] - predict(f, x)[0]) <= 1e-12);
  }
  // Order: merged pair (min index 0), then the isolated ones in index order.
  CHECK(m.field.centers()(0, 0) == 0.0);
  CHECK(m.field.centers()(1, 0) == 50.0);
  CHECK(m.field.centers()(2, 0) == -50.0);
}
