#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ngsplat/rates.hpp"

using namespace ngs;

namespace {

RateExperiment base_experiment() {
  RateExperiment exp;
  exp.q = 1;
  exp.beta = 2;
  exp.noise_sigma = 0.1;
  exp.sample_counts = {128, 256, 512, 1024, 2048};
  exp.bandwidth_constant = 0.8;
  exp.trials = 10;
  exp.test_points = 40;
  exp.box_lo = 0.0;
  exp.box_hi = 2.0 * M_PI;
  exp.seed = 7;
  exp.target = [](const Eigen::VectorXd& x) { return std::sin(x[0]); };
  return exp;
}

}  // namespace

TEST_CASE("experiment validation") {
  RateExperiment exp = base_experiment();
  exp.sample_counts = {128, 256};
  CHECK_THROWS_AS(run_rate_experiment(exp), std::invalid_argument);
  exp = base_experiment();
  exp.sample_counts = {128, 128, 256};
  CHECK_THROWS_AS(run_rate_experiment(exp), std::invalid_argument);
  exp = base_experiment();
  exp.bandwidth_constant = 0.0;
  CHECK_THROWS_AS(run_rate_experiment(exp), std::invalid_argument);
}

TEST_CASE("constant target with no noise reports an exact fit") {
  RateExperiment exp = base_experiment();
  exp.noise_sigma = 0.0;
  exp.target = [](const Eigen::VectorXd&) { return 2.5; };
  const RateResult r = run_rate_experiment(exp);
  CHECK(r.exact_fit);
  for (double e : r.mean_rmse) CHECK(e <= 1e-14);
}

TEST_CASE("experiment is seed-reproducible") {
  const RateResult a = run_rate_experiment(base_experiment());
  const RateResult b = run_rate_experiment(base_experiment());
  REQUIRE(a.mean_rmse.size() == b.mean_rmse.size());
  for (size_t i = 0; i < a.mean_rmse.size(); ++i) CHECK(a.mean_rmse[i] == b.mean_rmse[i]);
  CHECK(a.slope == b.slope);
}

TEST_CASE("error decreases along the sample ladder") {
  const RateResult r = run_rate_experiment(base_experiment());
  int inversions = 0;
  for (size_t i = 1; i < r.mean_rmse.size(); ++i)
    if (r.mean_rmse[i] > r.mean_rmse[i - 1]) ++inversions;
  CHECK(inversions <= 1);
}

TEST_CASE("noise never helps: mean RMSE is monotone in sigma") {
  std::vector<double> sigmas = {0.0, 0.1, 0.3};
  std::vector<double> errs;
  for (double s : sigmas) {
    RateExperiment exp = base_experiment();
    exp.noise_sigma = s;
    exp.sample_counts = {128, 256, 512};
    exp.trials = 25;
    const RateResult r = run_rate_experiment(exp);
    double mean = 0.0;
    for (double e : r.mean_rmse) mean += e;
    errs.push_back(mean / r.mean_rmse.size());
  }
  CHECK(errs[0] <= errs[1]);
  CHECK(errs[1] <= errs[2]);
}

TEST_CASE("decay demo: collapse outside the support, bounded inside") {
  const std::vector<double> distances = {1.0, 5.0, 10.0, 20.0};
  const auto probes = run_unnormalized_decay_demo(12, 0.05, distances, 3);
  REQUIRE(probes.size() == 4);
  for (size_t i = 1; i < probes.size(); ++i)
    CHECK(probes[i].unnormalized_norm <= probes[i - 1].unnormalized_norm);
  // exp(-200) at 20σ: far below 1e-12 of the value scale (values ≤ 3).
  CHECK(probes.back().unnormalized_norm <= 1e-12 * 3.0);
  // normalized prediction stays within the drawn value range [1, 3]
  for (const auto& p : probes) {
    CHECK(p.normalized_norm >= 1.0 - 1e-12);
    CHECK(p.normalized_norm <= 3.0 + 1e-12);
  }
}
