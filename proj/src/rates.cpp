#include "ngsplat/rates.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ngsplat/parallel.hpp"
#include "ngsplat/splat.hpp"

namespace ngs {

void RateExperiment::validate() const {
  if (q < 1) throw std::invalid_argument("rates: q must be >= 1");
  if (beta < 1) throw std::invalid_argument("rates: beta must be >= 1");
  if (noise_sigma < 0.0) throw std::invalid_argument("rates: noise sigma must be >= 0");
  if (sample_counts.size() < 3)
    throw std::invalid_argument("rates: need at least 3 sample counts to fit a slope");
  for (size_t i = 1; i < sample_counts.size(); ++i)
    if (sample_counts[i] <= sample_counts[i - 1])
      throw std::invalid_argument("rates: sample counts must be strictly increasing");
  if (sample_counts.front() < 2) throw std::invalid_argument("rates: sample counts must be >= 2");
  if (!(bandwidth_constant > 0.0))
    throw std::invalid_argument("rates: bandwidth constant must be positive");
  if (trials < 1) throw std::invalid_argument("rates: trials must be >= 1");
  if (test_points < 1) throw std::invalid_argument("rates: test points must be >= 1");
  if (!(box_hi > box_lo)) throw std::invalid_argument("rates: box must be non-degenerate");
  if (!target) throw std::invalid_argument("rates: target function must be set");
}

namespace {

// One draw: i.i.d. centers, values = target + noise, isotropic bandwidth
// h(N) = c·N^{-1/(2β+q)}, RMSE over the fixed interior test points.
double one_trial(const RateExperiment& exp, int n, std::uint64_t seed,
                 const Eigen::MatrixXd& tests) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(exp.box_lo, exp.box_hi);
  std::normal_distribution<double> noise(0.0, exp.noise_sigma);

  const double h =
      exp.bandwidth_constant * std::pow(static_cast<double>(n), -1.0 / (2.0 * exp.beta + exp.q));
  const Eigen::VectorXd log_h = Eigen::VectorXd::Constant(exp.q, std::log(h));

  std::vector<AxesGaussian> gaussians;
  gaussians.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd mu(exp.q);
    for (int j = 0; j < exp.q; ++j) mu[j] = box(rng);
    Eigen::VectorXd value(1);
    value[0] = exp.target(mu) + (exp.noise_sigma > 0.0 ? noise(rng) : 0.0);
    gaussians.push_back(AxesGaussian{std::move(mu), log_h, std::move(value)});
  }
  GaussianField field(exp.q, 1, std::move(gaussians), 0.0);

  double acc = 0.0;
  for (Eigen::Index r = 0; r < tests.rows(); ++r) {
    const Eigen::VectorXd x = tests.row(r).transpose();
    const double err = predict(field, x)[0] - exp.target(x);
    acc += err * err;
  }
  return std::sqrt(acc / static_cast<double>(tests.rows()));
}

}  // namespace

RateResult run_rate_experiment(const RateExperiment& exp) {
  exp.validate();

  // Fixed interior test points: 10% margin from the box boundary.
  const double margin = 0.1 * (exp.box_hi - exp.box_lo);
  const double lo = exp.box_lo + margin;
  const double hi = exp.box_hi - margin;
  std::mt19937_64 test_rng(split_seed(exp.seed, 0x7e57ULL));
  std::uniform_real_distribution<double> interior(lo, hi);
  Eigen::MatrixXd tests(exp.test_points, exp.q);
  for (int r = 0; r < exp.test_points; ++r)
    for (int j = 0; j < exp.q; ++j) tests(r, j) = interior(test_rng);

  RateResult out;
  out.sample_counts = exp.sample_counts;
  out.mean_rmse.resize(exp.sample_counts.size());

  for (size_t ni = 0; ni < exp.sample_counts.size(); ++ni) {
    const int n = exp.sample_counts[ni];
    std::vector<double> rmses(static_cast<size_t>(exp.trials), 0.0);
    for_chunks(exp.trials, 0, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
      for (std::int64_t t = begin; t < end; ++t)
        rmses[static_cast<size_t>(t)] =
            one_trial(exp, n, split_seed(exp.seed, (ni + 1) * 1000003ULL + t), tests);
    });
    double acc = 0.0;
    for (double v : rmses) acc += v;
    out.mean_rmse[ni] = acc / exp.trials;
  }

  // Least-squares slope of log RMSE vs log N, with its standard error.
  const size_t m = out.mean_rmse.size();
  bool all_tiny = true;
  for (double v : out.mean_rmse)
    if (v > 1e-14) all_tiny = false;
  if (all_tiny) {
    out.exact_fit = true;
    return out;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < m; ++i) {
    const double x = std::log(static_cast<double>(out.sample_counts[i]));
    const double y = std::log(out.mean_rmse[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = m * sxx - sx * sx;
  out.slope = (m * sxy - sx * sy) / denom;
  const double intercept = (sy - out.slope * sx) / m;
  double ss = 0.0;
  for (size_t i = 0; i < m; ++i) {
    const double x = std::log(static_cast<double>(out.sample_counts[i]));
    const double resid = std::log(out.mean_rmse[i]) - (intercept + out.slope * x);
    ss += resid * resid;
  }
  if (m > 2) out.slope_stderr = std::sqrt(ss / (m - 2) / (sxx - sx * sx / m));
  return out;
}

std::vector<DecayProbe> run_unnormalized_decay_demo(int n_gaussians, double sigma,
                                                    const std::vector<double>& probe_distances,
                                                    std::uint64_t seed) {
  if (n_gaussians < 1) throw std::invalid_argument("decay demo: need at least one Gaussian");
  if (!(sigma > 0.0)) throw std::invalid_argument("decay demo: sigma must be positive");
  for (size_t i = 0; i < probe_distances.size(); ++i) {
    if (probe_distances[i] <= 0.0)
      throw std::invalid_argument("decay demo: probe distances must be positive");
    if (i > 0 && probe_distances[i] <= probe_distances[i - 1])
      throw std::invalid_argument("decay demo: probe distances must be increasing");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  std::uniform_real_distribution<double> val(1.0, 3.0);
  std::vector<AxesGaussian> gaussians;
  double support_hi = 0.0;
  for (int i = 0; i < n_gaussians; ++i) {
    Eigen::VectorXd mu(1), log_h(1), v(1);
    mu[0] = pos(rng);
    support_hi = std::max(support_hi, mu[0]);
    log_h[0] = std::log(sigma);
    v[0] = val(rng);
    gaussians.push_back(AxesGaussian{mu, log_h, v});
  }
  GaussianField field(1, 1, std::move(gaussians), 0.0);

  std::vector<DecayProbe> out;
  out.reserve(probe_distances.size());
  for (double d : probe_distances) {
    Eigen::VectorXd x(1);
    x[0] = support_hi + d * sigma;
    DecayProbe probe;
    probe.distance = d;
    probe.unnormalized_norm = predict_unnormalized(field, x).norm();
    probe.normalized_norm = predict(field, x).norm();
    out.push_back(probe);
  }
  return out;
}

}  // namespace ngs
