#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ngsplat/calculus.hpp"
#include "ngsplat/dataset.hpp"
#include "ngsplat/field.hpp"
#include "ngsplat/physics.hpp"
#include "ngsplat/splat.hpp"

namespace ngs::testing {

// Random overlapping fields: centers in [0, 2]^q, bandwidths in [0.3, 1],
// values in [-1, 1]. z_threshold defaults to zero so finite-difference
// comparisons never straddle the influence gate.
inline GaussianField random_field(std::mt19937_64& rng, int q, int p, int n,
                                  double z_threshold = 0.0) {
  std::uniform_real_distribution<double> pos(0.0, 2.0);
  std::uniform_real_distribution<double> band(0.3, 1.0);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::vector<AxesGaussian> gs;
  gs.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd mu(q), lh(q), v(p);
    for (int j = 0; j < q; ++j) mu[j] = pos(rng);
    for (int j = 0; j < q; ++j) lh[j] = std::log(band(rng));
    for (int a = 0; a < p; ++a) v[a] = val(rng);
    gs.push_back(AxesGaussian{mu, lh, v});
  }
  return GaussianField(q, p, std::move(gs), z_threshold);
}

inline Eigen::VectorXd random_point(std::mt19937_64& rng, int q, double lo = 0.0,
                                    double hi = 2.0) {
  std::uniform_real_distribution<double> pos(lo, hi);
  Eigen::VectorXd x(q);
  for (int j = 0; j < q; ++j) x[j] = pos(rng);
  return x;
}

inline Eigen::MatrixXd random_points(std::mt19937_64& rng, int k, int q, double lo = 0.0,
                                     double hi = 2.0) {
  Eigen::MatrixXd out(k, q);
  for (int r = 0; r < k; ++r) out.row(r) = random_point(rng, q, lo, hi).transpose();
  return out;
}

// ---- finite-difference oracles (test-only; independent of the closed
// forms they check) ----

inline Eigen::MatrixXd fd_jacobian(const GaussianField& f, const Eigen::VectorXd& x,
                                   double step = 1e-5) {
  Eigen::MatrixXd out(f.channels(), f.dim());
  for (int j = 0; j < f.dim(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    out.col(j) = (predict(f, xp) - predict(f, xm)) / (2.0 * step);
  }
  return out;
}

inline Eigen::MatrixXd fd_second_diag(const GaussianField& f, const Eigen::VectorXd& x,
                                      double rel_step = 1e-2) {
  // Central second difference with one Richardson extrapolation; the step
  // scales with the smallest local bandwidth so the truncation stays well
  // under the comparison tolerance.
  Eigen::MatrixXd out(f.channels(), f.dim());
  const Eigen::VectorXd v0 = predict(f, x);
  for (int j = 0; j < f.dim(); ++j) {
    const double step = rel_step * f.scales().col(j).minCoeff();
    auto second = [&](double h) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      return ((predict(f, xp) - 2.0 * v0 + predict(f, xm)) / (h * h)).eval();
    };
    out.col(j) = (4.0 * second(step / 2.0) - second(step)) / 3.0;
  }
  return out;
}

inline double loss_value(const GaussianField& f, const Eigen::MatrixXd& coords,
                         const Eigen::MatrixXd& values, const Eigen::VectorXd& mask,
                         const PdeSpec& spec, double lambda) {
  return total_loss(f, coords, values, mask, spec, lambda).total;
}

inline Eigen::VectorXd fd_param_gradient(const GaussianField& f, const Eigen::MatrixXd& coords,
                                         const Eigen::MatrixXd& values,
                                         const Eigen::VectorXd& mask, const PdeSpec& spec,
                                         double lambda, double step = 1e-5) {
  const Eigen::VectorXd theta = f.flatten();
  Eigen::VectorXd grad(theta.size());
  GaussianField work = f;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(theta[i]));
    Eigen::VectorXd tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    work.apply(tp);
    const double lp = loss_value(work, coords, values, mask, spec, lambda);
    work.apply(tm);
    const double lm = loss_value(work, coords, values, mask, spec, lambda);
    grad[i] = (lp - lm) / (2.0 * h);
  }
  return grad;
}

inline double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(b.norm(), 1e-12);
  return (a - b).norm() / scale;
}

inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.norm(), 1e-12);
  return (a - b).norm() / scale;
}

}  // namespace ngs::testing
