#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "ngsplat/field.hpp"

namespace ngs::detail {

// Retained influences of a field at one query point. The z-threshold is a
// hard gate shared by prediction, derivatives and influence matrices, so
// train-time and test-time functions coincide. Fallbacks keep prediction
// total: if everything is gated, renormalize over the raw values; if even
// the raw sum underflows, collapse to the nearest center.
struct Activation {
  std::vector<int> idx;
  std::vector<double> z;
  double sum = 0.0;
  bool onehot = false;  // nearest-center fallback
  int onehot_index = -1;
};

inline Activation activate(const GaussianField& field, const Eigen::VectorXd& x) {
  const int n = field.size();
  const int q = field.dim();
  const auto& mu = field.centers();
  const auto& u = field.inv_scales_sq();
  const double thresh = field.z_threshold();
  const double log_thresh =
      thresh > 0.0 ? std::log(thresh) : -std::numeric_limits<double>::infinity();

  Activation act;
  act.idx.reserve(16);
  act.z.reserve(16);
  for (int i = 0; i < n; ++i) {
    double e = 0.0;
    for (int j = 0; j < q; ++j) {
      const double d = x[j] - mu(i, j);
      e -= 0.5 * d * d * u(i, j);
    }
    if (e < log_thresh) continue;
    const double z = std::exp(e);
    if (z == 0.0) continue;
    act.idx.push_back(i);
    act.z.push_back(z);
    act.sum += z;
  }
  if (!act.idx.empty() && act.sum >= 1e-300) return act;

  // Everything gated: ignore the cutoff.
  act.idx.clear();
  act.z.clear();
  act.sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double e = 0.0;
    for (int j = 0; j < q; ++j) {
      const double d = x[j] - mu(i, j);
      e -= 0.5 * d * d * u(i, j);
    }
    const double z = std::exp(e);
    if (z == 0.0) continue;
    act.idx.push_back(i);
    act.z.push_back(z);
    act.sum += z;
  }
  if (!act.idx.empty() && act.sum >= 1e-300) return act;

  act.idx.clear();
  act.z.clear();
  act.sum = 0.0;
  act.onehot = true;
  act.onehot_index = field.nearest_center(x);
  return act;
}

}  // namespace ngs::detail
