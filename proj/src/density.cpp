#include "ngsplat/density.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ngs {

void DensifyConfig::validate() const {
  if (!(densify_threshold > 0.0))
    throw std::invalid_argument("density: densify_threshold must be positive");
  if (!(split_clone_threshold > 0.0))
    throw std::invalid_argument("density: split_clone_threshold must be positive");
  if (!(merge_threshold > 0.0) || merge_threshold > 1.0)
    throw std::invalid_argument("density: merge_threshold must lie in (0, 1]");
  if (interval < 1) throw std::invalid_argument("density: interval must be >= 1");
}

Eigen::VectorXd gaussian_errors(const InfluenceMatrix& influence,
                                const Eigen::VectorXd& point_losses) {
  if (point_losses.size() != influence.rows())
    throw std::invalid_argument("gaussian_errors: loss vector length mismatch");
  const Eigen::VectorXd weighted = influence.column_weighted_sums(point_losses);
  const Eigen::VectorXd norms = influence.column_norms();
  Eigen::VectorXd errors = Eigen::VectorXd::Zero(influence.cols());
  for (int i = 0; i < errors.size(); ++i)
    if (norms[i] > 0.0) errors[i] = weighted[i] / norms[i];
  return errors;
}

namespace {

double median(Eigen::VectorXd v) {
  const Eigen::Index n = v.size();
  std::sort(v.data(), v.data() + n);
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<int> select_densify(const Eigen::VectorXd& errors, const DensifyConfig& cfg) {
  cfg.validate();
  if (errors.size() < 1) throw std::invalid_argument("select_densify: empty error vector");
  const double cut = median(errors) * cfg.densify_threshold;
  std::vector<int> out;
  for (int i = 0; i < errors.size(); ++i)
    if (errors[i] > cut) out.push_back(i);
  return out;
}

DensityUpdate densify(const GaussianField& field, const std::vector<int>& indices,
                      const Eigen::MatrixXd& avg_position_grad, double clone_step,
                      const DensifyConfig& cfg, std::uint64_t rng_seed) {
  cfg.validate();
  const int n = field.size();
  const int q = field.dim();
  if (avg_position_grad.rows() != n || avg_position_grad.cols() != q)
    throw std::invalid_argument("densify: position gradient shape mismatch");
  for (int i : indices)
    if (i < 0 || i >= n) throw std::invalid_argument("densify: index out of range");

  // Field median of per-Gaussian largest axis scales; the split/clone
  // decision is relative to it.
  Eigen::VectorXd max_scales(n);
  for (int i = 0; i < n; ++i) max_scales[i] = field.scales().row(i).maxCoeff();
  const double median_scale = median(max_scales);

  std::vector<int> selected = indices;
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

  std::vector<int> clone_parents, split_parents;
  for (int i : selected) {
    if (avg_position_grad.row(i).norm() <= cfg.split_clone_threshold) continue;
    if (max_scales[i] < median_scale)
      clone_parents.push_back(i);
    else
      split_parents.push_back(i);
  }

  std::vector<bool> removed(n, false);
  for (int i : split_parents) removed[i] = true;

  std::vector<AxesGaussian> out;
  std::vector<int> carried;
  out.reserve(static_cast<size_t>(n + clone_parents.size() + split_parents.size()));
  for (int i = 0; i < n; ++i) {
    if (removed[i]) continue;
    out.push_back(field.gaussian(i));
    carried.push_back(i);
  }
  for (int i : clone_parents) {
    AxesGaussian child = field.gaussian(i);
    child.mu -= clone_step * avg_position_grad.row(i).transpose();
    out.push_back(std::move(child));
    carried.push_back(-1);
  }
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i : split_parents) {
    const AxesGaussian parent = field.gaussian(i);
    for (int child_idx = 0; child_idx < 2; ++child_idx) {
      AxesGaussian child = parent;
      for (int j = 0; j < q; ++j)
        child.mu[j] += unit(rng) * field.scales()(i, j);
      child.log_h.array() -= std::log(2.0);
      out.push_back(std::move(child));
      carried.push_back(-1);
    }
  }

  DensityUpdate update{GaussianField(q, field.channels(), std::move(out), field.z_threshold()),
                       std::move(carried), static_cast<int>(clone_parents.size()),
                       static_cast<int>(split_parents.size()), 0};
  return update;
}

std::vector<std::vector<int>> connected_components(
    int n, const std::vector<std::pair<int, int>>& edges) {
  if (n < 0) throw std::invalid_argument("connected_components: negative node count");
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= n || b < 0 || b >= n)
      throw std::invalid_argument("connected_components: edge endpoint out of range");
    const int ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::vector<int>> clusters(n);
  for (int i = 0; i < n; ++i) clusters[find(i)].push_back(i);
  std::vector<std::vector<int>> out;
  for (auto& c : clusters)
    if (!c.empty()) out.push_back(std::move(c));
  // Roots are minima of their clusters, so this order is by minimum member.
  return out;
}

DensityUpdate merge(const GaussianField& field, const Eigen::MatrixXd& training_points,
                    const DensifyConfig& cfg, int threads) {
  cfg.validate();
  if (training_points.rows() < 1)
    throw std::invalid_argument("merge: training points must be non-empty");
  const int n = field.size();
  const int q = field.dim();

  const InfluenceMatrix influence = influence_matrix(field, training_points, threads);
  const Eigen::MatrixXd gram = influence.gram();
  Eigen::VectorXd norms(n);
  for (int i = 0; i < n; ++i) norms[i] = std::sqrt(gram(i, i));

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    if (norms[i] == 0.0) continue;  // no influence anywhere, never merged
    for (int j = i + 1; j < n; ++j) {
      if (norms[j] == 0.0 || gram(i, j) == 0.0) continue;
      if (gram(i, j) / (norms[i] * norms[j]) > cfg.merge_threshold) edges.emplace_back(i, j);
    }
  }

  const auto clusters = connected_components(n, edges);

  std::vector<AxesGaussian> out;
  std::vector<int> carried;
  int merged_clusters = 0;
  for (const auto& cluster : clusters) {
    if (cluster.size() == 1) {
      out.push_back(field.gaussian(cluster[0]));
      carried.push_back(cluster[0]);
      continue;
    }
    ++merged_clusters;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(q);
    for (int i : cluster) {
      mu += field.centers().row(i).transpose();
      h += field.scales().row(i).transpose();
    }
    mu /= static_cast<double>(cluster.size());
    h /= static_cast<double>(cluster.size());
    // Value re-predicted from the full pre-merge field at the new center.
    AxesGaussian g{mu, h.array().log().matrix(), predict(field, mu)};
    out.push_back(std::move(g));
    carried.push_back(-1);
  }

  DensityUpdate update{GaussianField(q, field.channels(), std::move(out), field.z_threshold()),
                       std::move(carried), 0, 0, merged_clusters};
  return update;
}

}  // namespace ngs
