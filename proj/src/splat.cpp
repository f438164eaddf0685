#include "ngsplat/splat.hpp"

#include <cmath>
#include <stdexcept>

#include "activation.hpp"
#include "ngsplat/parallel.hpp"

namespace ngs {

double influence(const AxesGaussian& g, const Eigen::VectorXd& x) {
  if (x.size() != g.mu.size())
    throw std::invalid_argument("influence: point dimension mismatch");
  double e = 0.0;
  for (int j = 0; j < g.mu.size(); ++j) {
    const double d = (x[j] - g.mu[j]) / std::exp(g.log_h[j]);
    e -= 0.5 * d * d;
  }
  return std::exp(e);
}

Eigen::VectorXd weights(const GaussianField& field, const Eigen::VectorXd& x) {
  if (x.size() != field.dim()) throw std::invalid_argument("weights: point dimension mismatch");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(field.size());
  const detail::Activation act = detail::activate(field, x);
  if (act.onehot) {
    w[act.onehot_index] = 1.0;
    return w;
  }
  for (size_t r = 0; r < act.idx.size(); ++r) w[act.idx[r]] = act.z[r] / act.sum;
  return w;
}

Eigen::VectorXd predict(const GaussianField& field, const Eigen::VectorXd& x) {
  if (x.size() != field.dim()) throw std::invalid_argument("predict: point dimension mismatch");
  const detail::Activation act = detail::activate(field, x);
  if (act.onehot) return field.values().row(act.onehot_index).transpose();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(field.channels());
  for (size_t r = 0; r < act.idx.size(); ++r)
    out += (act.z[r] / act.sum) * field.values().row(act.idx[r]).transpose();
  return out;
}

Eigen::VectorXd predict_unnormalized(const GaussianField& field, const Eigen::VectorXd& x) {
  if (x.size() != field.dim())
    throw std::invalid_argument("predict_unnormalized: point dimension mismatch");
  const int q = field.dim();
  const auto& mu = field.centers();
  const auto& u = field.inv_scales_sq();
  const double thresh = field.z_threshold();
  const double log_thresh =
      thresh > 0.0 ? std::log(thresh) : -std::numeric_limits<double>::infinity();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(field.channels());
  for (int i = 0; i < field.size(); ++i) {
    double e = 0.0;
    for (int j = 0; j < q; ++j) {
      const double d = x[j] - mu(i, j);
      e -= 0.5 * d * d * u(i, j);
    }
    if (e < log_thresh) continue;
    out += std::exp(e) * field.values().row(i).transpose();
  }
  return out;
}

namespace {

Eigen::MatrixXd map_rows(const GaussianField& field, const Eigen::MatrixXd& points, int threads,
                         Eigen::VectorXd (*f)(const GaussianField&, const Eigen::VectorXd&)) {
  if (points.cols() != field.dim())
    throw std::invalid_argument("predict_many: point dimension mismatch");
  Eigen::MatrixXd out(points.rows(), field.channels());
  for_chunks(points.rows(), threads, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
    for (std::int64_t r = begin; r < end; ++r)
      out.row(r) = f(field, points.row(r).transpose()).transpose();
  });
  return out;
}

}  // namespace

Eigen::MatrixXd predict_many(const GaussianField& field, const Eigen::MatrixXd& points,
                             int threads) {
  return map_rows(field, points, threads, &predict);
}

Eigen::MatrixXd predict_many_unnormalized(const GaussianField& field,
                                          const Eigen::MatrixXd& points, int threads) {
  return map_rows(field, points, threads, &predict_unnormalized);
}

Eigen::MatrixXd InfluenceMatrix::dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, cols_);
  for (int k = 0; k < rows_; ++k)
    for (const auto& [i, z] : row_entries_[k]) out(k, i) = z;
  return out;
}

Eigen::VectorXd InfluenceMatrix::column_norms() const {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(cols_);
  for (int k = 0; k < rows_; ++k)
    for (const auto& [i, z] : row_entries_[k]) acc[i] += z * z;
  return acc.array().sqrt().matrix();
}

Eigen::VectorXd InfluenceMatrix::column_weighted_sums(const Eigen::VectorXd& point_weights) const {
  if (point_weights.size() != rows_)
    throw std::invalid_argument("influence matrix: weight vector length mismatch");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(cols_);
  for (int k = 0; k < rows_; ++k)
    for (const auto& [i, z] : row_entries_[k]) acc[i] += point_weights[k] * z;
  return acc;
}

Eigen::MatrixXd InfluenceMatrix::gram() const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(cols_, cols_);
  for (int k = 0; k < rows_; ++k) {
    const auto& row = row_entries_[k];
    for (size_t a = 0; a < row.size(); ++a)
      for (size_t b = a; b < row.size(); ++b) g(row[a].first, row[b].first) += row[a].second * row[b].second;
  }
  return g.selfadjointView<Eigen::Upper>();
}

InfluenceMatrix influence_matrix(const GaussianField& field, const Eigen::MatrixXd& points,
                                 int threads) {
  if (points.rows() < 1) throw std::invalid_argument("influence_matrix: need at least one point");
  if (points.cols() != field.dim())
    throw std::invalid_argument("influence_matrix: point dimension mismatch");
  const int q = field.dim();
  const auto& mu = field.centers();
  const auto& u = field.inv_scales_sq();
  const double thresh = field.z_threshold();
  const double log_thresh =
      thresh > 0.0 ? std::log(thresh) : -std::numeric_limits<double>::infinity();

  InfluenceMatrix m(static_cast<int>(points.rows()), field.size());
  for_chunks(points.rows(), threads, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
    for (std::int64_t k = begin; k < end; ++k) {
      auto& row = m.mutable_row(static_cast<int>(k));
      for (int i = 0; i < field.size(); ++i) {
        double e = 0.0;
        for (int j = 0; j < q; ++j) {
          const double d = points(k, j) - mu(i, j);
          e -= 0.5 * d * d * u(i, j);
        }
        if (e < log_thresh) continue;
        const double z = std::exp(e);
        if (z > 0.0) row.emplace_back(i, z);
      }
    }
  });
  return m;
}

GaussianField nadaraya_watson_field(const FieldDataset& dataset, double bandwidth) {
  dataset.validate();
  if (!(bandwidth > 0.0)) throw std::invalid_argument("nadaraya_watson: bandwidth must be > 0");
  std::vector<AxesGaussian> gaussians;
  gaussians.reserve(static_cast<size_t>(dataset.count()));
  const Eigen::VectorXd log_h =
      Eigen::VectorXd::Constant(dataset.dim(), std::log(bandwidth));
  for (int k = 0; k < dataset.count(); ++k)
    gaussians.push_back(AxesGaussian{dataset.coords.row(k).transpose(), log_h,
                                     dataset.values.row(k).transpose()});
  return GaussianField(dataset.dim(), dataset.channels(), std::move(gaussians), 0.0);
}

Eigen::VectorXd nadaraya_watson(const FieldDataset& dataset, double bandwidth,
                                const Eigen::VectorXd& x) {
  return predict(nadaraya_watson_field(dataset, bandwidth), x);
}

}  // namespace ngs
