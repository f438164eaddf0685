#include "ngsplat/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ngsplat/dataset.hpp"

namespace ngs {

namespace {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

GaussianField::GaussianField(int q, int p, std::vector<AxesGaussian> gaussians, double z_threshold)
    : q_(q), p_(p), z_threshold_(z_threshold) {
  if (q < 1) throw std::invalid_argument("field: q must be >= 1");
  if (p < 1) throw std::invalid_argument("field: p must be >= 1");
  if (z_threshold < 0.0) throw std::invalid_argument("field: z_threshold must be >= 0");
  if (gaussians.empty()) throw std::invalid_argument("field: gaussian list must be non-empty");
  const int n = static_cast<int>(gaussians.size());
  mu_.resize(n, q);
  log_h_.resize(n, q);
  v_.resize(n, p);
  for (int i = 0; i < n; ++i) {
    const AxesGaussian& g = gaussians[i];
    if (g.mu.size() != q)
      throw std::invalid_argument("field: gaussian " + std::to_string(i) + ": mu has length " +
                                  std::to_string(g.mu.size()) + ", expected q=" + std::to_string(q));
    if (g.log_h.size() != q)
      throw std::invalid_argument("field: gaussian " + std::to_string(i) + ": log_h has length " +
                                  std::to_string(g.log_h.size()) + ", expected q=" +
                                  std::to_string(q));
    if (g.value.size() != p)
      throw std::invalid_argument("field: gaussian " + std::to_string(i) + ": value has length " +
                                  std::to_string(g.value.size()) + ", expected p=" +
                                  std::to_string(p));
    mu_.row(i) = g.mu.transpose();
    log_h_.row(i) = g.log_h.transpose();
    v_.row(i) = g.value.transpose();
  }
  validate();
  refresh_cache();
}

void GaussianField::set_z_threshold(double z) {
  if (z < 0.0) throw std::invalid_argument("field: z_threshold must be >= 0");
  z_threshold_ = z;
}

AxesGaussian GaussianField::gaussian(int i) const {
  if (i < 0 || i >= size()) throw std::out_of_range("field: gaussian index out of range");
  return AxesGaussian{mu_.row(i).transpose(), log_h_.row(i).transpose(), v_.row(i).transpose()};
}

void GaussianField::replace(std::vector<AxesGaussian> gaussians) {
  *this = GaussianField(q_, p_, std::move(gaussians), z_threshold_);
}

int GaussianField::nearest_center(const Eigen::VectorXd& x) const {
  if (x.size() != q_) throw std::invalid_argument("field: query point has wrong dimension");
  int best = 0;
  double best_d = (mu_.row(0).transpose() - x).squaredNorm();
  for (int i = 1; i < size(); ++i) {
    const double d = (mu_.row(i).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Eigen::VectorXd GaussianField::flatten() const {
  const int n = size();
  const int stride = params_per_gaussian();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n) * stride);
  for (int i = 0; i < n; ++i) {
    double* block = out.data() + static_cast<Eigen::Index>(i) * stride;
    for (int j = 0; j < q_; ++j) block[j] = mu_(i, j);
    for (int j = 0; j < q_; ++j) block[q_ + j] = log_h_(i, j);
    for (int a = 0; a < p_; ++a) block[2 * q_ + a] = v_(i, a);
  }
  return out;
}

void GaussianField::apply(const Eigen::VectorXd& params) {
  const int n = size();
  const int stride = params_per_gaussian();
  if (params.size() != static_cast<Eigen::Index>(n) * stride)
    throw std::invalid_argument("field: parameter vector has length " +
                                std::to_string(params.size()) + ", expected " +
                                std::to_string(static_cast<long long>(n) * stride));
  for (int i = 0; i < n; ++i) {
    const double* block = params.data() + static_cast<Eigen::Index>(i) * stride;
    for (int j = 0; j < q_; ++j) mu_(i, j) = block[j];
    for (int j = 0; j < q_; ++j) log_h_(i, j) = block[q_ + j];
    for (int a = 0; a < p_; ++a) v_(i, a) = block[2 * q_ + a];
  }
  validate();
  refresh_cache();
}

void GaussianField::validate() const {
  if (!mu_.allFinite() || !log_h_.allFinite() || !v_.allFinite())
    throw std::invalid_argument("field: non-finite parameter");
}

void GaussianField::refresh_cache() {
  h_ = log_h_.array().exp().matrix();
  u_ = (-2.0 * log_h_.array()).exp().matrix();  // h^-2
}

namespace {

// Chooses per-axis grid counts whose product lands near the requested
// total, with counts proportional to the axis extents. Degenerate axes get
// a single line.
std::vector<int> choose_axis_counts(const std::vector<double>& extents, int requested) {
  const int q = static_cast<int>(extents.size());
  std::vector<int> counts(q, 1);
  std::vector<int> live;
  for (int j = 0; j < q; ++j)
    if (extents[j] > 0.0) live.push_back(j);
  if (live.empty()) return counts;
  const int d = static_cast<int>(live.size());
  double volume = 1.0;
  for (int j : live) volume *= extents[j];
  const double density = std::pow(static_cast<double>(requested) / volume, 1.0 / d);
  double partial = 1.0;
  for (int k = 0; k < d; ++k) {
    const int j = live[k];
    int m;
    if (k + 1 == d) {
      m = static_cast<int>(std::llround(static_cast<double>(requested) / partial));
    } else {
      m = static_cast<int>(std::llround(density * extents[j]));
    }
    m = std::max(m, 2);
    counts[j] = m;
    partial *= m;
  }
  return counts;
}

}  // namespace

GaussianField init_from_grid(const FieldDataset& dataset, const GridInit& spec,
                             double z_threshold) {
  dataset.validate();
  const int q = dataset.dim();
  const int p = dataset.channels();
  const int k = dataset.count();

  int modes = 0;
  modes += spec.count.has_value() ? 1 : 0;
  modes += spec.axis_counts.empty() ? 0 : 1;
  modes += spec.stride.has_value() ? 1 : 0;
  if (modes != 1)
    throw std::invalid_argument("init: exactly one of count, axis_counts, stride must be set");

  std::vector<AxesGaussian> gaussians;

  if (spec.stride) {
    const int stride = *spec.stride;
    if (stride < 1) throw std::invalid_argument("init: stride must be >= 1");
    // Every stride-th dataset point in row-major order becomes a center;
    // the bandwidth covers the skipped neighbors.
    Eigen::VectorXd h(q);
    const double widen = std::pow(static_cast<double>(stride), 1.0 / q);
    if (dataset.grid) {
      for (int j = 0; j < q; ++j) h[j] = dataset.grid->spacing[j] * widen;
    } else {
      h.setConstant(dataset.mean_nearest_neighbor_spacing() * widen);
    }
    for (int j = 0; j < q; ++j) h[j] = std::max(h[j], 1e-12);
    const Eigen::VectorXd log_h = h.array().log().matrix();
    for (int i = 0; i < k; i += stride) {
      gaussians.push_back(AxesGaussian{dataset.coords.row(i).transpose(), log_h,
                                       dataset.values.row(i).transpose()});
    }
    return GaussianField(q, p, std::move(gaussians), z_threshold);
  }

  Eigen::VectorXd lo = dataset.coords.colwise().minCoeff().transpose();
  Eigen::VectorXd hi = dataset.coords.colwise().maxCoeff().transpose();
  std::vector<double> extents(q);
  for (int j = 0; j < q; ++j) extents[j] = hi[j] - lo[j];

  std::vector<int> counts;
  if (spec.count) {
    if (*spec.count < 1) throw std::invalid_argument("init: count must be >= 1");
    counts = choose_axis_counts(extents, *spec.count);
    if (*spec.count == 1) counts.assign(q, 1);
  } else {
    if (static_cast<int>(spec.axis_counts.size()) != q)
      throw std::invalid_argument("init: axis_counts must have length q");
    counts = spec.axis_counts;
    for (int j = 0; j < q; ++j) {
      if (counts[j] < 1) throw std::invalid_argument("init: axis_counts entries must be >= 1");
      if (extents[j] == 0.0) counts[j] = 1;
    }
  }

  const double fallback_h = std::max(dataset.mean_nearest_neighbor_spacing(), 1e-12);
  Eigen::VectorXd spacing(q), log_h(q), offset(q);
  offset.setZero();
  for (int j = 0; j < q; ++j) {
    if (counts[j] > 1 && extents[j] > 0.0) {
      spacing[j] = extents[j] / (counts[j] - 1);
      log_h[j] = std::log(spacing[j]);
    } else {
      counts[j] = 1;
      spacing[j] = 0.0;
      // A single grid line sits at the axis midpoint and its bandwidth
      // covers the half-extent.
      offset[j] = extents[j] / 2.0;
      log_h[j] = std::log(std::max(extents[j] / 2.0, fallback_h));
    }
  }

  long total = 1;
  for (int j = 0; j < q; ++j) total *= counts[j];

  Eigen::VectorXd x(q);
  std::vector<int> idx(q, 0);
  gaussians.reserve(static_cast<size_t>(total));
  for (long flat = 0; flat < total; ++flat) {
    for (int j = 0; j < q; ++j) x[j] = lo[j] + offset[j] + idx[j] * spacing[j];
    // Nearest dataset point, ties broken by lowest index.
    int best = 0;
    double best_d = (dataset.coords.row(0).transpose() - x).squaredNorm();
    for (int r = 1; r < k; ++r) {
      const double d = (dataset.coords.row(r).transpose() - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = r;
      }
    }
    gaussians.push_back(AxesGaussian{x, log_h, dataset.values.row(best).transpose()});
    for (int j = q - 1; j >= 0; --j) {
      if (++idx[j] < counts[j]) break;
      idx[j] = 0;
    }
  }
  return GaussianField(q, p, std::move(gaussians), z_threshold);
}

void save_field(const GaussianField& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  out << "# ngsplat field v1\n";
  out << field.dim() << ' ' << field.channels() << ' ' << field.size() << ' '
      << format_full(field.z_threshold()) << '\n';
  for (int i = 0; i < field.size(); ++i) {
    for (int j = 0; j < field.dim(); ++j) out << format_full(field.centers()(i, j)) << ' ';
    for (int j = 0; j < field.dim(); ++j) out << format_full(field.log_scales()(i, j)) << ' ';
    for (int a = 0; a < field.channels(); ++a) {
      out << format_full(field.values()(i, a));
      out << (a + 1 == field.channels() ? '\n' : ' ');
    }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

GaussianField load_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ngsplat field", 0) != 0)
    throw std::runtime_error("checkpoint: " + path.string() + " is not a field checkpoint");
  int q = 0, p = 0, n = 0;
  double z = 0.0;
  if (!(in >> q >> p >> n >> z))
    throw std::runtime_error("checkpoint: malformed header in " + path.string());
  if (q < 1 || p < 1 || n < 1)
    throw std::runtime_error("checkpoint: invalid dimensions in " + path.string());
  std::vector<AxesGaussian> gaussians;
  gaussians.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    AxesGaussian g{Eigen::VectorXd(q), Eigen::VectorXd(q), Eigen::VectorXd(p)};
    for (int j = 0; j < q; ++j)
      if (!(in >> g.mu[j])) throw std::runtime_error("checkpoint: truncated row " + std::to_string(i));
    for (int j = 0; j < q; ++j)
      if (!(in >> g.log_h[j]))
        throw std::runtime_error("checkpoint: truncated row " + std::to_string(i));
    for (int a = 0; a < p; ++a)
      if (!(in >> g.value[a]))
        throw std::runtime_error("checkpoint: truncated row " + std::to_string(i));
    gaussians.push_back(std::move(g));
  }
  return GaussianField(q, p, std::move(gaussians), z);
}

}  // namespace ngs
