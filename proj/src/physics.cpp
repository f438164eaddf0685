#include "ngsplat/physics.hpp"

#include <cmath>
#include <stdexcept>

#include "ngsplat/calculus.hpp"
#include "ngsplat/parallel.hpp"
#include "ngsplat/splat.hpp"

namespace ngs {

PdeSpec PdeSpec::none() { return PdeSpec{}; }

PdeSpec PdeSpec::steady_ns_2d(double reynolds, int pressure_channel) {
  if (!(reynolds > 0.0)) throw std::invalid_argument("pde: Reynolds number must be positive");
  PdeSpec s;
  s.kind_ = Kind::SteadyNS2D;
  s.reynolds_ = reynolds;
  s.spatial_dims_ = 2;
  s.time_axis_ = -1;
  s.pressure_channel_ = pressure_channel;
  s.spatial_axes_ = {0, 1};
  return s;
}

PdeSpec PdeSpec::unsteady_ns(double reynolds, int spatial_dims, int time_axis,
                             int pressure_channel) {
  if (!(reynolds > 0.0)) throw std::invalid_argument("pde: Reynolds number must be positive");
  if (spatial_dims != 2 && spatial_dims != 3)
    throw std::invalid_argument("pde: unsteady flow supports 2 or 3 spatial dimensions");
  if (time_axis > spatial_dims)
    throw std::invalid_argument("pde: time axis must lie within the q coordinates");
  PdeSpec s;
  s.kind_ = Kind::UnsteadyNS;
  s.reynolds_ = reynolds;
  s.spatial_dims_ = spatial_dims;
  s.time_axis_ = time_axis < 0 ? spatial_dims : time_axis;
  s.pressure_channel_ = pressure_channel < 0 ? spatial_dims : pressure_channel;
  for (int j = 0; j <= spatial_dims; ++j)
    if (j != s.time_axis_) s.spatial_axes_.push_back(j);
  return s;
}

PdeSpec PdeSpec::burgers(double nu, int time_axis) {
  if (!(nu > 0.0)) throw std::invalid_argument("pde: viscosity must be positive");
  if (time_axis != 0 && time_axis != 1)
    throw std::invalid_argument("pde: Burgers time axis must be 0 or 1");
  PdeSpec s;
  s.kind_ = Kind::Burgers;
  s.nu_ = nu;
  s.spatial_dims_ = 1;
  s.time_axis_ = time_axis;
  s.spatial_axes_ = {1 - time_axis};
  return s;
}

int PdeSpec::residual_count() const {
  switch (kind_) {
    case Kind::NoPde: return 0;
    case Kind::Burgers: return 1;
    default: return spatial_dims_ + 1;
  }
}

void PdeSpec::check_layout(int q, int p) const {
  switch (kind_) {
    case Kind::NoPde:
      return;
    case Kind::SteadyNS2D:
      if (q != 2)
        throw std::invalid_argument("pde: steady 2D flow needs q=2, field has q=" +
                                    std::to_string(q));
      if (p < 3 || pressure_channel_ >= p)
        throw std::invalid_argument("pde: steady 2D flow needs p>=3 with a pressure channel");
      return;
    case Kind::UnsteadyNS:
      if (q != spatial_dims_ + 1)
        throw std::invalid_argument("pde: unsteady flow in " + std::to_string(spatial_dims_) +
                                    " spatial dimensions needs q=" +
                                    std::to_string(spatial_dims_ + 1) + ", field has q=" +
                                    std::to_string(q));
      if (time_axis_ < 0 || time_axis_ >= q)
        throw std::invalid_argument("pde: time axis out of range");
      if (p < spatial_dims_ + 1 || pressure_channel_ >= p)
        throw std::invalid_argument("pde: unsteady flow needs p>=" +
                                    std::to_string(spatial_dims_ + 1) +
                                    " with a pressure channel");
      return;
    case Kind::Burgers:
      if (q != 2) throw std::invalid_argument("pde: Burgers needs q=2 (x, t)");
      if (p < 1) throw std::invalid_argument("pde: Burgers needs p>=1");
      return;
  }
}

std::string PdeSpec::describe() const {
  switch (kind_) {
    case Kind::NoPde: return "none";
    case Kind::SteadyNS2D: return "steady_ns_2d(Re=" + std::to_string(reynolds_) + ")";
    case Kind::UnsteadyNS:
      return "unsteady_ns(Re=" + std::to_string(reynolds_) + ", d=" +
             std::to_string(spatial_dims_) + ")";
    case Kind::Burgers: return "burgers(nu=" + std::to_string(nu_) + ")";
  }
  return "none";
}

Eigen::VectorXd residual_from_derivatives(const Eigen::VectorXd& v, const Eigen::MatrixXd& jac,
                                          const Eigen::MatrixXd& second_diag,
                                          const PdeSpec& spec) {
  if (!spec.has_pde()) throw std::invalid_argument("residual: spec has no constraint family");
  const auto& axes = spec.spatial_axes();
  Eigen::VectorXd g(spec.residual_count());

  if (spec.kind() == PdeSpec::Kind::Burgers) {
    const int x_ax = axes[0];
    g[0] = jac(0, spec.time_axis()) + v[0] * jac(0, x_ax) -
           spec.viscosity() * second_diag(0, x_ax);
    return g;
  }

  const int d = spec.spatial_dims();
  const double inv_re = 1.0 / spec.reynolds();
  for (int a = 0; a < d; ++a) {
    double r = jac(spec.pressure_channel(), axes[a]);
    if (spec.time_axis() >= 0) r += jac(a, spec.time_axis());
    for (int b = 0; b < d; ++b) r += v[b] * jac(a, axes[b]) - inv_re * second_diag(a, axes[b]);
    g[a] = r;
  }
  double div = 0.0;
  for (int b = 0; b < d; ++b) div += jac(b, axes[b]);
  g[d] = div;
  return g;
}

Eigen::VectorXd residual(const GaussianField& field, const Eigen::VectorXd& x,
                         const PdeSpec& spec) {
  spec.check_layout(field.dim(), field.channels());
  if (x.size() != field.dim()) throw std::invalid_argument("residual: point dimension mismatch");
  const Eigen::VectorXd v = predict(field, x);
  const Eigen::MatrixXd jac = spatial_jacobian(field, x);
  const Eigen::MatrixXd second = spatial_second_diag(field, x);
  return residual_from_derivatives(v, jac, second, spec);
}

double data_loss(const GaussianField& field, const Eigen::MatrixXd& coords,
                 const Eigen::MatrixXd& values, const Eigen::VectorXd& mask, int threads) {
  if (coords.rows() < 1) throw std::invalid_argument("data_loss: batch must be non-empty");
  if (values.rows() != coords.rows() || values.cols() != field.channels())
    throw std::invalid_argument("data_loss: batch value shape mismatch");
  if (mask.size() != field.channels()) throw std::invalid_argument("data_loss: mask length mismatch");
  const std::int64_t nchunks = chunk_count(coords.rows());
  std::vector<double> parts(static_cast<size_t>(nchunks), 0.0);
  for_chunks(coords.rows(), threads, [&](std::int64_t c, std::int64_t begin, std::int64_t end) {
    double acc = 0.0;
    for (std::int64_t r = begin; r < end; ++r) {
      const Eigen::VectorXd pred = predict(field, coords.row(r).transpose());
      for (int a = 0; a < mask.size(); ++a) {
        const double diff = mask[a] * (pred[a] - values(r, a));
        acc += diff * diff;
      }
    }
    parts[static_cast<size_t>(c)] = acc;
  });
  double sum = 0.0;
  for (double v : parts) sum += v;
  return sum / static_cast<double>(coords.rows());
}

double pde_loss(const GaussianField& field, const Eigen::MatrixXd& points, const PdeSpec& spec,
                int threads) {
  if (!spec.has_pde()) throw std::invalid_argument("pde_loss: spec has no constraint family");
  spec.check_layout(field.dim(), field.channels());
  if (points.rows() < 1) throw std::invalid_argument("pde_loss: need at least one point");
  const std::int64_t nchunks = chunk_count(points.rows());
  std::vector<double> parts(static_cast<size_t>(nchunks), 0.0);
  for_chunks(points.rows(), threads, [&](std::int64_t c, std::int64_t begin, std::int64_t end) {
    double acc = 0.0;
    for (std::int64_t r = begin; r < end; ++r)
      acc += residual(field, points.row(r).transpose(), spec).squaredNorm();
    parts[static_cast<size_t>(c)] = acc;
  });
  double sum = 0.0;
  for (double v : parts) sum += v;
  return sum / static_cast<double>(points.rows());
}

LossBreakdown total_loss(const GaussianField& field, const Eigen::MatrixXd& coords,
                         const Eigen::MatrixXd& values, const Eigen::VectorXd& mask,
                         const PdeSpec& spec, double lambda, int threads) {
  LossBreakdown out;
  out.data = data_loss(field, coords, values, mask, threads);
  out.pde = spec.has_pde() ? pde_loss(field, coords, spec, threads) : 0.0;
  out.total = out.data + lambda * out.pde;
  return out;
}

}  // namespace ngs
