#include "ngsplat/calculus.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "activation.hpp"
#include "ngsplat/parallel.hpp"

namespace ngs {

namespace detail {

// Forward pass at one point: retained influences, normalized weights, the
// per-axis exponent derivatives, and the weighted aggregates the closed
// forms below are written in. With s_ij = -(x_j-μ_ij)/h_ij²:
//   J_aj = A_aj - v̂_a s̄_j
//   H_aj = B_aj - 2 A_aj s̄_j + v̂_a (2s̄_j² - m2_j + r_j) - C_aj
// where A/B/C are the value-weighted moments of s, s², h^-2 and
// s̄/m2/r the plain ones.
struct SplatPoint {
  Activation act;
  int n = 0;                 // retained count
  Eigen::VectorXd w;         // n
  Eigen::MatrixXd s, t, u;   // n×q: exponent derivative, d²/h², h^-2
  Eigen::VectorXd value;     // p: prediction v̂
  Eigen::VectorXd s_bar, m2, r;        // q
  Eigen::MatrixXd A, B, C;             // p×q
  Eigen::MatrixXd jac, second;         // p×q
};

void splat_point(const GaussianField& field, const Eigen::VectorXd& x, bool with_derivatives,
                 bool with_second, SplatPoint& out) {
  const int q = field.dim();
  const int p = field.channels();
  out.act = activate(field, x);
  if (out.act.onehot) {
    out.n = 0;
    out.value = field.values().row(out.act.onehot_index).transpose();
    if (with_derivatives) {
      out.jac = Eigen::MatrixXd::Zero(p, q);
      out.second = Eigen::MatrixXd::Zero(p, q);
    }
    return;
  }
  const auto& mu = field.centers();
  const auto& uu = field.inv_scales_sq();
  const auto& values = field.values();
  const int n = static_cast<int>(out.act.idx.size());
  out.n = n;
  out.w.resize(n);
  out.s.resize(n, q);
  out.t.resize(n, q);
  out.u.resize(n, q);
  for (int r = 0; r < n; ++r) {
    const int i = out.act.idx[r];
    out.w[r] = out.act.z[r] / out.act.sum;
    for (int j = 0; j < q; ++j) {
      const double d = x[j] - mu(i, j);
      const double u_ij = uu(i, j);
      out.s(r, j) = -d * u_ij;
      out.t(r, j) = d * d * u_ij;
      out.u(r, j) = u_ij;
    }
  }
  out.value = Eigen::VectorXd::Zero(p);
  for (int r = 0; r < n; ++r)
    out.value += out.w[r] * values.row(out.act.idx[r]).transpose();
  if (!with_derivatives) return;

  if (n == 1) {
    // A single surviving Gaussian predicts a constant.
    out.s_bar = out.s.row(0).transpose();
    out.m2 = out.s.row(0).array().square().matrix().transpose();
    out.r = out.u.row(0).transpose();
    out.A = out.value * out.s_bar.transpose();
    out.B = out.value * out.m2.transpose();
    out.C = out.value * out.r.transpose();
    out.jac = Eigen::MatrixXd::Zero(p, q);
    out.second = Eigen::MatrixXd::Zero(p, q);
    return;
  }

  out.s_bar = Eigen::VectorXd::Zero(q);
  out.A = Eigen::MatrixXd::Zero(p, q);
  for (int r = 0; r < n; ++r) {
    const int i = out.act.idx[r];
    for (int j = 0; j < q; ++j) {
      const double ws = out.w[r] * out.s(r, j);
      out.s_bar[j] += ws;
      for (int a = 0; a < p; ++a) out.A(a, j) += ws * values(i, a);
    }
  }
  out.jac = out.A - out.value * out.s_bar.transpose();
  if (!with_second) return;

  out.m2 = Eigen::VectorXd::Zero(q);
  out.r = Eigen::VectorXd::Zero(q);
  out.B = Eigen::MatrixXd::Zero(p, q);
  out.C = Eigen::MatrixXd::Zero(p, q);
  for (int r = 0; r < n; ++r) {
    const int i = out.act.idx[r];
    for (int j = 0; j < q; ++j) {
      const double s = out.s(r, j);
      const double ws2 = out.w[r] * s * s;
      const double wu = out.w[r] * out.u(r, j);
      out.m2[j] += ws2;
      out.r[j] += wu;
      for (int a = 0; a < p; ++a) {
        out.B(a, j) += ws2 * values(i, a);
        out.C(a, j) += wu * values(i, a);
      }
    }
  }
  out.second.resize(p, q);
  for (int a = 0; a < p; ++a)
    for (int j = 0; j < q; ++j)
      out.second(a, j) = out.B(a, j) - 2.0 * out.A(a, j) * out.s_bar[j] +
                         out.value[a] * (2.0 * out.s_bar[j] * out.s_bar[j] - out.m2[j] + out.r[j]) -
                         out.C(a, j);
}

}  // namespace detail

Eigen::MatrixXd spatial_jacobian(const GaussianField& field, const Eigen::VectorXd& x) {
  if (x.size() != field.dim())
    throw std::invalid_argument("spatial_jacobian: point dimension mismatch");
  detail::SplatPoint pt;
  detail::splat_point(field, x, true, false, pt);
  return pt.jac;
}

Eigen::MatrixXd spatial_second_diag(const GaussianField& field, const Eigen::VectorXd& x) {
  if (x.size() != field.dim())
    throw std::invalid_argument("spatial_second_diag: point dimension mismatch");
  detail::SplatPoint pt;
  detail::splat_point(field, x, true, true, pt);
  return pt.second;
}

namespace {

// Residual values and their adjoints with respect to (v̂, J, H). `coef`
// multiplies each ∂(g_m²)/∂· contribution.
double residual_adjoints(const detail::SplatPoint& pt, const PdeSpec& spec, double coef,
                         Eigen::VectorXd& gv, Eigen::MatrixXd& gJ, Eigen::MatrixXd& gH) {
  const auto& axes = spec.spatial_axes();
  const int d = spec.spatial_dims();
  const int t_ax = spec.time_axis();
  const int p_ch = spec.pressure_channel();
  double sq = 0.0;

  if (spec.kind() == PdeSpec::Kind::Burgers) {
    const int x_ax = axes[0];
    const double g = pt.jac(0, t_ax) + pt.value[0] * pt.jac(0, x_ax) -
                     spec.viscosity() * pt.second(0, x_ax);
    sq = g * g;
    const double c = 2.0 * g * coef;
    gJ(0, t_ax) += c;
    gv[0] += c * pt.jac(0, x_ax);
    gJ(0, x_ax) += c * pt.value[0];
    gH(0, x_ax) -= c * spec.viscosity();
    return sq;
  }

  const double inv_re = 1.0 / spec.reynolds();
  for (int a = 0; a < d; ++a) {
    double g = pt.jac(p_ch, axes[a]);
    if (t_ax >= 0) g += pt.jac(a, t_ax);
    for (int b = 0; b < d; ++b) g += pt.value[b] * pt.jac(a, axes[b]) - inv_re * pt.second(a, axes[b]);
    sq += g * g;
    const double c = 2.0 * g * coef;
    gJ(p_ch, axes[a]) += c;
    if (t_ax >= 0) gJ(a, t_ax) += c;
    for (int b = 0; b < d; ++b) {
      gv[b] += c * pt.jac(a, axes[b]);
      gJ(a, axes[b]) += c * pt.value[b];
      gH(a, axes[b]) -= c * inv_re;
    }
  }
  double div = 0.0;
  for (int b = 0; b < d; ++b) div += pt.jac(b, axes[b]);
  sq += div * div;
  const double c = 2.0 * div * coef;
  for (int b = 0; b < d; ++b) gJ(b, axes[b]) += c;
  return sq;
}

struct PointTask {
  double data = 0.0;
  double pde = 0.0;
};

// Hand-derived backward pass for one point. Upstream gradients gv/gJ/gH
// are pushed through the aggregates of SplatPoint onto (μ, log h, v):
//   ∂w_i come in through ḡw, then ḡe_i = w_i(ḡw_i - Σ_l ḡw_l w_l),
//   ∂e/∂μ_ij = -s_ij, ∂e/∂log h_ij = t_ij,
//   ∂s_ij/∂μ_ij = u_ij, ∂s_ij/∂log h_ij = -2 s_ij,
//   ∂u_ij/∂log h_ij = -2 u_ij.
void backward_point(const GaussianField& field, const detail::SplatPoint& pt, bool with_pde,
                    const Eigen::VectorXd& gv, const Eigen::MatrixXd& gJ,
                    const Eigen::MatrixXd& gH, Eigen::VectorXd& grad) {
  const int q = field.dim();
  const int p = field.channels();
  const int stride = field.params_per_gaussian();
  const auto& values = field.values();

  if (pt.act.onehot) {
    // Constant prediction: only the chosen value block moves.
    double* block = grad.data() + static_cast<Eigen::Index>(pt.act.onehot_index) * stride;
    for (int a = 0; a < p; ++a) block[2 * q + a] += gv[a];
    return;
  }

  const int n = pt.n;
  Eigen::VectorXd gw(n);
  for (int r = 0; r < n; ++r) {
    const int i = pt.act.idx[r];
    double acc = 0.0;
    for (int a = 0; a < p; ++a) acc += gv[a] * values(i, a);
    if (with_pde) {
      for (int j = 0; j < q; ++j) {
        const double s = pt.s(r, j), u = pt.u(r, j);
        const double sb = pt.s_bar[j];
        for (int a = 0; a < p; ++a) {
          const double v = values(i, a);
          const double jg = gJ(a, j);
          if (jg != 0.0) acc += jg * (v * s - v * sb - pt.value[a] * s);
          const double hg = gH(a, j);
          if (hg != 0.0)
            acc += hg * (v * s * s - 2.0 * (v * s * sb + pt.A(a, j) * s) +
                         v * (2.0 * sb * sb - pt.m2[j] + pt.r[j]) +
                         pt.value[a] * (4.0 * sb * s - s * s + u) - v * u);
        }
      }
    }
    gw[r] = acc;
  }
  double dot = 0.0;
  for (int r = 0; r < n; ++r) dot += gw[r] * pt.w[r];

  for (int r = 0; r < n; ++r) {
    const int i = pt.act.idx[r];
    const double ge = pt.w[r] * (gw[r] - dot);
    double* block = grad.data() + static_cast<Eigen::Index>(i) * stride;
    for (int j = 0; j < q; ++j) {
      const double s = pt.s(r, j), u = pt.u(r, j), t = pt.t(r, j);
      double gs = 0.0, gu = 0.0;
      if (with_pde) {
        const double sb = pt.s_bar[j];
        for (int a = 0; a < p; ++a) {
          const double v = values(i, a);
          const double jg = gJ(a, j);
          if (jg != 0.0) gs += jg * pt.w[r] * (v - pt.value[a]);
          const double hg = gH(a, j);
          if (hg != 0.0) {
            gs += hg * pt.w[r] *
                  (2.0 * v * s - 2.0 * v * sb - 2.0 * pt.A(a, j) + 4.0 * pt.value[a] * sb -
                   2.0 * pt.value[a] * s);
            gu += hg * pt.w[r] * (pt.value[a] - v);
          }
        }
      }
      block[j] += -ge * s + gs * u;
      block[q + j] += ge * t - 2.0 * gs * s - 2.0 * gu * u;
    }
    for (int a = 0; a < p; ++a) {
      double acc = pt.w[r] * gv[a];
      if (with_pde) {
        for (int j = 0; j < q; ++j) {
          const double s = pt.s(r, j);
          const double sb = pt.s_bar[j];
          const double jg = gJ(a, j);
          if (jg != 0.0) acc += jg * pt.w[r] * (s - sb);
          const double hg = gH(a, j);
          if (hg != 0.0) {
            const double c = (s - sb) * (s - sb) - (pt.m2[j] - sb * sb) - pt.u(r, j) + pt.r[j];
            acc += hg * pt.w[r] * c;
          }
        }
      }
      block[2 * q + a] += acc;
    }
  }
}

// Unnormalized ablation path: v̂ = Σ z_i v_i, data term only, gradients
// flow to the value and log-bandwidth blocks.
void unnormalized_point(const GaussianField& field, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& target, const Eigen::VectorXd& mask, double cdata,
                        double& data_acc, Eigen::VectorXd& grad) {
  const int q = field.dim();
  const int p = field.channels();
  const int stride = field.params_per_gaussian();
  const auto& mu = field.centers();
  const auto& uu = field.inv_scales_sq();
  const auto& values = field.values();
  const double thresh = field.z_threshold();
  const double log_thresh =
      thresh > 0.0 ? std::log(thresh) : -std::numeric_limits<double>::infinity();

  std::vector<int> idx;
  std::vector<double> zs;
  Eigen::VectorXd pred = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < field.size(); ++i) {
    double e = 0.0;
    for (int j = 0; j < q; ++j) {
      const double d = x[j] - mu(i, j);
      e -= 0.5 * d * d * uu(i, j);
    }
    if (e < log_thresh) continue;
    const double z = std::exp(e);
    if (z == 0.0) continue;
    idx.push_back(i);
    zs.push_back(z);
    pred += z * values.row(i).transpose();
  }
  Eigen::VectorXd gv(p);
  double loss = 0.0;
  for (int a = 0; a < p; ++a) {
    const double diff = mask[a] * (pred[a] - target[a]);
    loss += diff * diff;
    gv[a] = 2.0 * mask[a] * diff * cdata;
  }
  data_acc += loss;
  for (size_t r = 0; r < idx.size(); ++r) {
    const int i = idx[r];
    const double z = zs[r];
    double ge = 0.0;
    for (int a = 0; a < p; ++a) ge += gv[a] * values(i, a);
    ge *= z;
    double* block = grad.data() + static_cast<Eigen::Index>(i) * stride;
    for (int j = 0; j < q; ++j) {
      const double d = x[j] - mu(i, j);
      block[q + j] += ge * d * d * uu(i, j);
    }
    for (int a = 0; a < p; ++a) block[2 * q + a] += z * gv[a];
  }
}

}  // namespace

LossGradient loss_param_gradient(const GaussianField& field, const Eigen::MatrixXd& coords,
                                 const Eigen::MatrixXd& values, const Eigen::VectorXd& mask,
                                 const PdeSpec& spec, const GradientOptions& options) {
  if (coords.rows() < 1) throw std::invalid_argument("gradient: batch must be non-empty");
  if (coords.cols() != field.dim())
    throw std::invalid_argument("gradient: batch coordinate dimension mismatch");
  if (values.rows() != coords.rows() || values.cols() != field.channels())
    throw std::invalid_argument("gradient: batch value shape mismatch");
  if (mask.size() != field.channels())
    throw std::invalid_argument("gradient: mask length mismatch");
  if (spec.has_pde()) spec.check_layout(field.dim(), field.channels());

  const int q = field.dim();
  const int p = field.channels();
  const Eigen::Index k_data = coords.rows();
  const Eigen::Index k_extra =
      options.extra_collocation != nullptr ? options.extra_collocation->rows() : 0;
  if (k_extra > 0 && options.extra_collocation->cols() != q)
    throw std::invalid_argument("gradient: collocation dimension mismatch");

  const bool with_pde = spec.has_pde() && options.lambda != 0.0 && !options.unnormalized;
  const Eigen::Index k_total = k_data + (with_pde ? k_extra : 0);
  const double cdata = 1.0 / static_cast<double>(k_data);
  const double cpde =
      with_pde ? options.lambda / static_cast<double>(k_data + k_extra) : 0.0;

  const std::int64_t nchunks = chunk_count(k_total);
  std::vector<Eigen::VectorXd> grad_parts(static_cast<size_t>(nchunks));
  std::vector<double> data_parts(static_cast<size_t>(nchunks), 0.0);
  std::vector<double> pde_parts(static_cast<size_t>(nchunks), 0.0);

  for_chunks(k_total, options.threads, [&](std::int64_t c, std::int64_t begin, std::int64_t end) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(field.param_count());
    double data_acc = 0.0, pde_acc = 0.0;
    detail::SplatPoint pt;
    Eigen::VectorXd gv(p);
    Eigen::MatrixXd gJ, gH;
    for (std::int64_t r = begin; r < end; ++r) {
      const bool is_data = r < k_data;
      const Eigen::VectorXd x = is_data
                                    ? coords.row(r).transpose()
                                    : options.extra_collocation->row(r - k_data).transpose();
      if (options.unnormalized) {
        unnormalized_point(field, x, values.row(r).transpose(), mask, cdata, data_acc, grad);
        continue;
      }
      detail::splat_point(field, x, with_pde, with_pde, pt);
      gv.setZero();
      if (with_pde) {
        gJ = Eigen::MatrixXd::Zero(p, q);
        gH = Eigen::MatrixXd::Zero(p, q);
      }
      if (is_data) {
        for (int a = 0; a < p; ++a) {
          const double diff = mask[a] * (pt.value[a] - values(r, a));
          data_acc += diff * diff;
          gv[a] = 2.0 * mask[a] * diff * cdata;
        }
      }
      if (with_pde && !pt.act.onehot)
        pde_acc += residual_adjoints(pt, spec, cpde, gv, gJ, gH);
      backward_point(field, pt, with_pde, gv, gJ, gH, grad);
    }
    grad_parts[static_cast<size_t>(c)] = std::move(grad);
    data_parts[static_cast<size_t>(c)] = data_acc;
    pde_parts[static_cast<size_t>(c)] = pde_acc;
  });

  LossGradient out;
  out.grad = Eigen::VectorXd::Zero(field.param_count());
  double data_sum = 0.0, pde_sum = 0.0;
  for (std::int64_t c = 0; c < nchunks; ++c) {
    out.grad += grad_parts[static_cast<size_t>(c)];
    data_sum += data_parts[static_cast<size_t>(c)];
    pde_sum += pde_parts[static_cast<size_t>(c)];
  }
  out.data = data_sum * cdata;
  out.pde = with_pde ? pde_sum / static_cast<double>(k_data + k_extra) : 0.0;
  out.total = out.data + options.lambda * out.pde;

  out.position_grad.resize(field.size(), q);
  const int stride = field.params_per_gaussian();
  for (int i = 0; i < field.size(); ++i)
    for (int j = 0; j < q; ++j)
      out.position_grad(i, j) = out.grad[static_cast<Eigen::Index>(i) * stride + j];
  return out;
}

}  // namespace ngs
