#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ngsplat/dataset.hpp"
#include "ngsplat/parallel.hpp"

namespace ngs {

namespace {

// u(x,0) = -sin(πx) extended periodically (period 2, odd). The Cole-Hopf
// potential is φ₀(y) = exp(-(1/2ν)∫₀ʸ u₀) = exp((1-cos πy)/(2πν)), also
// periodic, so the infinite-domain heat solution reduces to a single
// period convolved with the wrapped kernel. Only the images m ∈ {-1,0,1}
// matter: the m = ±2 kernels are at distance ≥ 2, giving exponents below
// -300 even against the e^{1/(πν)} range of φ₀.
struct ColeHopfTable {
  std::vector<double> y;
  std::vector<double> log_phi0;
};

ColeHopfTable make_table(double nu, int m_points) {
  ColeHopfTable t;
  t.y.resize(m_points);
  t.log_phi0.resize(m_points);
  const double dy = 2.0 / m_points;
  for (int i = 0; i < m_points; ++i) {
    const double y = -1.0 + i * dy;
    t.y[i] = y;
    t.log_phi0[i] = (1.0 - std::cos(M_PI * y)) / (2.0 * M_PI * nu);
  }
  return t;
}

double cole_hopf_point(const ColeHopfTable& tab, double x, double t, double nu) {
  if (t <= 0.0) return -std::sin(M_PI * x);
  const double denom = 4.0 * nu * t;
  const int m_points = static_cast<int>(tab.y.size());

  // Locate the max exponent first so the ratio is computed on a stable
  // scale.
  double emax = -std::numeric_limits<double>::infinity();
  for (int img = -1; img <= 1; ++img) {
    for (int i = 0; i < m_points; ++i) {
      const double d = x - tab.y[i] - 2.0 * img;
      const double e = -d * d / denom + tab.log_phi0[i];
      if (e > emax) emax = e;
    }
  }
  double num = 0.0, den = 0.0;
  for (int img = -1; img <= 1; ++img) {
    for (int i = 0; i < m_points; ++i) {
      const double d = x - tab.y[i] - 2.0 * img;
      const double e = -d * d / denom + tab.log_phi0[i] - emax;
      if (e < -745.0) continue;
      const double w = std::exp(e);
      num += w * (d / t);
      den += w;
    }
  }
  return num / den;
}

// Constant-coefficient tridiagonal solve (Thomas), factored once.
struct Tridiag {
  std::vector<double> c_prime;  // modified upper diagonal
  double lower, diag, upper;
  int n;

  Tridiag(int n_, double lower_, double diag_, double upper_)
      : lower(lower_), diag(diag_), upper(upper_), n(n_) {
    c_prime.resize(n);
    c_prime[0] = upper / diag;
    for (int i = 1; i < n; ++i) c_prime[i] = upper / (diag - lower * c_prime[i - 1]);
  }

  void solve(std::vector<double>& rhs) const {
    rhs[0] /= diag;
    for (int i = 1; i < n; ++i)
      rhs[i] = (rhs[i] - lower * rhs[i - 1]) / (diag - lower * c_prime[i - 1]);
    for (int i = n - 2; i >= 0; --i) rhs[i] -= c_prime[i] * rhs[i + 1];
  }
};

// Crank-Nicolson diffusion with explicit-trapezoid advection on a fine
// uniform grid with homogeneous Dirichlet ends; second order in both
// space and time.
class BurgersSolver {
 public:
  BurgersSolver(int n_total, double nu) : n_(n_total), nu_(nu) {
    dx_ = 2.0 / (n_ - 1);
    u_.resize(n_);
    for (int i = 0; i < n_; ++i) u_[i] = -std::sin(M_PI * (-1.0 + i * dx_));
  }

  void advance(double t_target, double dt_hint) {
    const int interior = n_ - 2;
    while (t_ < t_target - 1e-15) {
      const double dt = std::min(dt_hint, t_target - t_);
      if (dt != dt_cached_) {
        const double alpha = nu_ * dt / (2.0 * dx_ * dx_);
        lhs_ = std::make_unique<Tridiag>(interior, -alpha, 1.0 + 2.0 * alpha, -alpha);
        alpha_ = alpha;
        dt_cached_ = dt;
      }
      step(dt);
      t_ += dt;
    }
  }

  double sample(double x) const {
    // The callers arrange for x to sit on the grid; interpolate linearly
    // as a safety net.
    const double pos = (x + 1.0) / dx_;
    const long i = std::lround(pos);
    if (std::abs(pos - i) < 1e-9) return u_[static_cast<size_t>(std::clamp<long>(i, 0, n_ - 1))];
    const long lo = std::clamp<long>(static_cast<long>(std::floor(pos)), 0, n_ - 2);
    const double f = pos - lo;
    return (1.0 - f) * u_[lo] + f * u_[lo + 1];
  }

 private:
  void advection(const std::vector<double>& u, std::vector<double>& out) const {
    for (int i = 1; i < n_ - 1; ++i) out[i] = -u[i] * (u[i + 1] - u[i - 1]) / (2.0 * dx_);
  }

  void diffusion_explicit_half(const std::vector<double>& u, std::vector<double>& rhs,
                               double) const {
    for (int i = 1; i < n_ - 1; ++i)
      rhs[i - 1] = u[i] + alpha_ * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
  }

  void step(double dt) {
    std::vector<double> adv_n(n_, 0.0), adv_s(n_, 0.0), rhs(n_ - 2), base(n_ - 2);
    advection(u_, adv_n);
    diffusion_explicit_half(u_, base, dt);

    // Predictor.
    for (int i = 1; i < n_ - 1; ++i) rhs[i - 1] = base[i - 1] + dt * adv_n[i];
    lhs_->solve(rhs);
    std::vector<double> u_star(n_, 0.0);
    for (int i = 1; i < n_ - 1; ++i) u_star[i] = rhs[i - 1];

    // Corrector.
    advection(u_star, adv_s);
    for (int i = 1; i < n_ - 1; ++i)
      rhs[i - 1] = base[i - 1] + 0.5 * dt * (adv_n[i] + adv_s[i]);
    lhs_->solve(rhs);
    for (int i = 1; i < n_ - 1; ++i) u_[i] = rhs[i - 1];
  }

  int n_;
  double nu_;
  double dx_ = 0.0;
  double t_ = 0.0;
  double dt_cached_ = -1.0;
  double alpha_ = 0.0;
  std::unique_ptr<Tridiag> lhs_;
  std::vector<double> u_;
};

}  // namespace

Eigen::MatrixXd burgers_cole_hopf(const Eigen::VectorXd& xs, const Eigen::VectorXd& ts,
                                  double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("burgers: nu must be positive");
  const ColeHopfTable tab = make_table(nu, 4096);
  Eigen::MatrixXd out(xs.size(), ts.size());
  for_chunks(xs.size(), 0, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i)
      for (Eigen::Index j = 0; j < ts.size(); ++j)
        out(i, j) = cole_hopf_point(tab, xs[i], ts[j], nu);
  });
  return out;
}

Eigen::MatrixXd burgers_finite_difference(const Eigen::VectorXd& xs, const Eigen::VectorXd& ts,
                                          double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("burgers: nu must be positive");
  const int nx = static_cast<int>(xs.size());
  if (nx < 2) throw std::invalid_argument("burgers: need at least two x samples");
  // Refine the requested grid so samples are exact grid points.
  const int refine = std::max(1, (32768 + nx - 2) / (nx - 1));
  const int n_fine = refine * (nx - 1) + 1;
  BurgersSolver solver(n_fine, nu);

  Eigen::MatrixXd out(nx, ts.size());
  std::vector<Eigen::Index> order(ts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return ts[a] < ts[b]; });
  for (Eigen::Index j : order) {
    solver.advance(ts[j], 2e-5);
    for (int i = 0; i < nx; ++i) out(i, j) = solver.sample(xs[i]);
  }
  return out;
}

FieldDataset generate_burgers(int nx, int nt, const BurgersOptions& opts) {
  if (nx < 8 || nt < 8) throw std::invalid_argument("burgers: nx and nt must be >= 8");
  if (!(opts.t_end > 0.0)) throw std::invalid_argument("burgers: t_end must be positive");

  Eigen::VectorXd xs(nx), ts(nt);
  const double dx = 2.0 / (nx - 1);
  const double dt = opts.t_end / (nt - 1);
  for (int i = 0; i < nx; ++i) xs[i] = -1.0 + i * dx;
  for (int j = 0; j < nt; ++j) ts[j] = j * dt;

  const Eigen::MatrixXd ch = burgers_cole_hopf(xs, ts, opts.nu);
  const Eigen::MatrixXd fd = burgers_finite_difference(xs, ts, opts.nu);
  const double max_err = (ch - fd).cwiseAbs().maxCoeff();
  if (max_err > opts.cross_check_tol)
    throw std::runtime_error(
        "burgers: reference oracles disagree (max |Cole-Hopf - finite difference| = " +
        std::to_string(max_err) + " > " + std::to_string(opts.cross_check_tol) +
        "); refusing to emit unverified truth");

  FieldDataset ds;
  ds.coords.resize(static_cast<Eigen::Index>(nx) * nt, 2);
  ds.values.resize(static_cast<Eigen::Index>(nx) * nt, 1);
  ds.mask = Eigen::VectorXd::Ones(1);
  Eigen::Index r = 0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nt; ++j, ++r) {
      ds.coords(r, 0) = xs[i];
      ds.coords(r, 1) = ts[j];
      ds.values(r, 0) = ch(i, j);
    }
  GridMeta grid;
  grid.axis_counts = {nx, nt};
  grid.spacing = {dx, dt};
  grid.origin = {-1.0, 0.0};
  grid.time_axis = 1;
  ds.grid = grid;
  ds.physics.viscosity = opts.nu;
  ds.validate();
  return ds;
}

}  // namespace ngs
