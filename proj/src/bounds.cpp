#include "adaptobs/bounds.hpp"

#include "adaptobs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace adaptobs {

namespace {

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0)) throw DomainFault(std::string(name) + " must be nonnegative");
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw DomainFault(std::string(name) + " must be positive");
}

std::vector<double> logspace(double lo, double hi, std::size_t points) {
  std::vector<double> out(points);
  if (points == 1) {
    out[0] = std::sqrt(lo * hi);
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t k = 0; k < points; ++k)
    out[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1));
  return out;
}

}  // namespace

double delta_total(double theta_norm, double delta_phi, double delta_xi) {
  require_nonnegative(theta_norm, "theta_norm");
  require_nonnegative(delta_phi, "Delta_phi");
  require_nonnegative(delta_xi, "Delta_xi");
  return theta_norm * delta_phi + delta_xi;
}

double pe_gamma_cap(double mu, double B, double D, double L, double M) {
  require_positive(mu, "mu");
  require_positive(B, "B");
  require_positive(D, "D");
  require_positive(L, "L");
  require_positive(M, "M");
  return mu / (4.0 * B * D * L * M);
}

double gamma_g_term(const BoundInputs& in, double d, double psi) {
  if (!(d > 0.0 && d < 1.0)) throw DomainFault("d must lie in (0, 1)");
  if (!(psi > 1.0)) throw DomainFault("psi must exceed 1");
  require_positive(in.rho, "rho");
  require_positive(in.D_rho, "D_rho");
  require_positive(in.D_lambda, "D_lambda");
  const double lip = in.theta_norm * in.D + in.D_c;
  require_positive(lip, "||theta|| D + D_c");
  const double log_term = std::log(2.0 * psi * in.D_rho / d);
  if (!(log_term > 0.0)) return 0.0;
  return (psi - 1.0) / psi * in.rho * in.rho / log_term / (2.0 * lip * in.D_rho * in.D_lambda) /
         (1.0 + in.D_rho * psi / (1.0 - d));
}

GammaStar gamma_star(const BoundInputs& in, const std::vector<double>& d_grid, const std::vector<double>& psi_grid) {
  if (d_grid.empty() || psi_grid.empty()) throw DomainFault("gamma_star: empty (d, psi) grid");
  GammaStar out;
  out.d_points = d_grid.size();
  out.psi_points = psi_grid.size();
  out.pe_cap = pe_gamma_cap(in.mu, in.B, in.D, in.L, in.M);
  out.g = -1.0;
  for (double d : d_grid) {
    for (double psi : psi_grid) {
      const double g = gamma_g_term(in, d, psi);
      if (g > out.g) {
        out.g = g;
        out.best_d = d;
        out.best_psi = psi;
      }
    }
  }
  out.value = std::min(out.pe_cap, out.g);
  return out;
}

std::vector<double> default_d_grid(std::size_t points) { return logspace(1e-3, 0.999, points); }

std::vector<double> default_psi_grid(std::size_t points) {
  auto g = logspace(1e-3, 99.0, points);
  for (auto& v : g) v += 1.0;
  return g;
}

double theta_error_bound(double kappa, double D, double D_c, double theta_norm, double lambda_err, double delta) {
  require_nonnegative(kappa, "kappa");
  require_nonnegative(D, "D");
  require_nonnegative(D_c, "D_c");
  require_nonnegative(theta_norm, "theta_norm");
  require_nonnegative(lambda_err, "lambda_err");
  require_nonnegative(delta, "Delta");
  return kappa * ((D * theta_norm + D_c) * lambda_err + 2.0 * delta);
}

double ltv_residual_bound(double epsilon, double dU, double beta_cb, double delta) {
  require_positive(beta_cb, "beta");
  require_nonnegative(epsilon, "epsilon");
  require_nonnegative(dU, "dU");
  require_nonnegative(delta, "delta");
  return 2.0 * std::sqrt(6.0 * epsilon * dU / beta_cb) + delta;
}

double inverse_decreasing(const std::function<double(double)>& f, double target, double tol) {
  const double f0 = f(0.0);
  if (!(target > 0.0) || !(target < f0)) {
    std::ostringstream msg;
    msg << "inverse: target " << target << " outside (0, " << f0 << ")";
    throw DomainFault(msg.str());
  }
  double lo = 0.0;
  double hi = 1.0;
  while (f(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e15) throw DomainFault("inverse: target not reached");
  }
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

CascadeBounds cascade_bounds(const std::function<double(double)>& beta_fn, double c1, double c2,
                             double d1, double d2, double x0_norm, double y0_norm, double h0,
                             double kappa, double d) {
  if (!(kappa > 1.0)) throw DomainFault("kappa must exceed 1");
  if (!(d > 0.0 && d < 1.0)) throw DomainFault("d must lie in (0, 1)");
  require_positive(h0, "h0");
  for (double v : {c1, c2, d1, d2, x0_norm, y0_norm}) require_nonnegative(v, "cascade constant");
  const double b0 = beta_fn(0.0);
  CascadeBounds out;
  out.beta_inverse = inverse_decreasing(beta_fn, d / (2.0 * kappa));
  const double denom = b0 * (x0_norm + y0_norm) + (c1 + c2) * h0 * (1.0 + kappa * b0 / (1.0 - d));
  out.gamma_max = (kappa - 1.0) / kappa / out.beta_inverse * h0 / denom;
  out.epsilon_min = (b0 / (1.0 - d / kappa) + 1.0) * (d1 + d2);
  return out;
}

RegressorConstants estimate_regressor_constants(const SeriesFn& regressor, const SeriesFn& c0,
                                                const std::vector<Eigen::VectorXd>& grid, double probe_fraction) {
  if (grid.empty()) throw DomainFault("estimate_regressor_constants: empty grid");
  RegressorConstants out;
  std::vector<Series> phi;
  std::vector<Series> c;
  for (const auto& lam : grid) {
    phi.push_back(regressor(lam));
    if (c0) c.push_back(c0(lam));
    if (phi.back().values.size() > 0) out.B = std::max(out.B, phi.back().values.colwise().norm().maxCoeff());
  }
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (std::size_t b = a + 1; b < grid.size(); ++b) {
      const double dl = (grid[a] - grid[b]).norm();
      if (dl == 0.0) continue;
      if (phi[a].values.cols() != phi[b].values.cols()) throw std::invalid_argument("series must share their sample grid");
      if (phi[a].values.size() > 0)
        out.D = std::max(out.D, (phi[a].values - phi[b].values).colwise().norm().maxCoeff() / dl);
      if (c0 && c[a].values.size() > 0)
        out.D_c = std::max(out.D_c, (c[a].values - c[b].values).colwise().norm().maxCoeff() / dl);
    }
  }
  if (!(probe_fraction > 0.0)) return out;

  // Local probes: chords between grid nodes miss steep local slopes when the grid is coarse.
  const Eigen::Index s = grid.front().size();
  Eigen::VectorXd lo = grid.front(), hi = grid.front();
  for (const auto& lam : grid) {
    lo = lo.cwiseMin(lam);
    hi = hi.cwiseMax(lam);
  }
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (Eigen::Index j = 0; j < s; ++j) {
      const double span = hi[j] - lo[j];
      if (span <= 0.0) continue;
      const double step = probe_fraction * span;
      Eigen::VectorXd probe = grid[a];
      probe[j] += (grid[a][j] + step <= hi[j]) ? step : -step;
      const Series pp = regressor(probe);
      if (pp.values.cols() != phi[a].values.cols()) throw std::invalid_argument("series must share their sample grid");
      if (pp.values.size() > 0) out.D = std::max(out.D, (pp.values - phi[a].values).colwise().norm().maxCoeff() / step);
      if (c0) {
        const Series cp = c0(probe);
        if (cp.values.size() > 0) out.D_c = std::max(out.D_c, (cp.values - c[a].values).colwise().norm().maxCoeff() / step);
      }
    }
  }
  return out;
}

StabilityFit estimate_stability(const Series& phibar, double alpha, double gamma_theta) {
  require_positive(alpha, "alpha");
  require_positive(gamma_theta, "gamma_theta");
  const std::size_t N = phibar.size();
  if (N < 3) throw DomainFault("estimate_stability: series too short");
  const Eigen::Index d = phibar.values.rows();
  const Eigen::Index m = d + 1;
  const double h = phibar.h;

  auto A = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    a(0, 0) = -alpha;
    a.block(0, 1, 1, d) = p.transpose();
    a.block(1, 0, d, 1) = -gamma_theta * p;
    return a;
  };

  Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(m, m);
  std::vector<double> ts;
  std::vector<double> logs;
  ts.reserve(N);
  logs.reserve(N);
  ts.push_back(0.0);
  logs.push_back(std::log(Phi.norm()));
  for (std::size_t k = 0; k + 1 < N; ++k) {
    const Eigen::VectorXd p0 = phibar.values.col(static_cast<Eigen::Index>(k));
    const Eigen::VectorXd p1 = phibar.values.col(static_cast<Eigen::Index>(k + 1));
    const Eigen::MatrixXd A0 = A(p0);
    const Eigen::MatrixXd Am = A(0.5 * (p0 + p1));
    const Eigen::MatrixXd A1 = A(p1);
    const Eigen::MatrixXd k1 = A0 * Phi;
    const Eigen::MatrixXd k2 = Am * (Phi + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = Am * (Phi + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = A1 * (Phi + h * k3);
    Phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double nrm = Phi.norm();
    if (!std::isfinite(nrm) || nrm <= 0.0) throw DomainFault("estimate_stability: transition matrix degenerated");
    ts.push_back(static_cast<double>(k + 1) * h);
    logs.push_back(std::log(nrm));
  }

  const double n = static_cast<double>(ts.size());
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    st += ts[k];
    sl += logs[k];
    stt += ts[k] * ts[k];
    stl += ts[k] * logs[k];
  }
  const double slope = (n * stl - st * sl) / (n * stt - st * st);
  const double icpt = (sl - slope * st) / n;
  StabilityFit fit;
  fit.rho = -slope;
  fit.horizon = ts.back();
  if (!(fit.rho > 0.0)) throw DomainFault("estimate_stability: no exponential decay detected");
  double res2 = 0.0;
  double env = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double r = logs[k] - (icpt + slope * ts[k]);
    res2 += r * r;
    env = std::max(env, logs[k] + fit.rho * ts[k]);
  }
  fit.residual = std::sqrt(res2 / n);
  fit.D_rho = std::exp(env);
  return fit;
}

double max_rate(const Series& v) {
  double out = 0.0;
  for (Eigen::Index k = 0; k + 1 < v.values.cols(); ++k)
    out = std::max(out, (v.values.col(k + 1) - v.values.col(k)).norm() / v.h);
  return out;
}

}  // namespace adaptobs
