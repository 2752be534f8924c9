#include "adaptobs/observer.hpp"

#include "adaptobs/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace adaptobs {

Saturation parse_saturation(const std::string& name) {
  if (name == "tanh") return Saturation::Tanh;
  if (name == "clip") return Saturation::Clip;
  throw std::invalid_argument("unknown saturation '" + name + "' (expected tanh or clip)");
}

std::string to_string(Saturation s) { return s == Saturation::Tanh ? "tanh" : "clip"; }

double saturate(Saturation s, double v) {
  switch (s) {
    case Saturation::Tanh:
      return std::tanh(v);
    case Saturation::Clip:
      return std::clamp(v, -1.0, 1.0);
  }
  return 0.0;
}

double saturation_bound(Saturation) { return 1.0; }

void ObserverConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("observer: " + msg); };
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (!(gamma_theta > 0.0)) fail("gamma_theta must be positive");
  if (!(gamma >= 0.0)) fail("gamma must be nonnegative");
  if (!(epsilon >= 0.0)) fail("epsilon must be nonnegative");
  if (omega.size() != s()) fail("need one frequency per nonlinear parameter");
  for (std::size_t j = 0; j < omega.size(); ++j) {
    if (!(omega[j] > 0.0)) fail("frequencies must be positive");
    for (std::size_t k = 0; k < j; ++k)
      if (omega[j] == omega[k]) fail("frequencies must be pairwise distinct");
  }
  for (const auto& b : lambda_box)
    if (!(b.hi > b.lo)) fail("empty lambda interval");
  if (!torus_angle.empty() && torus_angle.size() != s()) fail("torus_angle size mismatch");
  const double S = saturation_bound(sigma);
  for (int k = 0; k <= 2000; ++k) {
    const double v = 1e-4 * std::pow(10.0, 8.0 * k / 2000.0);
    const double sv = saturate(sigma, v);
    if (sv < 0.0 || sv > v * (1.0 + 1e-12) || sv > S) fail("saturation violates 0 <= sigma(v) <= min(v, S)");
  }
  if (saturate(sigma, 0.0) != 0.0) fail("saturation must vanish at zero");
}

std::vector<double> default_omega(std::size_t s) {
  if (s == 1) return {1.0};
  if (s == 2) return {std::numbers::pi, 2.0 * std::numbers::sqrt2};
  std::vector<double> out;
  for (int cand = 2; out.size() < s; ++cand) {
    bool prime = true;
    for (int q = 2; q * q <= cand; ++q)
      if (cand % q == 0) prime = false;
    if (prime) out.push_back(std::sqrt(static_cast<double>(cand)));
  }
  return out;
}

double torus_angle_for(double value, const Interval& box) {
  if (!box.contains(value)) throw DomainFault("initial lambda outside its box");
  const double x1 = std::clamp(2.0 * (value - box.lo) / box.width() - 1.0, -1.0, 1.0);
  return std::asin(-x1);
}

StateVector ObserverState::pack() const {
  const auto d = theta_hat.size();
  const auto s = torus_x1.size();
  const auto n = x_hat.size();
  StateVector z(2 + d + 2 * s + n);
  z[0] = x0_hat;
  z.segment(1, d) = theta_hat;
  z.segment(1 + d, s) = torus_x1;
  z.segment(1 + d + s, s) = torus_x2;
  z.segment(1 + d + 2 * s, n) = x_hat;
  z[z.size() - 1] = warp;
  return z;
}

ObserverState ObserverState::unpack(const StateVector& z, std::size_t d, std::size_t s, std::size_t n) {
  if (static_cast<std::size_t>(z.size()) != packed_size(d, s, n))
    throw std::invalid_argument("observer state has wrong packed size");
  const auto D = static_cast<Eigen::Index>(d);
  const auto S = static_cast<Eigen::Index>(s);
  const auto N = static_cast<Eigen::Index>(n);
  ObserverState o;
  o.x0_hat = z[0];
  o.theta_hat = z.segment(1, D);
  o.torus_x1 = z.segment(1 + D, S);
  o.torus_x2 = z.segment(1 + D + S, S);
  o.x_hat = z.segment(1 + D + 2 * S, N);
  o.warp = z[z.size() - 1];
  return o;
}

ObserverState initial_observer_state(const PlantSpec& spec, const ObserverConfig& cfg, double y0) {
  const std::size_t d = spec.regressor_dim();
  const std::size_t s = cfg.s();
  ObserverState o;
  o.x0_hat = y0;
  if (cfg.theta_init.size() == 0) {
    o.theta_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  } else {
    if (static_cast<std::size_t>(cfg.theta_init.size()) != d)
      throw std::invalid_argument("observer: theta_init size mismatch");
    o.theta_hat = cfg.theta_init;
  }
  o.torus_x1.resize(static_cast<Eigen::Index>(s));
  o.torus_x2.resize(static_cast<Eigen::Index>(s));
  for (std::size_t j = 0; j < s; ++j) {
    const double a = cfg.torus_angle.empty() ? 0.0 : cfg.torus_angle[j];
    o.torus_x1[static_cast<Eigen::Index>(j)] = -std::sin(a);
    o.torus_x2[static_cast<Eigen::Index>(j)] = std::cos(a);
  }
  o.x_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.n()));
  return o;
}

double deadzone_norm(double v, double epsilon) {
  const double a = std::abs(v);
  return a > epsilon ? a - epsilon : 0.0;
}

double deadzone_norm(const Eigen::VectorXd& v, double epsilon) {
  const double a = v.norm();
  return a > epsilon ? a - epsilon : 0.0;
}

double lambda_from_torus(double x1, const Interval& box) {
  constexpr double tol = 1e-6;
  if (!(std::abs(x1) <= 1.0 + tol)) {
    std::ostringstream msg;
    msg << "torus coordinate " << x1 << " left [-1, 1]";
    throw InvariantFault(msg.str());
  }
  x1 = std::clamp(x1, -1.0, 1.0);
  return box.lo + 0.5 * box.width() * (x1 + 1.0);
}

Eigen::VectorXd lambda_from_torus(const Eigen::VectorXd& x1, const std::vector<Interval>& box) {
  Eigen::VectorXd out(x1.size());
  for (Eigen::Index j = 0; j < x1.size(); ++j) out[j] = lambda_from_torus(x1[j], box[static_cast<std::size_t>(j)]);
  return out;
}

ObserverState observer_rhs(const ObserverState& obs, const ObserverConfig& cfg, double y,
                           const Eigen::VectorXd& phibar, double c0_val, double u_val, double) {
  const double err = obs.x0_hat - y;
  const double e = saturate(cfg.sigma, deadzone_norm(err, cfg.epsilon));
  ObserverState d;
  d.x0_hat = -cfg.alpha * err + obs.theta_hat.dot(phibar) + c0_val + u_val;
  d.theta_hat = -cfg.gamma_theta * err * phibar;
  const auto s = obs.torus_x1.size();
  d.torus_x1.resize(s);
  d.torus_x2.resize(s);
  for (Eigen::Index j = 0; j < s; ++j) {
    const double a = obs.torus_x1[j];
    const double b = obs.torus_x2[j];
    const double r2 = a * a + b * b;
    const double g = cfg.gamma * cfg.omega[static_cast<std::size_t>(j)] * e;
    d.torus_x1[j] = g * (a - b - a * r2);
    d.torus_x2[j] = g * (a + b - b * r2);
  }
  d.x_hat = Eigen::VectorXd::Zero(obs.x_hat.size());
  d.warp = cfg.gamma * e;
  return d;
}

Eigen::VectorXd state_reconstruction_rhs(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& theta_hat,
                                         const Eigen::VectorXd& lambda_hat, double y, double t,
                                         const PlantSpec& spec) {
  Eigen::VectorXd dx(x_hat.size());
  std::array<double, 32> phi{};
  for (std::size_t i = 1; i <= spec.n(); ++i) {
    const auto& ch = spec.channels[i];
    const double tau = lambda_hat[static_cast<Eigen::Index>(ch.tau_index)];
    const double beta = eval_beta(spec, i, y, tau, t);
    eval_phi(spec, i, y, lambda_hat, t, std::span<double>(phi.data(), ch.phi_dim));
    double lin = 0.0;
    const std::size_t off = spec.theta_offset(i);
    for (std::size_t k = 0; k < ch.phi_dim; ++k) lin += theta_hat[static_cast<Eigen::Index>(off + k)] * phi[k];
    const auto xi = static_cast<Eigen::Index>(i - 1);
    dx[xi] = -beta * x_hat[xi] + lin;
  }
  return dx;
}

double renormalize_torus(ObserverState& obs) {
  double drift = 0.0;
  for (Eigen::Index j = 0; j < obs.torus_x1.size(); ++j) {
    const double r2 = obs.torus_x1[j] * obs.torus_x1[j] + obs.torus_x2[j] * obs.torus_x2[j];
    drift = std::max(drift, std::abs(r2 - 1.0));
    const double r = std::sqrt(r2);
    if (!(r > 0.0)) throw InvariantFault("torus pair collapsed to the origin");
    obs.torus_x1[j] /= r;
    obs.torus_x2[j] /= r;
  }
  return drift;
}

}  // namespace adaptobs
