#include "adaptobs/plant.hpp"

#include "adaptobs/errors.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace adaptobs {

std::size_t PlantSpec::regressor_dim() const {
  std::size_t d = 0;
  for (const auto& ch : channels) d += ch.phi_dim;
  return d;
}

std::size_t PlantSpec::theta_offset(std::size_t i) const {
  std::size_t off = 0;
  for (std::size_t k = 0; k < i; ++k) off += channels.at(k).phi_dim;
  return off;
}

void PlantSpec::validate() const {
  auto fail = [&](const std::string& msg) { throw std::invalid_argument("plant '" + name + "': " + msg); };
  if (channels.empty()) fail("needs at least the output row");
  const std::size_t s = lambda_dim();
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto& ch = channels[i];
    if (ch.phi_dim > 0 && !ch.phi) fail("row " + std::to_string(i) + " declares phi but has no callback");
    for (auto idx : ch.p_index)
      if (idx >= s) fail("row " + std::to_string(i) + " p index out of range");
    for (auto idx : ch.q_index)
      if (idx >= s) fail("row " + std::to_string(i) + " q index out of range");
    if (ch.p_index.size() > ParamPack::kCapacity || ch.q_index.size() > ParamPack::kCapacity)
      fail("too many parameters in one callback");
    if (i > 0) {
      if (!ch.beta) fail("filtered row " + std::to_string(i) + " has no relaxation rate");
      if (!ch.coupling) fail("filtered row " + std::to_string(i) + " has no coupling c_i");
      if (ch.tau_index >= s) fail("row " + std::to_string(i) + " tau index out of range");
    }
  }
  if (static_cast<std::size_t>(theta_true.size()) != regressor_dim())
    fail("theta has " + std::to_string(theta_true.size()) + " entries, rows declare " +
         std::to_string(regressor_dim()));
  if (theta_box.size() != static_cast<std::size_t>(theta_true.size())) fail("theta_box size mismatch");
  if (lambda_box.size() != s) fail("lambda_box size mismatch");
  if (static_cast<std::size_t>(x_init.size()) != state_dim()) fail("x_init size mismatch");
  for (std::size_t j = 0; j < s; ++j) {
    if (!(lambda_box[j].hi > lambda_box[j].lo)) fail("empty lambda interval " + std::to_string(j));
    if (!lambda_box[j].contains(lambda_true[j])) fail("lambda_true outside its box at " + std::to_string(j));
  }
  for (std::size_t j = 0; j < theta_box.size(); ++j) {
    if (!(theta_box[j].hi >= theta_box[j].lo)) fail("empty theta interval " + std::to_string(j));
    if (!theta_box[j].contains(theta_true[j])) fail("theta_true outside its box at " + std::to_string(j));
  }
}

ParamPack::ParamPack(const Eigen::VectorXd& lambda, const std::vector<std::size_t>& index)
    : size_(index.size()) {
  for (std::size_t k = 0; k < size_; ++k) buf_[k] = lambda[static_cast<Eigen::Index>(index[k])];
}

void eval_phi(const PlantSpec& spec, std::size_t i, double x0, const Eigen::VectorXd& lambda,
              double t, std::span<double> out) {
  const auto& ch = spec.channels[i];
  if (ch.phi_dim == 0) return;
  ParamPack p(lambda, ch.p_index);
  ch.phi(x0, p.view(), t, out);
}

double eval_beta(const PlantSpec& spec, std::size_t i, double x0, double tau, double t) {
  const double b = spec.channels[i].beta(x0, tau, t);
  if (!(b > 0.0) || !std::isfinite(b)) {
    std::ostringstream msg;
    msg << "relaxation rate beta_" << i << " = " << b << " is not positive at x0=" << x0
        << ", tau=" << tau << ", t=" << t;
    throw ModelViolation(msg.str());
  }
  return b;
}

double eval_coupling(const PlantSpec& spec, std::size_t i, double x0,
                     const Eigen::VectorXd& lambda, double t) {
  const auto& ch = spec.channels[i];
  if (!ch.coupling) return 0.0;
  ParamPack q(lambda, ch.q_index);
  return ch.coupling(x0, q.view(), t);
}

double eval_input(const PlantSpec& spec, double t) { return spec.u ? spec.u(t) : 0.0; }

double eval_disturbance(const PlantSpec& spec, std::size_t i, double t) {
  const auto& xi = spec.channels[i].xi;
  return xi ? xi(t) : 0.0;
}

void plant_rhs(const PlantSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
               double t, const StateVector& x, StateVector& dxdt) {
  const std::size_t rows = spec.state_dim();
  if (static_cast<std::size_t>(x.size()) != rows)
    throw std::invalid_argument("plant_rhs: state has wrong dimension");
  dxdt.resize(static_cast<Eigen::Index>(rows));

  std::array<double, 32> phi_buf{};
  const double x0 = x[0];
  std::size_t off = 0;
  double dx0 = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& ch = spec.channels[i];
    if (ch.phi_dim > phi_buf.size()) throw std::invalid_argument("plant_rhs: phi dimension too large");
    std::span<double> phi(phi_buf.data(), ch.phi_dim);
    eval_phi(spec, i, x0, lambda, t, phi);
    double lin = 0.0;
    for (std::size_t k = 0; k < ch.phi_dim; ++k) lin += theta[static_cast<Eigen::Index>(off + k)] * phi[k];
    off += ch.phi_dim;

    if (i == 0) {
      dx0 += lin + eval_coupling(spec, 0, x0, lambda, t) + eval_disturbance(spec, 0, t) + eval_input(spec, t);
    } else {
      const double tau = lambda[static_cast<Eigen::Index>(ch.tau_index)];
      const double beta = eval_beta(spec, i, x0, tau, t);
      const auto xi = static_cast<Eigen::Index>(i);
      dxdt[xi] = -beta * x[xi] + lin + eval_disturbance(spec, i, t);
      dx0 += eval_coupling(spec, i, x0, lambda, t) * x[xi];
    }
  }
  dxdt[0] = dx0;
}

StateVector plant_rhs(const PlantSpec& spec, double t, const StateVector& x) {
  StateVector dx(x.size());
  plant_rhs(spec, spec.theta_true, spec.lambda_true, t, x, dx);
  return dx;
}

VectorField plant_field(const PlantSpec& spec) {
  return [&spec](double t, const StateVector& x, StateVector& dx) {
    plant_rhs(spec, spec.theta_true, spec.lambda_true, t, x, dx);
  };
}

double output(const StateVector& x) { return x.size() > 0 ? x[0] : 0.0; }

std::pair<double, double> bioreactor_transform(double s0, double s1, double r_max, double b) {
  if (r_max == 0.0 || b == 0.0) throw DomainFault("bio-reactor transform is singular for r_max = 0 or b = 0");
  return {s0, r_max * (b * s1 + s0)};
}

std::pair<double, double> bioreactor_inverse(double x0, double x1, double r_max, double b) {
  if (r_max == 0.0 || b == 0.0) throw DomainFault("bio-reactor transform is singular for r_max = 0 or b = 0");
  return {x0, (x1 / r_max - x0) / b};
}

std::pair<double, double> lotka_volterra_transform(double x, double y, double delta) {
  return {x, y + delta * x};
}

std::pair<double, double> lotka_volterra_inverse(double x0, double x1, double delta) {
  return {x0, x1 - delta * x0};
}

}  // namespace adaptobs
