#pragma once

// Plants of the form
//   x0' = theta_0^T phi_0(x0, p_0, t) + sum_i c_i(x0, q_i, t) x_i + c_0(x0, q_0, t) + xi_0(t) + u(t)
//   xi' = -beta_i(x0, tau_i, t) x_i + theta_i^T phi_i(x0, p_i, t) + xi_i(t),   i = 1..n
// with y = x0 the only measured signal.

#include "adaptobs/ode.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adaptobs {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

using ParamView = std::span<const double>;

// Writes phi_i(x0, p_i, t) into `out` (length d_i).
using PhiFn = std::function<void(double x0, ParamView p, double t, std::span<double> out)>;
using BetaFn = std::function<double(double x0, double tau, double t)>;
using CouplingFn = std::function<double(double x0, ParamView q, double t)>;
using Signal = std::function<double(double t)>;

// One row of the system. Row 0 is the measured equation: its `coupling` is the additive c_0
// term and it has no relaxation rate. Rows i >= 1 are filtered states: `coupling` is the c_i
// multiplying x_i in the x0 equation and `beta` is the relaxation rate.
//
// Parameters are referenced by index into the nonlinear parameter vector lambda, so that a
// physical constant shared by several callbacks (the bio-reactor half-saturation constant is
// p_0, q_0 and q_1 at once) is estimated once.
struct PlantChannel {
  std::size_t phi_dim = 0;
  std::vector<std::size_t> p_index;
  std::vector<std::size_t> q_index;
  PhiFn phi;
  CouplingFn coupling;
  Signal xi;

  std::size_t tau_index = 0;  // rows >= 1 only
  BetaFn beta;                // rows >= 1 only
};

struct PlantSpec {
  std::string name;
  std::vector<PlantChannel> channels;  // n + 1 rows
  Signal u;

  Eigen::VectorXd theta_true;
  Eigen::VectorXd lambda_true;
  std::vector<Interval> theta_box;
  std::vector<Interval> lambda_box;
  StateVector x_init;

  // Caller-supplied bound on sum_i |xi_i|_inf / tau_i + |xi_0|_inf.
  double xi_bound = 0.0;

  std::size_t n() const { return channels.empty() ? 0 : channels.size() - 1; }
  std::size_t state_dim() const { return channels.size(); }
  std::size_t regressor_dim() const;
  std::size_t lambda_dim() const { return static_cast<std::size_t>(lambda_true.size()); }
  // Offset of the theta_i block inside theta (and of the i-th block of the regressor).
  std::size_t theta_offset(std::size_t i) const;

  // Structural checks: dimensions, index ranges, callbacks present, truth inside boxes.
  void validate() const;
};

// Small fixed-capacity gather of lambda components, so callbacks see p_i / q_i without
// heap traffic in inner loops.
class ParamPack {
 public:
  static constexpr std::size_t kCapacity = 16;
  ParamPack(const Eigen::VectorXd& lambda, const std::vector<std::size_t>& index);
  ParamView view() const { return {buf_.data(), size_}; }

 private:
  std::array<double, kCapacity> buf_{};
  std::size_t size_ = 0;
};

// phi_i(x0, p_i, t) with p_i gathered from lambda.
void eval_phi(const PlantSpec& spec, std::size_t i, double x0, const Eigen::VectorXd& lambda,
              double t, std::span<double> out);
// beta_i(x0, tau, t); throws ModelViolation unless strictly positive and finite.
double eval_beta(const PlantSpec& spec, std::size_t i, double x0, double tau, double t);
// c_i(x0, q_i, t); zero when the row has no coupling callback.
double eval_coupling(const PlantSpec& spec, std::size_t i, double x0,
                     const Eigen::VectorXd& lambda, double t);
double eval_input(const PlantSpec& spec, double t);
double eval_disturbance(const PlantSpec& spec, std::size_t i, double t);

void plant_rhs(const PlantSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda,
               double t, const StateVector& x, StateVector& dxdt);
StateVector plant_rhs(const PlantSpec& spec, double t, const StateVector& x);

// The plant at its true parameters as an integrable vector field.
VectorField plant_field(const PlantSpec& spec);

// y = (1, 0, ..., 0) x
double output(const StateVector& x);

// Bio-reactor coordinates: x1 = r_max (b s1 + s0), x0 = s0.
std::pair<double, double> bioreactor_transform(double s0, double s1, double r_max, double b);
std::pair<double, double> bioreactor_inverse(double x0, double x1, double r_max, double b);

// Lotka-Volterra coordinates: x0 = x, x1 = y + delta x.
std::pair<double, double> lotka_volterra_transform(double x, double y, double delta);
std::pair<double, double> lotka_volterra_inverse(double x0, double x1, double delta);

}  // namespace adaptobs
