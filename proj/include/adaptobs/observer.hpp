#pragma once

// Adaptive observer: gradient estimator for (x0_hat, theta_hat), the torus explorer driving
// lambda_hat, and reconstruction filters for the unmeasured states.

#include "adaptobs/ode.hpp"
#include "adaptobs/plant.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace adaptobs {

enum class Saturation { Tanh, Clip };

// Parses "tanh" / "clip"; throws std::invalid_argument otherwise.
Saturation parse_saturation(const std::string& name);
std::string to_string(Saturation s);
double saturate(Saturation s, double v);
// Sup of |sigma| (the constant S in the gain bounds).
double saturation_bound(Saturation s);

struct ObserverConfig {
  double alpha = 1.0;
  double gamma_theta = 1.0;
  double gamma = 0.0;
  double epsilon = 0.0;
  std::vector<double> omega;
  std::vector<Interval> lambda_box;
  Saturation sigma = Saturation::Tanh;
  // Initial phase a_j with (x1, x2) = (-sin a_j, cos a_j); empty means all zero.
  std::vector<double> torus_angle;
  // Initial theta_hat; empty means zero.
  Eigen::VectorXd theta_init;

  std::size_t s() const { return lambda_box.size(); }
  // Checks gains, sizes and, by sampling, 0 <= sigma(v) <= min(v, S) for v >= 0.
  void validate() const;
};

// Default frequencies: 1 for s = 1, (pi, 2 sqrt 2) for s = 2, sqrt of the j-th prime beyond.
std::vector<double> default_omega(std::size_t s);

// Phase a with lambda_from_torus(-sin a, box) == value and cos a >= 0.
double torus_angle_for(double value, const Interval& box);

struct ObserverState {
  double x0_hat = 0.0;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd torus_x1;
  Eigen::VectorXd torus_x2;
  Eigen::VectorXd x_hat;
  double warp = 0.0;  // exploration clock: w' = gamma * e

  // Layout: x0_hat, theta_hat, torus_x1, torus_x2, x_hat, warp.
  StateVector pack() const;
  static ObserverState unpack(const StateVector& z, std::size_t d, std::size_t s, std::size_t n);
  static std::size_t packed_size(std::size_t d, std::size_t s, std::size_t n) { return 2 + d + 2 * s + n; }
};

ObserverState initial_observer_state(const PlantSpec& spec, const ObserverConfig& cfg, double y0);

// ||v|| - eps outside the dead zone, 0 inside.
double deadzone_norm(const Eigen::VectorXd& v, double epsilon);
double deadzone_norm(double v, double epsilon);

// Throws InvariantFault if |x1| exceeds 1 by more than 1e-6; values within tolerance are clamped.
double lambda_from_torus(double x1, const Interval& box);
Eigen::VectorXd lambda_from_torus(const Eigen::VectorXd& x1, const std::vector<Interval>& box);

// Derivative of (x0_hat, theta_hat, torus, warp); the x_hat block is left zero.
ObserverState observer_rhs(const ObserverState& obs, const ObserverConfig& cfg, double y,
                           const Eigen::VectorXd& phibar, double c0_val, double u_val, double t);

// x_hat_i' = -beta_i(y, tau_hat_i, t) x_hat_i + theta_hat_i^T phi_i(y, p_hat_i, t).
Eigen::VectorXd state_reconstruction_rhs(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& theta_hat,
                                         const Eigen::VectorXd& lambda_hat, double y, double t,
                                         const PlantSpec& spec);

// Projects every torus pair back onto the unit circle; returns the largest |r^2 - 1| before.
double renormalize_torus(ObserverState& obs);

}  // namespace adaptobs
