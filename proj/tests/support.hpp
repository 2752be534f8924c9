#pragma once

// Small plants and oracles shared by the test binaries.

#include "adaptobs/plant.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace testing {

using adaptobs::Interval;
using adaptobs::PlantSpec;

// Two rows: x0' = x1 and x1' = -beta(x0, tau, t) x1 + theta^T phi(x0, t). theta is zero; tests
// that need dynamics set theta_true and x_init themselves.
inline PlantSpec filter_plant(std::size_t dim, std::function<void(double, double, std::span<double>)> phi,
                              adaptobs::BetaFn beta, double tau = 0.5, Interval tau_box = {0.1, 1.1}) {
  PlantSpec s;
  s.name = "filter";
  s.channels.resize(2);
  s.channels[1].phi_dim = dim;
  s.channels[1].phi = [phi](double x0, adaptobs::ParamView, double t, std::span<double> out) { phi(x0, t, out); };
  s.channels[1].coupling = [](double, adaptobs::ParamView, double) { return 1.0; };
  s.channels[1].beta = std::move(beta);
  s.channels[1].tau_index = 0;
  s.theta_true = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  s.theta_box.assign(dim, Interval{-10.0, 10.0});
  s.lambda_true = Eigen::VectorXd::Constant(1, tau);
  s.lambda_box = {tau_box};
  s.x_init = Eigen::VectorXd::Zero(2);
  return s;
}

inline adaptobs::BetaFn constant_beta() {
  return [](double, double tau, double) { return tau; };
}

// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

// Linear interpolation of samples v taken at t0 + k h.
inline double lerp_samples(const std::vector<double>& v, double t0, double h, double t) {
  const double u = (t - t0) / h;
  auto k = static_cast<std::size_t>(std::floor(u));
  if (k + 1 >= v.size()) return v.back();
  const double f = u - static_cast<double>(k);
  return (1.0 - f) * v[k] + f * v[k + 1];
}

}  // namespace testing
