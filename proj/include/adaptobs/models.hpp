#pragma once

// The three shipped example plants, in the observer's coordinates, plus their original
// (physical) coordinates for cross-checking the transforms.

#include "adaptobs/ode.hpp"
#include "adaptobs/plant.hpp"

#include <cstdint>

namespace adaptobs::models {

// Bounded, continuous, deterministic disturbance: piecewise-linear interpolation of seeded
// uniform knots in [-amplitude, amplitude], spaced `knot_spacing` apart.
struct NoiseSpec {
  double amplitude = 0.0;
  std::uint64_t seed = 0;
  double knot_spacing = 0.5;
  bool enabled() const { return amplitude > 0.0; }
};

Signal bounded_noise(const NoiseSpec& noise, std::uint64_t stream);

// x0' = x1,  x1' = -delta x1 - beta x0 - alpha x0^3 + gamma cos(omega t)
struct DuffingParams {
  double delta = 0.2;
  double alpha = 1.0;
  double beta = -1.0;
  double gamma = 0.3;
  double omega = 1.0;
  double x0_init = 1.0;
  double x1_init = 0.0;
  Interval tau_box{0.1, 1.1};
  Interval theta_box{-5.0, 5.0};
  NoiseSpec noise;
};

// s0' = -d s0 + d u - b r(s0, k) s1,  s1' = -d s1 + r(s0, k) s1,  r = r_max s0 / (s0 + k)
// with u(t) = u_amp (sin(u_freq t) + u_offset).
struct BioreactorParams {
  double d = 0.3;
  double k = 70.0;
  double r_max = 1.0;
  double b = 1.0;
  double u_amp = 40.0;
  double u_freq = 0.2;
  double u_offset = 1.5;
  double s0_init = 20.0;
  double s1_init = 10.0;
  Interval k_box{0.0, 200.0};
  Interval d_box{0.2, 0.6};
  Interval theta_box{-10.0, 10.0};
  NoiseSpec noise;
};

// x' = x (alpha - y),  y' = -y (gamma - delta x)
struct LotkaVolterraParams {
  double alpha = 0.5;
  double gamma = 0.4;
  double delta = 0.4;
  double x_init = 2.0;
  double y_init = 1.0;
  Interval tau_box{0.2, 0.6};
  Interval theta_box{-5.0, 5.0};
  NoiseSpec noise;
};

// lambda = (tau_1) = (delta); theta = (-beta, -alpha, gamma)
PlantSpec duffing(const DuffingParams& p);
// lambda = (k, d); theta = (-d, d, r_max d)
PlantSpec bioreactor(const BioreactorParams& p);
// lambda = (gamma); theta = (alpha, delta, delta (alpha + gamma))
PlantSpec lotka_volterra(const LotkaVolterraParams& p);

VectorField duffing_original(const DuffingParams& p);
VectorField bioreactor_original(const BioreactorParams& p);
VectorField lotka_volterra_original(const LotkaVolterraParams& p);

double bioreactor_input(const BioreactorParams& p, double t);

}  // namespace adaptobs::models
