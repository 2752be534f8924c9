#include "adaptobs/models.hpp"

#include <cmath>

namespace adaptobs::models {

namespace {

// Counter-based hash (splitmix64 finalizer) so that knot values depend only on (seed, stream,
// index) and the signal is a pure function of t.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double knot_value(std::uint64_t seed, std::uint64_t stream, std::int64_t k) {
  const std::uint64_t h = mix(seed ^ mix(stream ^ mix(static_cast<std::uint64_t>(k))));
  return 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
}

void attach_noise(PlantSpec& spec, const NoiseSpec& noise, const Eigen::VectorXd& tau_true) {
  if (!noise.enabled()) return;
  double bound = noise.amplitude;  // xi_0
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    spec.channels[i].xi = bounded_noise(noise, i);
    if (i > 0) bound += noise.amplitude / tau_true[static_cast<Eigen::Index>(i - 1)];
  }
  spec.xi_bound = bound;
}

}  // namespace

Signal bounded_noise(const NoiseSpec& noise, std::uint64_t stream) {
  const double amp = noise.amplitude;
  const double h = noise.knot_spacing > 0.0 ? noise.knot_spacing : 0.5;
  const std::uint64_t seed = noise.seed;
  return [=](double t) {
    const double s = t / h;
    const double fl = std::floor(s);
    const auto k = static_cast<std::int64_t>(fl);
    const double w = s - fl;
    return amp * ((1.0 - w) * knot_value(seed, stream, k) + w * knot_value(seed, stream, k + 1));
  };
}

PlantSpec duffing(const DuffingParams& p) {
  PlantSpec spec;
  spec.name = "duffing";

  PlantChannel out;  // x0' = x1: no phi_0, no c_0, no input
  PlantChannel vel;
  vel.phi_dim = 3;
  const double omega = p.omega;
  vel.phi = [omega](double x0, ParamView, double t, std::span<double> o) {
    o[0] = x0;
    o[1] = x0 * x0 * x0;
    o[2] = std::cos(omega * t);
  };
  vel.coupling = [](double, ParamView, double) { return 1.0; };
  vel.tau_index = 0;
  vel.beta = [](double, double tau, double) { return tau; };
  spec.channels = {out, vel};

  spec.theta_true = Eigen::Vector3d(-p.beta, -p.alpha, p.gamma);
  spec.lambda_true = Eigen::VectorXd::Constant(1, p.delta);
  spec.theta_box.assign(3, p.theta_box);
  spec.lambda_box = {p.tau_box};
  spec.x_init = Eigen::Vector2d(p.x0_init, p.x1_init);
  attach_noise(spec, p.noise, spec.lambda_true);
  return spec;
}

double bioreactor_input(const BioreactorParams& p, double t) {
  return p.u_amp * (std::sin(p.u_freq * t) + p.u_offset);
}

PlantSpec bioreactor(const BioreactorParams& p) {
  PlantSpec spec;
  spec.name = "bioreactor";
  const double r_max = p.r_max;
  const BioreactorParams params = p;
  auto u = [params](double t) { return bioreactor_input(params, t); };

  // lambda = (k, d): k enters as p_0 = q_0 = q_1, d as the relaxation rate tau_1.
  PlantChannel out;
  out.phi_dim = 2;
  out.p_index = {0};
  out.q_index = {0};
  out.phi = [u](double x0, ParamView, double t, std::span<double> o) {
    o[0] = x0;
    o[1] = u(t);
  };
  out.coupling = [r_max](double x0, ParamView q, double) { return r_max * x0 * x0 / (x0 + q[0]); };

  PlantChannel filt;
  filt.phi_dim = 1;
  filt.q_index = {0};
  filt.phi = [u](double, ParamView, double t, std::span<double> o) { o[0] = u(t); };
  filt.coupling = [](double x0, ParamView q, double) { return -x0 / (x0 + q[0]); };
  filt.tau_index = 1;
  filt.beta = [](double, double tau, double) { return tau; };

  spec.channels = {out, filt};
  spec.u = nullptr;  // the input enters through phi_0 with coefficient theta_02 = d
  spec.theta_true = Eigen::Vector3d(-p.d, p.d, p.r_max * p.d);
  spec.lambda_true = Eigen::Vector2d(p.k, p.d);
  spec.theta_box.assign(3, p.theta_box);
  spec.lambda_box = {p.k_box, p.d_box};
  const auto [x0, x1] = bioreactor_transform(p.s0_init, p.s1_init, p.r_max, p.b);
  spec.x_init = Eigen::Vector2d(x0, x1);
  attach_noise(spec, p.noise, Eigen::VectorXd::Constant(1, p.d));
  return spec;
}

PlantSpec lotka_volterra(const LotkaVolterraParams& p) {
  PlantSpec spec;
  spec.name = "lotka_volterra";

  PlantChannel out;
  out.phi_dim = 2;
  out.phi = [](double x0, ParamView, double, std::span<double> o) {
    o[0] = x0;
    o[1] = x0 * x0;
  };

  PlantChannel filt;
  filt.phi_dim = 1;
  filt.phi = [](double x0, ParamView, double, std::span<double> o) { o[0] = x0; };
  filt.coupling = [](double x0, ParamView, double) { return -x0; };
  filt.tau_index = 0;
  filt.beta = [](double, double tau, double) { return tau; };

  spec.channels = {out, filt};
  spec.theta_true = Eigen::Vector3d(p.alpha, p.delta, p.delta * (p.alpha + p.gamma));
  spec.lambda_true = Eigen::VectorXd::Constant(1, p.gamma);
  spec.theta_box.assign(3, p.theta_box);
  spec.lambda_box = {p.tau_box};
  const auto [x0, x1] = lotka_volterra_transform(p.x_init, p.y_init, p.delta);
  spec.x_init = Eigen::Vector2d(x0, x1);
  attach_noise(spec, p.noise, spec.lambda_true);
  return spec;
}

VectorField duffing_original(const DuffingParams& p) {
  return [p](double t, const StateVector& x, StateVector& dx) {
    dx[0] = x[1];
    dx[1] = -p.delta * x[1] - p.beta * x[0] - p.alpha * x[0] * x[0] * x[0] + p.gamma * std::cos(p.omega * t);
  };
}

VectorField bioreactor_original(const BioreactorParams& p) {
  return [p](double t, const StateVector& s, StateVector& ds) {
    const double r = p.r_max * s[0] / (s[0] + p.k);
    ds[0] = -p.d * s[0] + p.d * bioreactor_input(p, t) - p.b * r * s[1];
    ds[1] = -p.d * s[1] + r * s[1];
  };
}

VectorField lotka_volterra_original(const LotkaVolterraParams& p) {
  return [p](double, const StateVector& z, StateVector& dz) {
    dz[0] = z[0] * (p.alpha - z[1]);
    dz[1] = -z[1] * (p.gamma - p.delta * z[0]);
  };
}

}  // namespace adaptobs::models
