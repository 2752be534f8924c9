#include "adaptobs/closed_loop.hpp"

#include "adaptobs/errors.hpp"
#include "adaptobs/regressor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace adaptobs {

RegressorMode parse_regressor_mode(const std::string& name) {
  if (name == "interpolated") return RegressorMode::Interpolated;
  if (name == "direct") return RegressorMode::Direct;
  throw std::invalid_argument("unknown regressor mode '" + name + "' (expected interpolated or direct)");
}

std::string to_string(RegressorMode m) { return m == RegressorMode::Interpolated ? "interpolated" : "direct"; }

std::optional<double> last_entry_time(const std::vector<double>& t, const std::vector<double>& v,
                                      double truth, double band_percent) {
  if (t.empty()) return std::nullopt;
  const double tol = band_percent / 100.0 * (truth != 0.0 ? std::abs(truth) : 1.0);
  std::size_t k = v.size();
  while (k > 0 && std::abs(v[k - 1] - truth) <= tol) --k;
  if (k == v.size()) return std::nullopt;
  return t[k];
}

namespace {

bool in_band(double v, double truth, double band_percent) {
  const double tol = band_percent / 100.0 * (truth != 0.0 ? std::abs(truth) : 1.0);
  return std::abs(v - truth) <= tol;
}

double hermite(double y0, double m0, double y1, double m1, double h, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * m0 + (-2 * s3 + 3 * s2) * y1 +
         (s3 - s2) * h * m1;
}

void check_divergence(double t, const StateVector& x, double limit, const char* what) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (std::abs(x[k]) > limit) {
      std::ostringstream msg;
      msg << what << " component " << k << " reached " << x[k] << " (limit " << limit << ")";
      throw DivergenceFault(t, msg.str());
    }
  }
}

Eigen::VectorXd clamped_lambda(const Eigen::VectorXd& x1, const std::vector<Interval>& box) {
  return lambda_from_torus(x1, box);
}

}  // namespace

ExperimentResult run_closed_loop(const PlantSpec& spec, const ObserverConfig& cfg,
                                 const IntegrationGrid& grid, const LoopOptions& opts) {
  spec.validate();
  cfg.validate();
  grid.validate();
  if (cfg.s() != spec.lambda_dim()) throw std::invalid_argument("observer lambda box does not match the plant");
  if (!(opts.window_T >= 10.0 * grid.dt)) throw std::invalid_argument("window must be at least 10 dt");
  if (opts.decimation == 0) throw std::invalid_argument("decimation must be at least 1");
  if (!(opts.tail_fraction > 0.0 && opts.tail_fraction <= 1.0)) throw std::invalid_argument("tail fraction must be in (0, 1]");

  const std::size_t n = spec.n();
  const std::size_t d = spec.regressor_dim();
  const std::size_t s = cfg.s();
  const std::size_t d0 = spec.channels[0].phi_dim;
  const std::size_t steps = grid.steps();
  const double dt = grid.dt;

  ExperimentResult res;
  res.name = spec.name;
  res.steps = steps;
  res.theta_true = spec.theta_true;
  res.lambda_true = spec.lambda_true;
  res.band_percent = opts.band_percent;
  res.delta_xi = spec.xi_bound;
  for (const auto& ch : opts.channels) res.channel_names.push_back(ch.name);

  if (opts.gamma_star) {
    res.gamma_star = opts.gamma_star;
    res.gamma_advisory = cfg.gamma > *opts.gamma_star;
    if (res.gamma_advisory && opts.enforce_gamma) {
      std::ostringstream msg;
      msg << "gamma = " << cfg.gamma << " exceeds the cap " << *opts.gamma_star;
      throw ConfigError("observer.gamma", 0, msg.str());
    }
  }

  std::unique_ptr<FilteredRegressor> reg =
      opts.mode == RegressorMode::Interpolated
          ? make_interpolated_regressor(spec, dt, opts.window_T, opts.nodes)
          : make_direct_regressor(spec, dt, opts.window_T);
  HistoryBuffer diag(dt, opts.window_T, 2);

  StateVector x = spec.x_init;
  ObserverState obs = initial_observer_state(spec, cfg, output(x));
  StateVector z = obs.pack();

  const VectorField plant = plant_field(spec);
  Rk4Stepper plant_stepper(x.size());
  Rk4Stepper obs_stepper(z.size());

  // Per-step context for the observer vector field.
  double step_t = grid.t0;
  double y_lo = 0.0, y_hi = 0.0, m_lo = 0.0, m_hi = 0.0;
  StateVector dx_tmp(x.size());
  Eigen::VectorXd phibar(static_cast<Eigen::Index>(d));
  std::vector<double> mu_block(d - d0);

  auto assemble = [&](double frac, double y, double t, const Eigen::VectorXd& lam) {
    if (d0 > 0) eval_phi(spec, 0, y, lam, t, std::span<double>(phibar.data(), d0));
    reg->filtered(frac, lam, mu_block);
    std::size_t off = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      const double c = eval_coupling(spec, i, y, lam, t);
      const std::size_t di = spec.channels[i].phi_dim;
      for (std::size_t r = 0; r < di; ++r) phibar[static_cast<Eigen::Index>(d0 + off + r)] = c * mu_block[off + r];
      off += di;
    }
  };

  const VectorField observer_field = [&](double t, const StateVector& zz, StateVector& dz) {
    const double frac = std::clamp((t - step_t) / dt, 0.0, 1.0);
    const double y = hermite(y_lo, m_lo, y_hi, m_hi, dt, frac);
    const ObserverState o = ObserverState::unpack(zz, d, s, n);
    const Eigen::VectorXd lam = clamped_lambda(o.torus_x1, cfg.lambda_box);
    assemble(frac, y, t, lam);
    ObserverState dot =
        observer_rhs(o, cfg, y, phibar, eval_coupling(spec, 0, y, lam, t), eval_input(spec, t), t);
    dot.x_hat = state_reconstruction_rhs(o.x_hat, o.theta_hat, lam, y, t, spec);
    dz = dot.pack();
  };

  // Bookkeeping.
  const double span = grid.t_end - grid.t0;
  res.tail_start = grid.t_end - opts.tail_fraction * span;
  res.tail_lambda_variation = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s));
  double tail_sum = 0.0;
  std::size_t tail_count = 0;
  std::vector<std::optional<double>> entry(d + s, std::optional<double>(grid.t0));

  auto& dp = res.delta_phi;
  dp.beta_min.assign(n, std::numeric_limits<double>::infinity());
  dp.phi_sup.assign(n, 0.0);
  dp.coupling_sup.assign(n, 0.0);
  std::array<double, 32> phi_tmp{};

  const std::size_t warm_steps = static_cast<std::size_t>(std::llround(opts.window_T / dt));
  std::size_t checkpoint_every = 0;
  if (opts.checkpoints > 0 && steps > warm_steps + 2) checkpoint_every = std::max<std::size_t>(1, (steps - warm_steps) / opts.checkpoints);
  res.warm_up_end = std::min(grid.t_end, grid.t0 + opts.window_T);

  auto record = [&](double t, const ObserverState& o, const Eigen::VectorXd& lam) {
    Sample smp;
    smp.t = t;
    smp.plant = x;
    smp.x0_hat = o.x0_hat;
    smp.theta_hat = o.theta_hat;
    smp.lambda_hat = lam;
    smp.x_hat = o.x_hat;
    smp.e_deadzone = deadzone_norm(x[0] - o.x0_hat, cfg.epsilon);
    smp.e = saturate(cfg.sigma, smp.e_deadzone);
    smp.warp = o.warp;
    for (const auto& ch : opts.channels) {
      smp.channel_truth.push_back(ch.truth(t, x));
      smp.channel_estimate.push_back(ch.estimate(t, x, o, lam));
    }
    res.samples.push_back(std::move(smp));
  };

  auto track_regressor_constants = [&](double t, double y, const Eigen::VectorXd& lam) {
    for (std::size_t i = 1; i <= n; ++i) {
      const auto& ch = spec.channels[i];
      const Interval& box = spec.lambda_box[ch.tau_index];
      const double b = std::min(eval_beta(spec, i, y, box.lo, t), eval_beta(spec, i, y, box.hi, t));
      dp.beta_min[i - 1] = std::min(dp.beta_min[i - 1], b);
      eval_phi(spec, i, y, lam, t, std::span<double>(phi_tmp.data(), ch.phi_dim));
      double norm2 = 0.0;
      for (std::size_t r = 0; r < ch.phi_dim; ++r) norm2 += phi_tmp[r] * phi_tmp[r];
      dp.phi_sup[i - 1] = std::max(dp.phi_sup[i - 1], std::sqrt(norm2));
      dp.coupling_sup[i - 1] = std::max(dp.coupling_sup[i - 1], std::abs(eval_coupling(spec, i, y, lam, t)));
    }
  };

  auto checkpoint = [&](double t, const Eigen::VectorXd& lam) {
    reg->filtered(1.0, lam, mu_block);
    std::size_t off = 0;
    double quad2 = 0.0;
    double interp2 = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      const auto& ch = spec.channels[i];
      ParamPack p(lam, ch.p_index);
      const double tau = lam[static_cast<Eigen::Index>(ch.tau_index)];
      const Eigen::VectorXd fine = windowed_mu(diag, spec, i, tau, p.view(), t, 1).value;
      const Eigen::VectorXd coarse = windowed_mu(diag, spec, i, tau, p.view(), t, 2).value;
      const double c = std::abs(eval_coupling(spec, i, diag.x0_at(diag.size() - 1), lam, t));
      for (std::size_t r = 0; r < ch.phi_dim; ++r) {
        const double q = c * (fine[static_cast<Eigen::Index>(r)] - coarse[static_cast<Eigen::Index>(r)]);
        const double e = c * (mu_block[off + r] - fine[static_cast<Eigen::Index>(r)]);
        quad2 += q * q;
        interp2 += e * e;
      }
      off += ch.phi_dim;
    }
    dp.quadrature = std::max(dp.quadrature, std::sqrt(quad2));
    dp.interpolation = std::max(dp.interpolation, std::sqrt(interp2));
    ++dp.checkpoints;
  };

  // t0
  reg->push(grid.t0, x[0]);
  diag.push(grid.t0, x[0]);
  Eigen::VectorXd lam = clamped_lambda(obs.torus_x1, cfg.lambda_box);
  Eigen::VectorXd lam_prev = lam;
  track_regressor_constants(grid.t0, x[0], lam);
  record(grid.t0, obs, lam);
  res.max_output_error = std::abs(x[0] - obs.x0_hat);
  auto update_entry = [&](double t, const ObserverState& o, const Eigen::VectorXd& l) {
    for (std::size_t k = 0; k < d; ++k) {
      if (!in_band(o.theta_hat[static_cast<Eigen::Index>(k)], spec.theta_true[static_cast<Eigen::Index>(k)], opts.band_percent))
        entry[k].reset();
      else if (!entry[k])
        entry[k] = t;
    }
    for (std::size_t j = 0; j < s; ++j) {
      if (!in_band(l[static_cast<Eigen::Index>(j)], spec.lambda_true[static_cast<Eigen::Index>(j)], opts.band_percent))
        entry[d + j].reset();
      else if (!entry[d + j])
        entry[d + j] = t;
    }
  };
  update_entry(grid.t0, obs, lam);

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = grid.time(k);
    const double t_next = grid.time(k + 1);

    plant(t, x, dx_tmp);
    y_lo = x[0];
    m_lo = dx_tmp[0];
    plant_stepper.step(plant, t, x, dt);
    check_divergence(t_next, x, opts.divergence_limit, "plant");
    plant(t_next, x, dx_tmp);
    y_hi = x[0];
    m_hi = dx_tmp[0];

    reg->push(t_next, y_hi);
    diag.push(t_next, y_hi);

    step_t = t;
    obs_stepper.step(observer_field, t, z, dt);
    obs = ObserverState::unpack(z, d, s, n);
    const double drift = renormalize_torus(obs);
    res.max_torus_drift = std::max(res.max_torus_drift, drift);
    for (Eigen::Index j = 0; j < obs.torus_x1.size(); ++j) {
      const double r2 = obs.torus_x1[j] * obs.torus_x1[j] + obs.torus_x2[j] * obs.torus_x2[j];
      res.max_torus_defect = std::max(res.max_torus_defect, std::abs(r2 - 1.0));
    }
    z = obs.pack();
    check_divergence(t_next, z, opts.divergence_limit, "observer");

    lam = clamped_lambda(obs.torus_x1, cfg.lambda_box);
    const double err = std::abs(y_hi - obs.x0_hat);
    res.max_output_error = std::max(res.max_output_error, err);
    track_regressor_constants(t_next, y_hi, lam);
    update_entry(t_next, obs, lam);

    if (t_next >= res.tail_start - 1e-12 * std::max(1.0, std::abs(res.tail_start))) {
      tail_sum += deadzone_norm(err, cfg.epsilon);
      ++tail_count;
      if (t >= res.tail_start - 1e-12 * std::max(1.0, std::abs(res.tail_start)))
        res.tail_lambda_variation += (lam - lam_prev).cwiseAbs();
    }
    lam_prev = lam;

    const std::size_t done = k + 1;
    if (checkpoint_every > 0 && done > warm_steps && (done - warm_steps) % checkpoint_every == 0) checkpoint(t_next, lam);
    if (done % opts.decimation == 0 || done == steps) record(t_next, obs, lam);
  }

  res.tail_deadzone_mean = tail_count > 0 ? tail_sum / static_cast<double>(tail_count) : 0.0;
  res.theta_final = obs.theta_hat;
  res.lambda_final = lam;

  for (std::size_t k = 0; k < d; ++k) {
    res.convergence.push_back({"theta_" + std::to_string(k + 1), spec.theta_true[static_cast<Eigen::Index>(k)],
                               obs.theta_hat[static_cast<Eigen::Index>(k)], entry[k]});
  }
  for (std::size_t j = 0; j < s; ++j) {
    res.convergence.push_back({"lambda_" + std::to_string(j + 1), spec.lambda_true[static_cast<Eigen::Index>(j)],
                               lam[static_cast<Eigen::Index>(j)], entry[d + j]});
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (dp.beta_min[i] > 0.0 && std::isfinite(dp.beta_min[i]))
      dp.tail += dp.coupling_sup[i] * approximation_error_bound(opts.window_T, dp.beta_min[i], dp.phi_sup[i]);
  }
  dp.total = dp.tail + dp.quadrature + dp.interpolation;
  return res;
}

}  // namespace adaptobs
