#include "adaptobs/experiments.hpp"

#include "adaptobs/errors.hpp"
#include "adaptobs/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace adaptobs {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "duffing") return ModelKind::Duffing;
  if (name == "bioreactor") return ModelKind::Bioreactor;
  if (name == "lotka_volterra") return ModelKind::LotkaVolterra;
  throw std::invalid_argument("unknown model '" + name + "' (expected duffing, bioreactor or lotka_volterra)");
}

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::Duffing: return "duffing";
    case ModelKind::Bioreactor: return "bioreactor";
    case ModelKind::LotkaVolterra: return "lotka_volterra";
  }
  return "duffing";
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ConfigError(field, 0, field + ": " + what);
}

void check_box(const Interval& box, const std::string& field) {
  if (!std::isfinite(box.lo) || !std::isfinite(box.hi) || !(box.lo < box.hi)) bad(field, "needs lo < hi");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) bad("experiment.name", "must not be empty");
  try {
    grid.validate();
  } catch (const std::invalid_argument& e) {
    bad("integration.dt", e.what());
  }
  if (!(window_T >= 10.0 * grid.dt)) bad("regressor.window_T", "must be at least 10 dt");
  if (nodes < 2) bad("regressor.nodes", "needs at least 2 nodes");
  if (decimation < 1) bad("output.decimation", "must be at least 1");
  if (!(band_percent > 0.0)) bad("output.band_percent", "must be positive");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) bad("output.tail_fraction", "must lie in (0, 1]");

  switch (model) {
    case ModelKind::Duffing:
      check_box(duffing.tau_box, "plant.tau_box");
      check_box(duffing.theta_box, "plant.theta_box");
      break;
    case ModelKind::Bioreactor:
      check_box(bioreactor.k_box, "plant.k_box");
      check_box(bioreactor.d_box, "plant.d_box");
      check_box(bioreactor.theta_box, "plant.theta_box");
      if (!(bioreactor.r_max > 0.0)) bad("plant.r_max", "must be positive");
      if (!(bioreactor.b > 0.0)) bad("plant.b", "must be positive");
      break;
    case ModelKind::LotkaVolterra:
      check_box(lotka_volterra.tau_box, "plant.tau_box");
      check_box(lotka_volterra.theta_box, "plant.theta_box");
      break;
  }
  PlantSpec spec;
  try {
    spec = build_plant(*this);
    spec.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    bad("plant", e.what());
  }

  const ObserverConfig& o = observer;
  if (!(o.alpha > 0.0)) bad("observer.alpha", "must be positive");
  if (!(o.gamma_theta > 0.0)) bad("observer.gamma_theta", "must be positive");
  if (!(o.gamma >= 0.0)) bad("observer.gamma", "must be nonnegative");
  if (!(o.epsilon >= 0.0)) bad("observer.epsilon", "must be nonnegative");
  if (o.omega.size() != spec.lambda_dim()) bad("observer.omega", "needs one frequency per nonlinear parameter");
  for (double w : o.omega)
    if (!(w > 0.0)) bad("observer.omega", "frequencies must be positive");
  if (!o.torus_angle.empty() && o.torus_angle.size() != spec.lambda_dim())
    bad("observer.torus_angle", "needs one phase per nonlinear parameter");
  if (o.theta_init.size() != 0 && static_cast<std::size_t>(o.theta_init.size()) != spec.regressor_dim())
    bad("observer.theta_init", "needs one value per linear parameter");
  try {
    build_observer(*this, spec).validate();
  } catch (const std::exception& e) {
    bad("observer", e.what());
  }

  if (pe.grid_points < 1) bad("pe.grid_points", "must be at least 1");
  if (!(pe.L > 0.0)) bad("pe.L", "must be positive");
  if (!(pe.stride > 0.0)) bad("pe.stride", "must be positive");
  const double ratio = pe.L / pe.stride;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) bad("pe.stride", "L must be an integer multiple of the stride");
  if (!(pe.t_end > pe.t_start)) bad("pe.t_end", "must exceed t_start");
  if (!(pe.t_start >= grid.t0 + window_T)) bad("pe.t_start", "must leave one regressor window of history");
  if (pe.sample_decimation < 1) bad("pe.sample_decimation", "must be at least 1");
  if (pe.npe_grid_points < 1) bad("pe.npe_grid_points", "must be at least 1");
  if (!(pe.npe_L > 0.0)) bad("pe.npe_L", "must be positive");
  if (pe.npe_decimation < 1) bad("pe.npe_decimation", "must be at least 1");
  if (pe.npe_t_every < 1) bad("pe.npe_t_every", "must be at least 1");
  if (!(pe.class_tolerance >= 0.0)) bad("pe.class_tolerance", "must be nonnegative");

  if (bounds.grid_points < 2) bad("bounds.grid_points", "needs at least 2 points for difference quotients");
  if (bounds.d_points < 1) bad("bounds.d_points", "must be at least 1");
  if (bounds.psi_points < 1) bad("bounds.psi_points", "must be at least 1");
  if (!(bounds.stability_horizon > 0.0)) bad("bounds.stability_horizon", "must be positive");
  if (!(bounds.beta_cb > 0.0)) bad("bounds.beta_cb", "must be positive");
  if (!(bounds.cascade_kappa > 1.0)) bad("bounds.cascade_kappa", "must exceed 1");
  if (!(bounds.cascade_d > 0.0 && bounds.cascade_d < 1.0)) bad("bounds.cascade_d", "must lie in (0, 1)");
  if (!(bounds.cascade_h0 > 0.0)) bad("bounds.cascade_h0", "must be positive");
}

ExperimentConfig duffing_experiment() {
  ExperimentConfig c;
  c.name = "duffing";
  c.model = ModelKind::Duffing;
  c.observer.alpha = 1.0;
  c.observer.gamma_theta = 2.0;
  c.observer.gamma = 0.2;
  c.observer.epsilon = 0.01;
  c.observer.omega = default_omega(1);
  c.grid = {0.0, 4000.0, 1e-3};
  c.window_T = 100.0;
  c.decimation = 100;
  c.band_percent = 5.0;
  c.pe.t_start = 100.0;
  c.pe.t_end = 2100.0;
  c.bounds.stability_horizon = 2000.0;
  return c;
}

ExperimentConfig bioreactor_experiment() {
  ExperimentConfig c;
  c.name = "bioreactor";
  c.model = ModelKind::Bioreactor;
  c.observer.alpha = 1.0;
  c.observer.gamma_theta = 0.001;
  c.observer.gamma = 0.0001;
  c.observer.epsilon = 0.03;
  c.observer.omega = default_omega(2);
  c.grid = {0.0, 20000.0, 0.01};
  c.window_T = 50.0;
  c.decimation = 100;
  c.band_percent = 5.0;
  c.pe.t_start = 50.0;
  c.pe.t_end = 2050.0;
  c.pe.npe_grid_points = 9;
  c.pe.npe_decimation = 100;
  c.bounds.grid_points = 5;
  c.bounds.stability_horizon = 20000.0;
  return c;
}

ExperimentConfig lotka_volterra_experiment() {
  ExperimentConfig c;
  c.name = "lotka_volterra";
  c.model = ModelKind::LotkaVolterra;
  c.observer.alpha = 1.0;
  c.observer.gamma_theta = 0.02;
  c.observer.gamma = 0.0015;
  c.observer.epsilon = 0.0005;
  c.observer.omega = default_omega(1);
  c.observer.torus_angle = {5.0 * std::numbers::pi / 6.0};
  c.grid = {0.0, 200000.0, 0.01};
  c.window_T = 50.0;
  c.decimation = 1000;
  c.band_percent = 5.0;
  c.pe.t_start = 50.0;
  c.pe.t_end = 2050.0;
  c.pe.npe_decimation = 100;
  c.bounds.stability_horizon = 20000.0;
  return c;
}

std::vector<std::string> builtin_names() { return {"duffing", "bioreactor", "lotka_volterra"}; }

std::optional<ExperimentConfig> builtin_experiment(const std::string& name) {
  if (name == "duffing") return duffing_experiment();
  if (name == "bioreactor") return bioreactor_experiment();
  if (name == "lotka_volterra") return lotka_volterra_experiment();
  return std::nullopt;
}

PlantSpec build_plant(const ExperimentConfig& cfg) {
  switch (cfg.model) {
    case ModelKind::Duffing: return models::duffing(cfg.duffing);
    case ModelKind::Bioreactor: return models::bioreactor(cfg.bioreactor);
    case ModelKind::LotkaVolterra: return models::lotka_volterra(cfg.lotka_volterra);
  }
  throw std::logic_error("unhandled model kind");
}

ObserverConfig build_observer(const ExperimentConfig& cfg, const PlantSpec& spec) {
  ObserverConfig o = cfg.observer;
  o.lambda_box = spec.lambda_box;
  return o;
}

std::vector<ReconstructionChannel> reconstruction_channels(const ExperimentConfig& cfg) {
  std::vector<ReconstructionChannel> out;
  switch (cfg.model) {
    case ModelKind::Duffing:
      out.push_back({"x1", [](double, const StateVector& x) { return x[1]; },
                     [](double, const StateVector&, const ObserverState& obs, const Eigen::VectorXd&) {
                       return obs.x_hat[0];
                     }});
      break;
    case ModelKind::Bioreactor: {
      const double r_max = cfg.bioreactor.r_max;
      const double b = cfg.bioreactor.b;
      out.push_back({"s1",
                     [r_max, b](double, const StateVector& x) { return bioreactor_inverse(x[0], x[1], r_max, b).second; },
                     [r_max, b](double, const StateVector& x, const ObserverState& obs, const Eigen::VectorXd&) {
                       return bioreactor_inverse(x[0], obs.x_hat[0], r_max, b).second;
                     }});
      break;
    }
    case ModelKind::LotkaVolterra: {
      const double delta = cfg.lotka_volterra.delta;
      out.push_back({"y", [delta](double, const StateVector& x) { return x[1] - delta * x[0]; },
                     [](double, const StateVector& x, const ObserverState& obs, const Eigen::VectorXd&) {
                       return obs.x_hat[0] - obs.theta_hat[1] * x[0];
                     }});
      break;
    }
  }
  return out;
}

LoopOptions build_loop_options(const ExperimentConfig& cfg) {
  LoopOptions o;
  o.window_T = cfg.window_T;
  o.mode = cfg.mode;
  o.nodes = cfg.nodes;
  o.decimation = cfg.decimation;
  o.band_percent = cfg.band_percent;
  o.tail_fraction = cfg.tail_fraction;
  o.enforce_gamma = cfg.bounds.enforce_gamma;
  o.channels = reconstruction_channels(cfg);
  return o;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::optional<double> gamma_star) {
  cfg.validate();
  const PlantSpec spec = build_plant(cfg);
  LoopOptions opts = build_loop_options(cfg);
  opts.gamma_star = gamma_star;
  ExperimentResult res = run_closed_loop(spec, build_observer(cfg, spec), cfg.grid, opts);
  res.name = cfg.name;
  return res;
}

PEAnalysis run_pe_analysis(const ExperimentConfig& cfg) {
  cfg.validate();
  const PlantSpec spec = build_plant(cfg);
  const OutputRecord rec = simulate_output(spec, {cfg.grid.t0, cfg.pe.t_end, cfg.grid.dt});
  const auto& pe = cfg.pe;

  PEAnalysis out;
  SeriesFn phi = [&](const Eigen::VectorXd& l) {
    return regressor_along(spec, rec, l, cfg.window_T, pe.sample_decimation);
  };
  out.upe = check_lambda_uPE(phi, lambda_grid(spec.lambda_box, pe.grid_points), pe.L, pe.t_start, pe.t_end,
                             pe.stride, pe.threshold);

  SeriesFn ups = [&](const Eigen::VectorXd& l) {
    return upsilon_along(spec, rec, l, cfg.window_T, pe.npe_decimation);
  };
  SeriesFn cls = [&](const Eigen::VectorXd& l) {
    return regressor_along(spec, rec, l, cfg.window_T, pe.npe_decimation);
  };
  out.npe = check_nonlinear_PE(ups, cls, lambda_grid(spec.lambda_box, pe.npe_grid_points), pe.npe_L,
                               pe.npe_t_every, pe.class_tolerance);
  return out;
}

namespace {

// Delta_phi tail term with sups sampled along the record over the lambda grid.
double sampled_tail_bound(const PlantSpec& spec, const OutputRecord& rec, const std::vector<Eigen::VectorXd>& grid,
                          double window, std::size_t stride) {
  double total = 0.0;
  std::vector<double> buf(32);
  for (std::size_t i = 1; i <= spec.n(); ++i) {
    const std::size_t di = spec.channels[i].phi_dim;
    const std::size_t ti = spec.channels[i].tau_index;
    double c_sup = 0.0;
    double phi_sup = 0.0;
    double beta_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rec.y.size(); k += stride) {
      const double t = rec.t0 + static_cast<double>(k) * rec.dt;
      const double y = rec.y[k];
      for (const auto& lam : grid) {
        c_sup = std::max(c_sup, std::abs(eval_coupling(spec, i, y, lam, t)));
        eval_phi(spec, i, y, lam, t, std::span<double>(buf.data(), di));
        double n2 = 0.0;
        for (std::size_t r = 0; r < di; ++r) n2 += buf[r] * buf[r];
        phi_sup = std::max(phi_sup, std::sqrt(n2));
        beta_min = std::min(beta_min, eval_beta(spec, i, y, lam[static_cast<Eigen::Index>(ti)], t));
      }
    }
    total += c_sup * approximation_error_bound(window, beta_min, phi_sup);
  }
  return total;
}

Series head(const Series& s, double duration) {
  Series out = s;
  const auto keep = std::min<Eigen::Index>(s.values.cols(), static_cast<Eigen::Index>(std::floor(duration / s.h)) + 1);
  out.values = s.values.leftCols(keep);
  return out;
}

}  // namespace

BoundsReport compute_bounds(const ExperimentConfig& cfg, std::optional<double> mu_prior, bool allow_pe) {
  cfg.validate();
  if (!mu_prior && !allow_pe)
    throw ConstantUnavailable("mu: no PE level supplied and the on-the-fly PE check is disabled");

  const PlantSpec spec = build_plant(cfg);
  const ObserverConfig obs = build_observer(cfg, spec);
  const auto& pe = cfg.pe;
  const auto& bs = cfg.bounds;
  const double rec_end = std::max(pe.t_end, cfg.grid.t0 + cfg.window_T + bs.stability_horizon);
  const OutputRecord rec = simulate_output(spec, {cfg.grid.t0, rec_end, cfg.grid.dt});
  // Every estimator except the envelope fit works on the PE interval only.
  OutputRecord pe_rec = rec;
  pe_rec.y.resize(std::min(rec.y.size(), IntegrationGrid{cfg.grid.t0, pe.t_end, cfg.grid.dt}.steps() + 1));

  BoundsReport r;
  r.L = pe.L;
  SeriesFn phi = [&](const Eigen::VectorXd& l) {
    return regressor_along(spec, pe_rec, l, cfg.window_T, pe.sample_decimation);
  };
  if (mu_prior) {
    r.mu = *mu_prior;
    r.mu_source = "prior";
  } else {
    const PEReport upe = check_lambda_uPE(phi, lambda_grid(spec.lambda_box, pe.grid_points), pe.L, pe.t_start,
                                          pe.t_end, pe.stride, pe.threshold);
    r.mu = upe.mu;
    r.mu_source = "on-the-fly";
    for (const auto& w : upe.warnings) r.warnings.push_back("pe: " + w);
  }
  if (!(r.mu > 0.0)) throw ConstantUnavailable("mu: regressor is not persistently exciting on the sampled grid");

  const auto grid = lambda_grid(spec.lambda_box, bs.grid_points);
  SeriesFn c0 = [&](const Eigen::VectorXd& l) {
    return coupling_along(spec, pe_rec, l, cfg.window_T, pe.sample_decimation);
  };
  r.regressor = estimate_regressor_constants(phi, c0, grid);
  if (!(r.regressor.B > 0.0)) throw ConstantUnavailable("B: sampled regressor vanishes");
  if (!(r.regressor.D > 0.0)) throw ConstantUnavailable("D: sampled regressor does not depend on lambda");

  r.S = saturation_bound(obs.sigma);
  double dl2 = 0.0;
  for (std::size_t j = 0; j < obs.s(); ++j) {
    const double v = obs.omega[j] * obs.lambda_box[j].width() / 2.0;
    dl2 += v * v;
  }
  r.D_lambda = std::sqrt(dl2);
  r.M = r.S * r.D_lambda;
  r.theta_norm = spec.theta_true.norm();
  r.delta_phi = sampled_tail_bound(spec, pe_rec, grid, cfg.window_T, pe.sample_decimation);
  r.delta_xi = spec.xi_bound;
  r.delta = delta_total(r.theta_norm, r.delta_phi, r.delta_xi);
  r.dU = max_rate(upsilon_along(spec, pe_rec, spec.lambda_true, cfg.window_T, pe.sample_decimation));
  r.beta_cb = bs.beta_cb;

  try {
    r.stability = estimate_stability(
        head(regressor_along(spec, rec, spec.lambda_true, cfg.window_T, pe.sample_decimation), bs.stability_horizon), obs.alpha, obs.gamma_theta);
  } catch (const DomainFault& e) {
    throw ConstantUnavailable(std::string("rho, D_rho: ") + e.what());
  }
  r.kappa = r.stability.D_rho / r.stability.rho;

  BoundInputs in;
  in.mu = r.mu;
  in.B = r.regressor.B;
  in.D = r.regressor.D;
  in.D_c = r.regressor.D_c;
  in.L = r.L;
  in.M = r.M;
  in.rho = r.stability.rho;
  in.D_rho = r.stability.D_rho;
  in.D_lambda = r.D_lambda;
  in.theta_norm = r.theta_norm;
  in.Delta_phi = r.delta_phi;
  in.Delta_xi = r.delta_xi;
  in.dU = r.dU;
  in.beta_cb = r.beta_cb;
  try {
    r.gamma_star = gamma_star(in, default_d_grid(bs.d_points), default_psi_grid(bs.psi_points));
  } catch (const DomainFault& e) {
    throw ConstantUnavailable(std::string("gamma*: ") + e.what());
  }
  r.gamma = obs.gamma;
  r.gamma_advisory = obs.gamma > r.gamma_star.value;

  const double lip = r.theta_norm * in.D + in.D_c;
  r.gain_c = lip * r.kappa;
  r.gain_d = 2.0 * r.delta * r.kappa;
  r.cascade_kappa = bs.cascade_kappa;
  r.cascade_d = bs.cascade_d;
  r.cascade_h0 = bs.cascade_h0;
  Eigen::VectorXd theta0 = obs.theta_init.size() ? obs.theta_init : Eigen::VectorXd::Zero(spec.theta_true.size());
  r.cascade_x0_norm = (theta0 - spec.theta_true).norm();
  const double rho = r.stability.rho;
  const double D_rho = r.stability.D_rho;
  try {
    r.cascade = cascade_bounds([rho, D_rho](double tau) { return D_rho * std::exp(-rho * tau); }, r.gain_c,
                               r.gain_c, r.gain_d, r.gain_d, r.cascade_x0_norm, r.cascade_x0_norm,
                               bs.cascade_h0, bs.cascade_kappa, bs.cascade_d);
  } catch (const DomainFault& e) {
    throw ConstantUnavailable(std::string("cascade: ") + e.what());
  }

  r.theta_error_floor = theta_error_bound(r.kappa, in.D, in.D_c, r.theta_norm, 0.0, r.delta);
  r.epsilon = obs.epsilon;
  r.ltv_residual = ltv_residual_bound(obs.epsilon, r.dU, r.beta_cb, r.delta);
  if (r.stability.residual > 1.0) {
    std::ostringstream msg;
    msg << "envelope fit residual " << r.stability.residual << " (log scale) is large; rho, D_rho are rough";
    r.warnings.push_back(msg.str());
  }
  return r;
}

}  // namespace adaptobs
