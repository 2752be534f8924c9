#pragma once

// Experiment data model, the three shipped example configurations, and the runners behind the
// `run`, `check-pe` and `bounds` commands.

#include "adaptobs/bounds.hpp"
#include "adaptobs/closed_loop.hpp"
#include "adaptobs/excitation.hpp"
#include "adaptobs/models.hpp"
#include "adaptobs/observer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace adaptobs {

enum class ModelKind { Duffing, Bioreactor, LotkaVolterra };

// "duffing" / "bioreactor" / "lotka_volterra"; throws std::invalid_argument otherwise.
ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind m);

struct PESettings {
  std::size_t grid_points = 21;  // per lambda dimension
  double L = 500.0;
  double stride = 50.0;
  double t_start = 100.0;
  double t_end = 2100.0;
  std::size_t sample_decimation = 10;  // regressor samples every dt * this
  double threshold = 1e-6;

  std::size_t npe_grid_points = 21;
  double npe_L = 50.0;
  std::size_t npe_decimation = 1000;
  std::size_t npe_t_every = 50;
  double class_tolerance = 1e-3;
};

struct BoundsSettings {
  bool enforce_gamma = false;
  std::size_t grid_points = 11;  // lambda grid for B, D, D_c
  std::size_t d_points = 50;
  std::size_t psi_points = 50;
  double stability_horizon = 2000.0;
  double beta_cb = 1.0;
  double cascade_kappa = 2.0;
  double cascade_d = 0.5;
  double cascade_h0 = 1.0;
};

struct ExperimentConfig {
  std::string name;
  ModelKind model = ModelKind::Duffing;
  models::DuffingParams duffing;
  models::BioreactorParams bioreactor;
  models::LotkaVolterraParams lotka_volterra;

  // Gains, frequencies, saturation and initial torus phase; the lambda box is taken from the plant.
  ObserverConfig observer;
  IntegrationGrid grid;

  double window_T = 100.0;
  RegressorMode mode = RegressorMode::Interpolated;
  std::size_t nodes = 40;

  std::size_t decimation = 100;
  double band_percent = 5.0;
  double tail_fraction = 0.1;

  PESettings pe;
  BoundsSettings bounds;

  // Throws ConfigError naming the offending field (line 0: no source position).
  void validate() const;
};

ExperimentConfig duffing_experiment();
ExperimentConfig bioreactor_experiment();
ExperimentConfig lotka_volterra_experiment();

// Builtin example names: "duffing", "bioreactor", "lotka_volterra".
std::vector<std::string> builtin_names();
std::optional<ExperimentConfig> builtin_experiment(const std::string& name);

PlantSpec build_plant(const ExperimentConfig& cfg);
ObserverConfig build_observer(const ExperimentConfig& cfg, const PlantSpec& spec);
// Physical quantities recovered from the reconstruction filters (Duffing: velocity;
// bio-reactor: s1; Lotka-Volterra: y = x1_hat - theta_hat_2 x0).
std::vector<ReconstructionChannel> reconstruction_channels(const ExperimentConfig& cfg);
LoopOptions build_loop_options(const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::optional<double> gamma_star = {});

struct PEAnalysis {
  PEReport upe;
  NPEReport npe;
};

// Open-loop output at the true parameters, then the uPE check on the regressor and the
// nonlinear PE check on upsilon = theta^T phibar + c_0.
PEAnalysis run_pe_analysis(const ExperimentConfig& cfg);

struct BoundsReport {
  double mu = 0.0;
  std::string mu_source;  // "on-the-fly" or "prior"
  double L = 0.0;
  RegressorConstants regressor;
  double S = 1.0;
  double M = 0.0;
  double D_lambda = 0.0;
  double theta_norm = 0.0;
  double delta_phi = 0.0;
  double delta_xi = 0.0;
  double delta = 0.0;
  double dU = 0.0;
  double beta_cb = 1.0;
  StabilityFit stability;
  double kappa = 0.0;  // D_rho / rho

  GammaStar gamma_star;
  double gamma = 0.0;
  bool gamma_advisory = false;

  double gain_c = 0.0;  // c1 = c2
  double gain_d = 0.0;  // d1 = d2
  double cascade_kappa = 0.0;
  double cascade_d = 0.0;
  double cascade_h0 = 0.0;
  double cascade_x0_norm = 0.0;
  CascadeBounds cascade;

  double theta_error_floor = 0.0;  // theta_error_bound at zero lambda error
  double epsilon = 0.0;
  double ltv_residual = 0.0;

  std::vector<std::string> warnings;
};

// Estimates every constant and evaluates the bounds. `mu_prior` replaces the on-the-fly PE
// check; with `allow_pe` false and no prior, throws ConstantUnavailable. Estimation failures
// (no decay in the envelope fit, degenerate constants) also surface as ConstantUnavailable.
BoundsReport compute_bounds(const ExperimentConfig& cfg, std::optional<double> mu_prior, bool allow_pe);

}  // namespace adaptobs
