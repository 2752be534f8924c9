#pragma once

// Co-integration of a plant and the adaptive observer on a shared fixed grid.

#include "adaptobs/observer.hpp"
#include "adaptobs/ode.hpp"
#include "adaptobs/plant.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace adaptobs {

enum class RegressorMode { Interpolated, Direct };

RegressorMode parse_regressor_mode(const std::string& name);
std::string to_string(RegressorMode m);

// A derived quantity recorded alongside the trajectory, e.g. a physical state recovered from
// the reconstruction filters. Both callbacks see the plant state and the observer state.
struct ReconstructionChannel {
  std::string name;
  std::function<double(double t, const StateVector& plant)> truth;
  std::function<double(double t, const StateVector& plant, const ObserverState& obs,
                       const Eigen::VectorXd& lambda_hat)>
      estimate;
};

struct LoopOptions {
  double window_T = 100.0;
  RegressorMode mode = RegressorMode::Interpolated;
  std::size_t nodes = 40;
  std::size_t decimation = 100;
  double band_percent = 5.0;
  double tail_fraction = 0.1;
  std::size_t checkpoints = 20;
  double divergence_limit = 1e6;
  // Exploration-gain cap compared against gamma.
  std::optional<double> gamma_star;
  bool enforce_gamma = false;
  std::vector<ReconstructionChannel> channels;
};

struct Sample {
  double t = 0.0;
  StateVector plant;
  double x0_hat = 0.0;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd lambda_hat;
  Eigen::VectorXd x_hat;
  double e = 0.0;           // sigma(||x0 - x0_hat||_eps)
  double e_deadzone = 0.0;  // ||x0 - x0_hat||_eps
  double warp = 0.0;
  std::vector<double> channel_truth;
  std::vector<double> channel_estimate;
};

struct ConvergenceTime {
  std::string name;
  double truth = 0.0;
  double terminal = 0.0;
  // First grid time after the last sample outside the band; empty if the final sample is outside.
  std::optional<double> time;
};

struct DeltaPhiReport {
  double tail = 0.0;           // sum_i sup|c_i| exp(-beta_min T) sup|phi_i| / beta_min
  double quadrature = 0.0;     // max over checkpoints of |mu(dt) - mu(2 dt)| scaled by |c_i|
  double interpolation = 0.0;  // max over checkpoints of |mu_interp - mu_direct| scaled by |c_i|
  double total = 0.0;
  std::vector<double> beta_min;
  std::vector<double> phi_sup;
  std::vector<double> coupling_sup;
  std::size_t checkpoints = 0;
};

struct ExperimentResult {
  std::string name;
  std::vector<Sample> samples;
  std::vector<std::string> channel_names;
  std::size_t steps = 0;

  Eigen::VectorXd theta_true;
  Eigen::VectorXd lambda_true;
  Eigen::VectorXd theta_final;
  Eigen::VectorXd lambda_final;
  std::vector<ConvergenceTime> convergence;  // theta_1..d, then lambda_1..s
  double band_percent = 0.0;

  double tail_start = 0.0;
  double tail_deadzone_mean = 0.0;
  Eigen::VectorXd tail_lambda_variation;
  double warm_up_end = 0.0;

  double max_torus_drift = 0.0;   // largest |r^2 - 1| before renormalization in one step
  double max_torus_defect = 0.0;  // largest |r^2 - 1| after renormalization
  double max_output_error = 0.0;

  DeltaPhiReport delta_phi;
  double delta_xi = 0.0;

  std::optional<double> gamma_star;
  bool gamma_advisory = false;
};

// Plant first (RK4 at the true parameters), then the observer over the same step with the
// measured output interpolated by a cubic Hermite polynomial at stage times.
ExperimentResult run_closed_loop(const PlantSpec& spec, const ObserverConfig& cfg,
                                 const IntegrationGrid& grid, const LoopOptions& opts);

// Convergence time of a sampled scalar series against a band of `band_percent` around truth
// (absolute band when truth is zero).
std::optional<double> last_entry_time(const std::vector<double>& t, const std::vector<double>& v,
                                      double truth, double band_percent);

}  // namespace adaptobs
