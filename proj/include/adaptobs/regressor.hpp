#pragma once

// Windowed filtered integrals
//   mu_i(t; tau_i, p_i) = int_{max(t-T, t0)}^{t} exp(-int_s^t beta_i(x0, tau_i, r) dr) phi_i(x0(s), p_i, s) ds
// evaluated by trapezoidal quadrature on the integration grid, and the regressor
//   phibar = (phi_0, c_1 mu_1, ..., c_n mu_n).

#include "adaptobs/plant.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace adaptobs {

// Ring of (t, x0) samples on a uniform grid. Holds at least ceil(T/dt) + 1 samples plus
// `extra` so that the window ending one step earlier can still be evaluated.
class HistoryBuffer {
 public:
  HistoryBuffer(double dt, double window, std::size_t extra = 1);

  // Throws BufferFault unless t is exactly one dt after the last sample (1e-9 relative).
  void push(double t, double x0);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return t_.size(); }
  bool empty() const { return size_ == 0; }
  double dt() const { return dt_; }
  double window() const { return window_; }
  // Intervals spanned by a full window: round(T / dt).
  std::size_t window_steps() const { return window_steps_; }
  // Time of the first sample ever pushed (the lower integration limit during warm-up).
  double first_time() const { return first_time_; }

  // k = 0 is the oldest retained sample.
  double time_at(std::size_t k) const { return t_[slot(k)]; }
  double x0_at(std::size_t k) const { return x_[slot(k)]; }
  double back_time() const { return time_at(size_ - 1); }

  // Position of the sample at time t, if retained.
  std::optional<std::size_t> index_of(double t) const;

 private:
  std::size_t slot(std::size_t k) const { return (head_ + k) % t_.size(); }

  double dt_;
  double window_;
  std::size_t window_steps_;
  std::vector<double> t_;
  std::vector<double> x_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  double first_time_ = 0.0;
};

struct MuResult {
  Eigen::VectorXd value;
  bool warm_up = false;  // the window was truncated at the first sample
};

// Trapezoidal quadrature of the windowed integral for row i at (tau, p), window ending at the
// retained sample with time t. The inner exponent is a cumulative trapezoid over the same grid.
// `stride` > 1 evaluates on every stride-th sample (used for grid-refinement error estimates).
MuResult windowed_mu(const HistoryBuffer& buf, const PlantSpec& spec, std::size_t i, double tau,
                     ParamView p, double t, std::size_t stride = 1);

struct RegressorValue {
  Eigen::VectorXd components;
  double at_time = 0.0;
  Eigen::VectorXd at_lambda;
  bool warm_up = false;
};

// phibar(x0, lambda_hat, t) by direct quadrature over the buffer.
RegressorValue assemble_regressor(const HistoryBuffer& buf, double x0,
                                  const Eigen::VectorXd& lambda_hat, double t,
                                  const PlantSpec& spec);

// One RK4 step of eta' = -tau eta + phi with phi held over the step. Reference filter only.
Eigen::VectorXd aux_filter_step(const Eigen::VectorXd& state, double tau,
                                const Eigen::VectorXd& phi_val, double dt);

// exp(-beta_min T) sup|phi| / beta_min: bound on the tail dropped by the window.
double approximation_error_bound(double window, double beta_min, double phi_sup);

// Recursive O(1)-per-sample trapezoidal window integrals for one row at several tau values
// sharing the same p. Produces the same quadrature as windowed_mu up to rounding.
class FilteredIntegralBank {
 public:
  FilteredIntegralBank(const PlantSpec& spec, std::size_t channel, std::vector<double> taus,
                       const Eigen::VectorXd& lambda_for_p, double dt, double window);

  void push(double t, double x0);

  std::size_t nodes() const { return taus_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<double>& taus() const { return taus_; }
  bool warm_up() const { return count_ <= window_steps_; }
  std::size_t samples() const { return count_; }

  // Window integral at node m, written to out (length dim()).
  void value(std::size_t m, std::span<double> out) const;
  // dim() x nodes() matrix of all node values.
  void values(Eigen::MatrixXd& out) const;

 private:
  const PlantSpec* spec_;
  std::size_t channel_;
  std::vector<double> taus_;
  std::vector<double> p_;
  std::size_t dim_;
  double dt_;
  std::size_t window_steps_;
  std::size_t ring_;             // window_steps_ + 1
  std::vector<double> phi_ring_; // ring_ x dim_
  std::vector<double> exp_ring_; // ring_ x nodes: cumulative exponent
  std::vector<double> beta_last_;
  std::vector<double> acc_;      // nodes x dim_: sum_k exp(-(B_N - B_k)) phi_k over the window
  std::size_t head_ = 0;         // slot of the newest sample
  std::size_t count_ = 0;
  double last_t_ = 0.0;
};

// Chebyshev-Lobatto nodes of an interval, endpoints included.
std::vector<double> chebyshev_lobatto_nodes(const Interval& box, std::size_t count);

// Barycentric interpolation weights of `x` against Chebyshev-Lobatto `nodes`.
void chebyshev_barycentric(const std::vector<double>& nodes, double x, std::span<double> coef);

// Source of the filtered block (mu_1, ..., mu_n) of the regressor at the current estimate,
// linearly blended between the last two grid samples for RK4 stage times.
class FilteredRegressor {
 public:
  virtual ~FilteredRegressor() = default;
  virtual void push(double t, double x0) = 0;
  // frac in [0, 1] between the previous and the newest sample; out has length sum_{i>=1} d_i.
  virtual void filtered(double frac, const Eigen::VectorXd& lambda_hat, std::span<double> out) const = 0;
  virtual bool warm_up() const = 0;
};

// Per-step recomputation from the history buffer. Cost O(T/dt) per evaluation.
std::unique_ptr<FilteredRegressor> make_direct_regressor(const PlantSpec& spec, double dt, double window);

// Window integrals maintained recursively at Chebyshev-Lobatto nodes spanning each row's tau box
// and interpolated to the current tau estimate. Requires phi_i independent of p_i.
std::unique_ptr<FilteredRegressor> make_interpolated_regressor(const PlantSpec& spec, double dt,
                                                               double window, std::size_t nodes);

}  // namespace adaptobs
