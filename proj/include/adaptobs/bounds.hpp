#pragma once

// Closed-form gain and error bounds, and sampling estimators for the constants they need.
// Every constant estimated here is empirical: a max over sampled trajectories and grids.

#include "adaptobs/excitation.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace adaptobs {

struct BoundInputs {
  double mu = 0.0;          // PE level
  double B = 0.0;           // sup ||phibar||
  double D = 0.0;           // lambda-Lipschitz constant of phibar
  double D_c = 0.0;         // lambda-Lipschitz constant of c_0
  double L = 0.0;           // PE window
  double M = 0.0;           // torus right-hand side bound per unit gamma
  double rho = 0.0;         // exponential rate of the frozen-lambda error system
  double D_rho = 0.0;       // its overshoot
  double D_lambda = 0.0;    // lambda_hat displacement per unit warped time
  double theta_norm = 0.0;
  double Delta_phi = 0.0;
  double Delta_xi = 0.0;
  double dU = 0.0;          // sup |d/dt upsilon|
  double beta_cb = 1.0;     // lower bound on |c^T Phi b|
};

// ||theta|| Delta_phi + Delta_xi
double delta_total(double theta_norm, double delta_phi, double delta_xi);

// mu / (4 B D L M)
double pe_gamma_cap(double mu, double B, double D, double L, double M);

// ((psi-1)/psi) rho^2 / ln(2 psi D_rho / d) / (2 (||theta|| D + D_c) D_rho D_lambda) / (1 + D_rho psi / (1 - d))
double gamma_g_term(const BoundInputs& in, double d, double psi);

struct GammaStar {
  double value = 0.0;
  double pe_cap = 0.0;
  double g = 0.0;
  double best_d = 0.0;
  double best_psi = 0.0;
  std::size_t d_points = 0;
  std::size_t psi_points = 0;
};

// min(pe_gamma_cap, G) with G the best value of gamma_g_term over the (d, psi) grid.
GammaStar gamma_star(const BoundInputs& in, const std::vector<double>& d_grid, const std::vector<double>& psi_grid);

// Log-spaced d in [1e-3, 0.999] and psi in 1 + [1e-3, 99].
std::vector<double> default_d_grid(std::size_t points = 50);
std::vector<double> default_psi_grid(std::size_t points = 50);

// kappa ((D ||theta|| + D_c) lambda_err + 2 Delta)
double theta_error_bound(double kappa, double D, double D_c, double theta_norm, double lambda_err, double delta);

// 2 sqrt(6 eps dU / beta_cb) + delta
double ltv_residual_bound(double epsilon, double dU, double beta_cb, double delta);

// Solves f(tau) = target for a strictly decreasing f on [0, inf) by bisection to `tol`.
double inverse_decreasing(const std::function<double(double)>& f, double target, double tol = 1e-10);

struct CascadeBounds {
  double gamma_max = 0.0;
  double epsilon_min = 0.0;
  double beta_inverse = 0.0;  // beta^{-1}(d / (2 kappa))
};

CascadeBounds cascade_bounds(const std::function<double(double)>& beta_fn, double c1, double c2,
                             double d1, double d2, double x0_norm, double y0_norm, double h0,
                             double kappa, double d);

struct RegressorConstants {
  double B = 0.0;
  double D = 0.0;
  double D_c = 0.0;
};

// B = max ||phibar||; D, D_c = max difference quotients over all grid pairs and samples, and
// between each node and a probe offset by `probe_fraction` of the grid span along each axis
// (toward the interior). `c0` may be empty (D_c = 0); probe_fraction = 0 disables the probes.
RegressorConstants estimate_regressor_constants(const SeriesFn& regressor, const SeriesFn& c0,
                                                const std::vector<Eigen::VectorXd>& grid,
                                                double probe_fraction = 1e-3);

struct StabilityFit {
  double rho = 0.0;
  double D_rho = 0.0;
  double residual = 0.0;  // RMS of the log-linear fit
  double horizon = 0.0;
};

// Simulates q' = [[-alpha, phibar^T], [-gamma_theta phibar, 0]] q from the unit initial
// conditions along the sampled regressor, fits log ||Phi(t)||_F ~ log D - rho t, and raises
// D_rho until the envelope dominates every sample.
StabilityFit estimate_stability(const Series& phibar, double alpha, double gamma_theta);

// Largest |v(t_{k+1}) - v(t_k)| / h over a scalar series.
double max_rate(const Series& v);

}  // namespace adaptobs
