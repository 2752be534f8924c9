#pragma once

// Sampled checks of lambda-uniform persistency of excitation and of nonlinear persistency of
// excitation, plus equivalence classes of regressor-indistinguishable parameter values.

#include "adaptobs/ode.hpp"
#include "adaptobs/plant.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace adaptobs {

// Uniformly sampled vector signal: column k is the value at t0 + k h.
struct Series {
  double t0 = 0.0;
  double h = 0.0;
  Eigen::MatrixXd values;

  std::size_t size() const { return static_cast<std::size_t>(values.cols()); }
  double time(std::size_t k) const { return t0 + static_cast<double>(k) * h; }
};

// Signal of interest evaluated at a fixed lambda.
using SeriesFn = std::function<Series(const Eigen::VectorXd& lambda)>;

// Eigenvalues of a symmetric matrix in ascending order by cyclic Jacobi rotations.
// Throws InvariantFault if the off-diagonal mass does not vanish within max_sweeps.
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a, int max_sweeps = 100);

// Tensor grid with `points` values per dimension (a single point sits at the box midpoint).
std::vector<Eigen::VectorXd> lambda_grid(const std::vector<Interval>& box, std::size_t points);

struct PEReport {
  double L = 0.0;
  double stride = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  double sample_spacing = 0.0;
  std::size_t windows = 0;
  std::vector<Eigen::VectorXd> lambda_grid;
  std::vector<double> mu_of_lambda;
  double mu = 0.0;  // min over the grid
  double threshold = 0.0;
  bool verdict = false;
  std::vector<std::string> warnings;
};

// For each grid point: min over window starts t_start + j stride (windows inside
// [t_start, t_end]) of the smallest eigenvalue of the trapezoidal integral of phi phi^T over
// [t, t + L]. L must be an integer multiple of stride.
PEReport check_lambda_uPE(const SeriesFn& regressor, const std::vector<Eigen::VectorXd>& grid,
                          double L, double t_start, double t_end, double stride,
                          double threshold = 1e-6);

// Grid indices whose series stays within `tolerance` (sup over samples of the Euclidean
// distance) of the series at `index`.
std::vector<std::size_t> equivalence_class(std::size_t index, const std::vector<Series>& series,
                                           double tolerance);

// Partition of the grid induced by the pairwise relation above (transitive closure).
std::vector<std::vector<std::size_t>> equivalence_partition(const std::vector<Series>& series,
                                                            double tolerance);

struct NPEReport {
  double L = 0.0;
  double beta = std::numeric_limits<double>::infinity();
  bool unconstrained = true;  // no (lambda, lambda') pair at positive distance was sampled
  std::vector<Eigen::VectorXd> lambda_grid;
  std::vector<std::vector<std::size_t>> classes;
  std::size_t t_samples = 0;
  double class_tolerance = 0.0;
  std::vector<std::string> warnings;
};

// Largest beta such that for every sampled (lambda, lambda', t) some t' in [t - L, t] on the
// sample grid has ||v(lambda, t) - v(lambda', t')|| >= beta dist(E(lambda), lambda').
// `upsilon` supplies v; `classes_from` supplies the signal defining the equivalence classes.
// Sample times t are taken every `t_every` samples starting L after the series start.
NPEReport check_nonlinear_PE(const SeriesFn& upsilon, const SeriesFn& classes_from,
                             const std::vector<Eigen::VectorXd>& grid, double L,
                             std::size_t t_every, double class_tolerance);

// Output samples y(t0 + k dt) of an open-loop plant run at the true parameters.
struct OutputRecord {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> y;
};

OutputRecord simulate_output(const PlantSpec& spec, const IntegrationGrid& grid);

// phibar(y, lambda, t) along the record by windowed quadrature, every `decimation` samples,
// starting at the first sample whose window is full.
Series regressor_along(const PlantSpec& spec, const OutputRecord& rec, const Eigen::VectorXd& lambda,
                       double window, std::size_t decimation);

// theta^T phibar(y, lambda, t) + c_0(y, lambda, t) along the record with theta = theta_true.
Series upsilon_along(const PlantSpec& spec, const OutputRecord& rec, const Eigen::VectorXd& lambda,
                     double window, std::size_t decimation);

// c_0(y, q_0, t) on the same sample grid as regressor_along.
Series coupling_along(const PlantSpec& spec, const OutputRecord& rec, const Eigen::VectorXd& lambda,
                      double window, std::size_t decimation);

}  // namespace adaptobs
