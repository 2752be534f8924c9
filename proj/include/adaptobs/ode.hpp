#pragma once

// Fixed-step classical Runge-Kutta integration.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <vector>

namespace adaptobs {

using StateVector = Eigen::VectorXd;

// dx/dt written into `dxdt`, which is already sized like `x`.
using VectorField = std::function<void(double t, const StateVector& x, StateVector& dxdt)>;

struct IntegrationGrid {
  double t0 = 0.0;
  double t_end = 0.0;
  double dt = 1e-3;

  // Throws std::invalid_argument on t_end < t0, dt <= 0 or an unrepresentable step count.
  void validate() const;
  std::size_t steps() const;
  double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
};

// Invoked after every accepted step with the step index (1-based), time and state.
using StepCallback = std::function<void(std::size_t k, double t, const StateVector& x)>;

// Reusable RK4 workspace; avoids reallocating stage vectors every step.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(Eigen::Index dim = 0) { resize(dim); }

  void resize(Eigen::Index dim);

  // Advances `x` in place by one step. Throws IntegrationFault if the result is not finite.
  void step(const VectorField& rhs, double t, StateVector& x, double dt);

 private:
  StateVector k1_, k2_, k3_, k4_, tmp_;
};

StateVector rk4_step(const VectorField& rhs, double t, const StateVector& x, double dt);

// Index of the first non-finite component, or -1.
Eigen::Index first_non_finite(const StateVector& x);

// Stores every `record_stride`-th grid point (the initial and final points are always kept).
Trajectory integrate(const VectorField& rhs, const IntegrationGrid& grid, const StateVector& x0,
                     const std::vector<StepCallback>& callbacks = {},
                     std::size_t record_stride = 1);

}  // namespace adaptobs
