#include "adaptobs/ode.hpp"

#include "adaptobs/errors.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace adaptobs {

void IntegrationGrid::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integration grid: dt must be positive");
  if (!std::isfinite(t0) || !std::isfinite(t_end)) throw std::invalid_argument("integration grid: non-finite bounds");
  if (t_end < t0) throw std::invalid_argument("integration grid: t_end < t0");
  const double n = (t_end - t0) / dt;
  if (n > static_cast<double>(std::numeric_limits<std::int64_t>::max() / 2))
    throw std::invalid_argument("integration grid: step count overflows");
}

std::size_t IntegrationGrid::steps() const {
  validate();
  // Round rather than truncate so that e.g. (1 - 0) / 0.1 gives 10 steps.
  return static_cast<std::size_t>(std::llround((t_end - t0) / dt));
}

void Rk4Stepper::resize(Eigen::Index dim) {
  k1_.resize(dim);
  k2_.resize(dim);
  k3_.resize(dim);
  k4_.resize(dim);
  tmp_.resize(dim);
}

void Rk4Stepper::step(const VectorField& rhs, double t, StateVector& x, double dt) {
  if (k1_.size() != x.size()) resize(x.size());
  const double h2 = 0.5 * dt;
  rhs(t, x, k1_);
  tmp_.noalias() = x + h2 * k1_;
  rhs(t + h2, tmp_, k2_);
  tmp_.noalias() = x + h2 * k2_;
  rhs(t + h2, tmp_, k3_);
  tmp_.noalias() = x + dt * k3_;
  rhs(t + dt, tmp_, k4_);
  x += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);

  if (const auto bad = first_non_finite(x); bad >= 0) {
    std::ostringstream msg;
    msg << "non-finite state component " << bad << " after step at t=" << (t + dt);
    throw IntegrationFault(t + dt, static_cast<std::size_t>(bad), msg.str());
  }
}

StateVector rk4_step(const VectorField& rhs, double t, const StateVector& x, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  Rk4Stepper stepper(x.size());
  StateVector out = x;
  stepper.step(rhs, t, out, dt);
  return out;
}

Eigen::Index first_non_finite(const StateVector& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) return i;
  }
  return -1;
}

Trajectory integrate(const VectorField& rhs, const IntegrationGrid& grid, const StateVector& x0,
                     const std::vector<StepCallback>& callbacks, std::size_t record_stride) {
  const std::size_t n = grid.steps();
  if (record_stride == 0) record_stride = 1;
  if (const auto bad = first_non_finite(x0); bad >= 0)
    throw IntegrationFault(grid.t0, static_cast<std::size_t>(bad), "non-finite initial state");

  Trajectory traj;
  traj.times.reserve(n / record_stride + 2);
  traj.states.reserve(n / record_stride + 2);
  traj.times.push_back(grid.t0);
  traj.states.push_back(x0);

  Rk4Stepper stepper(x0.size());
  StateVector x = x0;
  for (std::size_t k = 0; k < n; ++k) {
    stepper.step(rhs, grid.time(k), x, grid.dt);
    const double t = grid.time(k + 1);
    for (const auto& cb : callbacks) cb(k + 1, t, x);
    if ((k + 1) % record_stride == 0 || k + 1 == n) {
      traj.times.push_back(t);
      traj.states.push_back(x);
    }
  }
  return traj;
}

}  // namespace adaptobs
