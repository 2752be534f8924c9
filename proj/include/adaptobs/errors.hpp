#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adaptobs {

// Base for every library fault. Callers that only need a message can catch this.
class Fault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite state produced by a step.
class IntegrationFault : public Fault {
 public:
  IntegrationFault(double t, std::size_t component, const std::string& what)
      : Fault(what), t_(t), component_(component) {}
  double time() const noexcept { return t_; }
  std::size_t component() const noexcept { return component_; }

 private:
  double t_;
  std::size_t component_;
};

// A plant leaves its model class (e.g. a relaxation rate that is not positive).
class ModelViolation : public Fault {
 public:
  using Fault::Fault;
};

// Out-of-order, gapped or insufficient history.
class BufferFault : public Fault {
 public:
  using Fault::Fault;
};

// A maintained invariant was broken beyond its tolerance.
class InvariantFault : public Fault {
 public:
  using Fault::Fault;
};

// Inputs outside the domain of a formula or estimator.
class DomainFault : public Fault {
 public:
  using Fault::Fault;
};

// The closed loop left the divergence threshold.
class DivergenceFault : public Fault {
 public:
  DivergenceFault(double t, const std::string& what) : Fault(what), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

// A constant required by a bound could not be estimated or was not supplied.
class ConstantUnavailable : public Fault {
 public:
  using Fault::Fault;
};

// Malformed or invalid configuration. Carries the offending field and line when known.
class ConfigError : public Fault {
 public:
  ConfigError(std::string field, int line, const std::string& what)
      : Fault(what), field_(std::move(field)), line_(line) {}
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

}  // namespace adaptobs
