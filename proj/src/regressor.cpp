#include "adaptobs/regressor.hpp"

#include "adaptobs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace adaptobs {

namespace {

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

void check_next_time(double last, double dt, double t) {
  if (!same_time(t, last + dt)) {
    std::ostringstream msg;
    msg << "history sample at t=" << t << " does not follow t=" << last << " by dt=" << dt;
    throw BufferFault(msg.str());
  }
}

std::vector<double> gather(const Eigen::VectorXd& lambda, const std::vector<std::size_t>& idx) {
  std::vector<double> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = lambda[static_cast<Eigen::Index>(idx[k])];
  return out;
}

std::size_t window_steps_for(double dt, double window) {
  if (!(dt > 0.0) || !(window > 0.0)) throw std::invalid_argument("window and dt must be positive");
  return static_cast<std::size_t>(std::llround(window / dt));
}

}  // namespace

HistoryBuffer::HistoryBuffer(double dt, double window, std::size_t extra)
    : dt_(dt), window_(window), window_steps_(window_steps_for(dt, window)) {
  const auto cap = static_cast<std::size_t>(std::ceil(window / dt - 1e-9)) + 1 + extra;
  t_.assign(std::max(cap, window_steps_ + 1 + extra), 0.0);
  x_.assign(t_.size(), 0.0);
}

void HistoryBuffer::push(double t, double x0) {
  if (size_ == 0) {
    first_time_ = t;
  } else {
    check_next_time(back_time(), dt_, t);
  }
  if (size_ < t_.size()) {
    t_[slot(size_)] = t;
    x_[slot(size_)] = x0;
    ++size_;
  } else {
    t_[head_] = t;
    x_[head_] = x0;
    head_ = (head_ + 1) % t_.size();
  }
}

std::optional<std::size_t> HistoryBuffer::index_of(double t) const {
  if (size_ == 0) return std::nullopt;
  const double k = std::round((t - time_at(0)) / dt_);
  if (k < 0.0 || k >= static_cast<double>(size_)) return std::nullopt;
  const auto idx = static_cast<std::size_t>(k);
  if (!same_time(time_at(idx), t)) return std::nullopt;
  return idx;
}

MuResult windowed_mu(const HistoryBuffer& buf, const PlantSpec& spec, std::size_t i, double tau,
                     ParamView p, double t, std::size_t stride) {
  if (i == 0 || i > spec.n()) throw std::invalid_argument("windowed_mu: row index must be a filtered row");
  if (stride == 0) stride = 1;
  const auto& ch = spec.channels[i];
  const auto at = buf.index_of(t);
  if (!at) {
    std::ostringstream msg;
    msg << "no history sample at t=" << t;
    throw BufferFault(msg.str());
  }
  const std::size_t idx = *at;
  const std::size_t full = buf.window_steps();
  const bool has_first = same_time(buf.time_at(0), buf.first_time());

  MuResult res;
  res.value = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ch.phi_dim));
  std::size_t intervals = full;
  if (idx < full) {
    if (!has_first) throw BufferFault("history no longer covers the window");
    intervals = idx;
    res.warm_up = true;
  }
  intervals = intervals / stride * stride;
  if (intervals == 0) return res;

  const double h = buf.dt() * static_cast<double>(stride);
  std::vector<double> phi(ch.phi_dim);
  double exponent = 0.0;
  double beta_next = 0.0;
  const std::size_t lo = idx - intervals;
  for (std::size_t j = 0; j <= intervals / stride; ++j) {
    const std::size_t k = idx - j * stride;
    const double tk = buf.time_at(k);
    const double xk = buf.x0_at(k);
    const double beta = eval_beta(spec, i, xk, tau, tk);
    if (j > 0) exponent += 0.5 * h * (beta + beta_next);
    beta_next = beta;
    ch.phi(xk, p, tk, phi);
    const double w = (k == idx || k == lo) ? 0.5 * h : h;
    const double scale = w * std::exp(-exponent);
    for (std::size_t r = 0; r < ch.phi_dim; ++r) res.value[static_cast<Eigen::Index>(r)] += scale * phi[r];
  }
  return res;
}

RegressorValue assemble_regressor(const HistoryBuffer& buf, double x0,
                                  const Eigen::VectorXd& lambda_hat, double t,
                                  const PlantSpec& spec) {
  for (std::size_t j = 0; j < spec.lambda_box.size(); ++j) {
    if (!spec.lambda_box[j].contains(lambda_hat[static_cast<Eigen::Index>(j)], 1e-12))
      throw DomainFault("assemble_regressor: lambda estimate outside its box at component " + std::to_string(j));
  }
  RegressorValue out;
  out.at_time = t;
  out.at_lambda = lambda_hat;
  out.components.resize(static_cast<Eigen::Index>(spec.regressor_dim()));

  const auto& ch0 = spec.channels[0];
  if (ch0.phi_dim > 0)
    eval_phi(spec, 0, x0, lambda_hat, t, std::span<double>(out.components.data(), ch0.phi_dim));

  for (std::size_t i = 1; i <= spec.n(); ++i) {
    const auto& ch = spec.channels[i];
    const auto p = gather(lambda_hat, ch.p_index);
    const double tau = lambda_hat[static_cast<Eigen::Index>(ch.tau_index)];
    const MuResult mu = windowed_mu(buf, spec, i, tau, p, t);
    const double c = eval_coupling(spec, i, x0, lambda_hat, t);
    out.components.segment(static_cast<Eigen::Index>(spec.theta_offset(i)), static_cast<Eigen::Index>(ch.phi_dim)) =
        c * mu.value;
    out.warm_up = out.warm_up || mu.warm_up;
  }
  return out;
}

Eigen::VectorXd aux_filter_step(const Eigen::VectorXd& state, double tau,
                                const Eigen::VectorXd& phi_val, double dt) {
  auto f = [&](const Eigen::VectorXd& eta) -> Eigen::VectorXd { return -tau * eta + phi_val; };
  const Eigen::VectorXd k1 = f(state);
  const Eigen::VectorXd k2 = f(state + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = f(state + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = f(state + dt * k3);
  return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double approximation_error_bound(double window, double beta_min, double phi_sup) {
  if (!(beta_min > 0.0)) throw DomainFault("approximation_error_bound: beta_min must be positive");
  if (!(window > 0.0)) throw DomainFault("approximation_error_bound: window must be positive");
  if (phi_sup < 0.0) throw DomainFault("approximation_error_bound: phi_sup must be nonnegative");
  return std::exp(-beta_min * window) * phi_sup / beta_min;
}

// ---------------------------------------------------------------------------------------------

FilteredIntegralBank::FilteredIntegralBank(const PlantSpec& spec, std::size_t channel,
                                           std::vector<double> taus,
                                           const Eigen::VectorXd& lambda_for_p, double dt,
                                           double window)
    : spec_(&spec),
      channel_(channel),
      taus_(std::move(taus)),
      dt_(dt),
      window_steps_(window_steps_for(dt, window)) {
  if (channel_ == 0 || channel_ > spec.n()) throw std::invalid_argument("bank: row index must be a filtered row");
  if (taus_.empty()) throw std::invalid_argument("bank: no nodes");
  p_ = gather(lambda_for_p, spec.channels[channel_].p_index);
  dim_ = spec.channels[channel_].phi_dim;
  ring_ = window_steps_ + 1;
  phi_ring_.assign(ring_ * dim_, 0.0);
  exp_ring_.assign(ring_ * taus_.size(), 0.0);
  beta_last_.assign(taus_.size(), 0.0);
  acc_.assign(taus_.size() * dim_, 0.0);
}

void FilteredIntegralBank::push(double t, double x0) {
  if (count_ > 0) check_next_time(last_t_, dt_, t);
  const auto& ch = spec_->channels[channel_];
  const std::size_t nodes = taus_.size();

  std::array<double, 32> phi_new{};
  if (dim_ > phi_new.size()) throw std::invalid_argument("bank: phi dimension too large");
  ch.phi(x0, p_, t, std::span<double>(phi_new.data(), dim_));

  const std::size_t slot = count_ == 0 ? 0 : (head_ + 1) % ring_;
  const bool evict = count_ >= ring_;
  const double* phi_old = &phi_ring_[slot * dim_];

  for (std::size_t m = 0; m < nodes; ++m) {
    const double beta = eval_beta(*spec_, channel_, x0, taus_[m], t);
    double* acc = &acc_[m * dim_];
    double b_new = 0.0;
    if (count_ == 0) {
      for (std::size_t r = 0; r < dim_; ++r) acc[r] = phi_new[r];
    } else {
      const double step = 0.5 * dt_ * (beta_last_[m] + beta);
      b_new = exp_ring_[head_ * nodes + m] + step;
      const double decay = std::exp(-step);
      for (std::size_t r = 0; r < dim_; ++r) acc[r] = decay * acc[r] + phi_new[r];
      if (evict) {
        const double w = std::exp(-(b_new - exp_ring_[slot * nodes + m]));
        for (std::size_t r = 0; r < dim_; ++r) acc[r] -= w * phi_old[r];
      }
    }
    exp_ring_[slot * nodes + m] = b_new;
    beta_last_[m] = beta;
  }
  for (std::size_t r = 0; r < dim_; ++r) phi_ring_[slot * dim_ + r] = phi_new[r];
  head_ = slot;
  last_t_ = t;
  ++count_;
}

void FilteredIntegralBank::value(std::size_t m, std::span<double> out) const {
  if (count_ < 2) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const std::size_t nodes = taus_.size();
  const std::size_t oldest = count_ >= ring_ ? (head_ + 1) % ring_ : 0;
  const double e_lo = std::exp(-(exp_ring_[head_ * nodes + m] - exp_ring_[oldest * nodes + m]));
  const double* acc = &acc_[m * dim_];
  const double* phi_lo = &phi_ring_[oldest * dim_];
  const double* phi_hi = &phi_ring_[head_ * dim_];
  for (std::size_t r = 0; r < dim_; ++r) out[r] = dt_ * (acc[r] - 0.5 * e_lo * phi_lo[r] - 0.5 * phi_hi[r]);
}

void FilteredIntegralBank::values(Eigen::MatrixXd& out) const {
  out.resize(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(taus_.size()));
  for (std::size_t m = 0; m < taus_.size(); ++m)
    value(m, std::span<double>(out.col(static_cast<Eigen::Index>(m)).data(), dim_));
}

// ---------------------------------------------------------------------------------------------

std::vector<double> chebyshev_lobatto_nodes(const Interval& box, std::size_t count) {
  if (count == 0) throw std::invalid_argument("chebyshev nodes: count must be positive");
  if (count == 1 || box.width() == 0.0) return {box.mid()};
  std::vector<double> nodes(count);
  const double half = 0.5 * box.width();
  for (std::size_t m = 0; m < count; ++m) {
    nodes[m] = box.mid() + half * std::cos(std::numbers::pi * static_cast<double>(m) / static_cast<double>(count - 1));
  }
  // Pin the endpoints exactly.
  nodes.front() = box.hi;
  nodes.back() = box.lo;
  return nodes;
}

void chebyshev_barycentric(const std::vector<double>& nodes, double x, std::span<double> coef) {
  const std::size_t n = nodes.size();
  if (n == 1) {
    coef[0] = 1.0;
    return;
  }
  for (std::size_t m = 0; m < n; ++m) {
    if (x == nodes[m]) {
      std::fill(coef.begin(), coef.end(), 0.0);
      coef[m] = 1.0;
      return;
    }
  }
  double total = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    double w = (m % 2 == 0) ? 1.0 : -1.0;
    if (m == 0 || m == n - 1) w *= 0.5;
    coef[m] = w / (x - nodes[m]);
    total += coef[m];
  }
  for (std::size_t m = 0; m < n; ++m) coef[m] /= total;
}

namespace {

class DirectRegressor final : public FilteredRegressor {
 public:
  DirectRegressor(const PlantSpec& spec, double dt, double window)
      : spec_(spec), buf_(dt, window, 1) {}

  void push(double t, double x0) override { buf_.push(t, x0); }

  void filtered(double frac, const Eigen::VectorXd& lambda_hat, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    if (buf_.empty()) return;
    const double t_cur = buf_.back_time();
    const bool has_prev = buf_.size() >= 2;
    const double t_prev = has_prev ? buf_.time_at(buf_.size() - 2) : t_cur;
    const double w_cur = has_prev ? frac : 1.0;
    std::size_t off = 0;
    for (std::size_t i = 1; i <= spec_.n(); ++i) {
      const auto& ch = spec_.channels[i];
      const auto p = gather(lambda_hat, ch.p_index);
      const double tau = lambda_hat[static_cast<Eigen::Index>(ch.tau_index)];
      Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ch.phi_dim));
      if (w_cur > 0.0) v += w_cur * windowed_mu(buf_, spec_, i, tau, p, t_cur).value;
      if (w_cur < 1.0) v += (1.0 - w_cur) * windowed_mu(buf_, spec_, i, tau, p, t_prev).value;
      for (std::size_t r = 0; r < ch.phi_dim; ++r) out[off + r] = v[static_cast<Eigen::Index>(r)];
      off += ch.phi_dim;
    }
  }

  bool warm_up() const override {
    return buf_.empty() || buf_.back_time() - buf_.first_time() < buf_.window() - 1e-9 * buf_.window();
  }

 private:
  const PlantSpec& spec_;
  HistoryBuffer buf_;
};

class InterpolatedRegressor final : public FilteredRegressor {
 public:
  InterpolatedRegressor(const PlantSpec& spec, double dt, double window, std::size_t node_count) {
    std::size_t off = 0;
    for (std::size_t i = 1; i <= spec.n(); ++i) {
      const auto& ch = spec.channels[i];
      if (!ch.p_index.empty())
        throw std::invalid_argument("interpolated regressor: row " + std::to_string(i) +
                                    " has phi depending on p; use direct quadrature");
      const Interval box = spec.lambda_box.at(ch.tau_index);
      auto nodes = chebyshev_lobatto_nodes(box, node_count);
      Row row{i, ch.tau_index, off, nodes,
              FilteredIntegralBank(spec, i, nodes, spec.lambda_true, dt, window), {}, {}};
      row.prev = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ch.phi_dim), static_cast<Eigen::Index>(nodes.size()));
      row.cur = row.prev;
      rows_.push_back(std::move(row));
      off += ch.phi_dim;
    }
    std::size_t widest = 1;
    for (const auto& r : rows_) widest = std::max(widest, r.nodes.size());
    coef_.resize(widest);
  }

  void push(double t, double x0) override {
    for (auto& row : rows_) {
      row.bank.push(t, x0);
      std::swap(row.prev, row.cur);
      row.bank.values(row.cur);
      if (row.bank.samples() == 1) row.prev = row.cur;
    }
  }

  void filtered(double frac, const Eigen::VectorXd& lambda_hat, std::span<double> out) const override {
    for (const auto& row : rows_) {
      const double tau = lambda_hat[static_cast<Eigen::Index>(row.tau_index)];
      std::span<double> coef(coef_.data(), row.nodes.size());
      chebyshev_barycentric(row.nodes, tau, coef);
      const auto d = row.cur.rows();
      for (Eigen::Index r = 0; r < d; ++r) {
        double acc = 0.0;
        for (std::size_t m = 0; m < row.nodes.size(); ++m) {
          const auto mm = static_cast<Eigen::Index>(m);
          acc += coef[m] * ((1.0 - frac) * row.prev(r, mm) + frac * row.cur(r, mm));
        }
        out[row.offset + static_cast<std::size_t>(r)] = acc;
      }
    }
  }

  bool warm_up() const override {
    for (const auto& row : rows_)
      if (row.bank.warm_up()) return true;
    return false;
  }

 private:
  struct Row {
    std::size_t channel;
    std::size_t tau_index;
    std::size_t offset;
    std::vector<double> nodes;
    FilteredIntegralBank bank;
    Eigen::MatrixXd prev;
    Eigen::MatrixXd cur;
  };
  std::vector<Row> rows_;
  mutable std::vector<double> coef_;
};

}  // namespace

std::unique_ptr<FilteredRegressor> make_direct_regressor(const PlantSpec& spec, double dt, double window) {
  return std::make_unique<DirectRegressor>(spec, dt, window);
}

std::unique_ptr<FilteredRegressor> make_interpolated_regressor(const PlantSpec& spec, double dt,
                                                               double window, std::size_t nodes) {
  return std::make_unique<InterpolatedRegressor>(spec, dt, window, nodes);
}

}  // namespace adaptobs
