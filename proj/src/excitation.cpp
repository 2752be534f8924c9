#include "adaptobs/excitation.hpp"

#include "adaptobs/errors.hpp"
#include "adaptobs/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace adaptobs {

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& input, int max_sweeps) {
  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw std::invalid_argument("symmetric_eigenvalues: matrix is not square");
  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  const double scale = a.norm();
  if (n == 0) return Eigen::VectorXd();
  if (scale == 0.0) return Eigen::VectorXd::Zero(n);
  if ((input - input.transpose()).norm() > 1e-10 * scale)
    throw std::invalid_argument("symmetric_eigenvalues: matrix is not symmetric");

  auto off = [&]() {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  int sweep = 0;
  while (off() > 1e-15 * scale) {
    if (++sweep > max_sweeps) throw InvariantFault("Jacobi eigensolver did not converge");
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Eigen::VectorXd ev = a.diagonal();
  std::sort(ev.data(), ev.data() + n);
  return ev;
}

std::vector<Eigen::VectorXd> lambda_grid(const std::vector<Interval>& box, std::size_t points) {
  if (points == 0) throw std::invalid_argument("lambda grid needs at least one point per dimension");
  const std::size_t s = box.size();
  std::size_t total = 1;
  for (std::size_t j = 0; j < s; ++j) total *= points;
  std::vector<Eigen::VectorXd> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(s));
    std::size_t rest = idx;
    for (std::size_t j = 0; j < s; ++j) {
      const std::size_t k = rest % points;
      rest /= points;
      v[static_cast<Eigen::Index>(j)] =
          points == 1 ? box[j].mid()
                      : box[j].lo + box[j].width() * static_cast<double>(k) / static_cast<double>(points - 1);
    }
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

std::size_t integer_ratio(double num, double den, const char* what) {
  const double r = num / den;
  const double k = std::round(r);
  if (k < 1.0 || std::abs(r - k) > 1e-6 * std::max(1.0, k)) {
    std::ostringstream msg;
    msg << what << ": " << num << " is not a positive integer multiple of " << den;
    throw std::invalid_argument(msg.str());
  }
  return static_cast<std::size_t>(k);
}

}  // namespace

PEReport check_lambda_uPE(const SeriesFn& regressor, const std::vector<Eigen::VectorXd>& grid,
                          double L, double t_start, double t_end, double stride, double threshold) {
  if (grid.empty()) throw DomainFault("check_lambda_uPE: empty lambda grid");
  if (!(L > 0.0) || !(stride > 0.0)) throw std::invalid_argument("check_lambda_uPE: L and stride must be positive");
  PEReport rep;
  rep.L = L;
  rep.stride = stride;
  rep.t_start = t_start;
  rep.t_end = t_end;
  rep.threshold = threshold;
  rep.lambda_grid = grid;
  if (grid.size() == 1) rep.warnings.push_back("grid too coarse: a single lambda point");

  const std::size_t blocks_per_window = integer_ratio(L, stride, "window");
  const std::size_t blocks = static_cast<std::size_t>(std::floor((t_end - t_start) / stride + 1e-9));
  if (blocks < blocks_per_window) throw DomainFault("check_lambda_uPE: time range shorter than one window");
  rep.windows = blocks - blocks_per_window + 1;
  if (rep.windows < 2) rep.warnings.push_back("a single window start: uniformity in t is not tested");

  rep.mu = std::numeric_limits<double>::infinity();
  for (const auto& lam : grid) {
    const Series ser = regressor(lam);
    if (!(ser.h > 0.0)) throw std::invalid_argument("check_lambda_uPE: series spacing must be positive");
    rep.sample_spacing = ser.h;
    const std::size_t per_block = integer_ratio(stride, ser.h, "stride");
    const double first = (t_start - ser.t0) / ser.h;
    if (first < -1e-6) throw DomainFault("check_lambda_uPE: series starts after t_start");
    const auto k0 = static_cast<std::size_t>(std::llround(std::max(0.0, first)));
    if (k0 + blocks * per_block >= ser.size() + 1) throw DomainFault("check_lambda_uPE: series ends before t_end");

    const Eigen::Index d = ser.values.rows();
    std::vector<Eigen::MatrixXd> block(blocks, Eigen::MatrixXd::Zero(d, d));
    for (std::size_t b = 0; b < blocks; ++b) {
      const std::size_t lo = k0 + b * per_block;
      for (std::size_t k = lo; k <= lo + per_block; ++k) {
        const double w = (k == lo || k == lo + per_block) ? 0.5 * ser.h : ser.h;
        const auto col = ser.values.col(static_cast<Eigen::Index>(k));
        block[b].noalias() += w * col * col.transpose();
      }
    }
    double mu = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < rep.windows; ++w) {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t b = w; b < w + blocks_per_window; ++b) gram += block[b];
      double ev = d > 0 ? symmetric_eigenvalues(gram)[0] : 0.0;
      const double tol = 1e-10 * std::max(1.0, gram.trace());
      if (ev < -tol) throw InvariantFault("window Gram matrix is not positive semidefinite");
      ev = std::max(ev, 0.0);
      mu = std::min(mu, ev);
    }
    rep.mu_of_lambda.push_back(mu);
    rep.mu = std::min(rep.mu, mu);
  }
  rep.verdict = rep.mu >= threshold;
  return rep;
}

namespace {

double sup_distance(const Series& a, const Series& b) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw std::invalid_argument("series must share their sample grid");
  if (a.values.cols() == 0) return 0.0;
  return (a.values - b.values).colwise().norm().maxCoeff();
}

}  // namespace

std::vector<std::size_t> equivalence_class(std::size_t index, const std::vector<Series>& series,
                                           double tolerance) {
  if (series.empty()) throw DomainFault("equivalence_class: empty grid");
  if (index >= series.size()) throw std::invalid_argument("equivalence_class: index out of range");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < series.size(); ++k)
    if (k == index || sup_distance(series[index], series[k]) <= tolerance) out.push_back(k);
  return out;
}

std::vector<std::vector<std::size_t>> equivalence_partition(const std::vector<Series>& series,
                                                            double tolerance) {
  const std::size_t m = series.size();
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      if (sup_distance(series[a], series[b]) <= tolerance) parent[find(a)] = find(b);
  std::vector<std::vector<std::size_t>> groups;
  std::vector<long> slot(m, -1);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t r = find(k);
    if (slot[r] < 0) {
      slot[r] = static_cast<long>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(slot[r])].push_back(k);
  }
  return groups;
}

NPEReport check_nonlinear_PE(const SeriesFn& upsilon, const SeriesFn& classes_from,
                             const std::vector<Eigen::VectorXd>& grid, double L,
                             std::size_t t_every, double class_tolerance) {
  if (grid.empty()) throw DomainFault("check_nonlinear_PE: empty lambda grid");
  if (t_every == 0) t_every = 1;
  NPEReport rep;
  rep.L = L;
  rep.lambda_grid = grid;
  rep.class_tolerance = class_tolerance;
  if (grid.size() == 1) rep.warnings.push_back("grid too coarse: a single lambda point");

  std::vector<Series> v;
  std::vector<Series> c;
  for (const auto& lam : grid) {
    v.push_back(upsilon(lam));
    c.push_back(classes_from(lam));
  }
  rep.classes = equivalence_partition(c, class_tolerance);

  const double h = v.front().h;
  const auto back = static_cast<std::size_t>(std::llround(L / h));
  const std::size_t N = v.front().size();
  if (back >= N) throw DomainFault("check_nonlinear_PE: series shorter than L");

  for (std::size_t a = 0; a < grid.size(); ++a) {
    const auto members = equivalence_class(a, c, class_tolerance);
    for (std::size_t b = 0; b < grid.size(); ++b) {
      double dist = std::numeric_limits<double>::infinity();
      for (auto m : members) dist = std::min(dist, (grid[m] - grid[b]).norm());
      if (dist == 0.0) continue;
      for (std::size_t k = back; k < N; k += t_every) {
        const auto va = v[a].values.col(static_cast<Eigen::Index>(k));
        double best = 0.0;
        for (std::size_t kp = k - back; kp <= k; ++kp)
          best = std::max(best, (va - v[b].values.col(static_cast<Eigen::Index>(kp))).norm());
        rep.beta = std::min(rep.beta, best / dist);
        rep.unconstrained = false;
      }
    }
  }
  for (std::size_t k = back; k < N; k += t_every) ++rep.t_samples;
  return rep;
}

OutputRecord simulate_output(const PlantSpec& spec, const IntegrationGrid& grid) {
  spec.validate();
  grid.validate();
  OutputRecord rec;
  rec.t0 = grid.t0;
  rec.dt = grid.dt;
  const std::size_t steps = grid.steps();
  rec.y.reserve(steps + 1);
  StateVector x = spec.x_init;
  rec.y.push_back(x[0]);
  const VectorField f = plant_field(spec);
  Rk4Stepper stepper(x.size());
  for (std::size_t k = 0; k < steps; ++k) {
    stepper.step(f, grid.time(k), x, grid.dt);
    rec.y.push_back(x[0]);
  }
  return rec;
}

namespace {

enum class AlongKind { Regressor, Upsilon, Coupling };

Series along(const PlantSpec& spec, const OutputRecord& rec, const Eigen::VectorXd& lambda, double window,
             std::size_t decimation, AlongKind kind) {
  const bool scalar = kind != AlongKind::Regressor;
  if (decimation == 0) decimation = 1;
  const std::size_t n = spec.n();
  const std::size_t d = spec.regressor_dim();
  const std::size_t d0 = spec.channels[0].phi_dim;
  std::vector<FilteredIntegralBank> banks;
  for (std::size_t i = 1; i <= n; ++i) {
    const double tau = lambda[static_cast<Eigen::Index>(spec.channels[i].tau_index)];
    banks.emplace_back(spec, i, std::vector<double>{tau}, lambda, rec.dt, window);
  }
  const auto full = static_cast<std::size_t>(std::llround(window / rec.dt));
  if (rec.y.size() <= full) throw DomainFault("record shorter than the regressor window");
  const std::size_t count = (rec.y.size() - 1 - full) / decimation + 1;

  Series out;
  out.h = rec.dt * static_cast<double>(decimation);
  out.t0 = rec.t0 + static_cast<double>(full) * rec.dt;
  out.values.resize(scalar ? 1 : static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(count));
  Eigen::VectorXd phibar(static_cast<Eigen::Index>(d));
  std::vector<double> mu(32);
  std::size_t col = 0;
  for (std::size_t k = 0; k < rec.y.size() && col < count; ++k) {
    const double t = rec.t0 + static_cast<double>(k) * rec.dt;
    const double y = rec.y[k];
    for (auto& b : banks) b.push(t, y);
    if (k < full || (k - full) % decimation != 0) continue;
    if (d0 > 0) eval_phi(spec, 0, y, lambda, t, std::span<double>(phibar.data(), d0));
    std::size_t off = d0;
    for (std::size_t i = 1; i <= n; ++i) {
      const std::size_t di = spec.channels[i].phi_dim;
      banks[i - 1].value(0, std::span<double>(mu.data(), di));
      const double c = eval_coupling(spec, i, y, lambda, t);
      for (std::size_t r = 0; r < di; ++r) phibar[static_cast<Eigen::Index>(off + r)] = c * mu[r];
      off += di;
    }
    if (kind == AlongKind::Upsilon) {
      out.values(0, static_cast<Eigen::Index>(col)) = spec.theta_true.dot(phibar) + eval_coupling(spec, 0, y, lambda, t);
    } else if (kind == AlongKind::Coupling) {
      out.values(0, static_cast<Eigen::Index>(col)) = eval_coupling(spec, 0, y, lambda, t);
    } else {
      out.values.col(static_cast<Eigen::Index>(col)) = phibar;
    }
    ++col;
  }
  return out;
}

}  // namespace

Series regressor_along(const PlantSpec& spec, const OutputRecord& rec, const Eigen::VectorXd& lambda,
                       double window, std::size_t decimation) {
  return along(spec, rec, lambda, window, decimation, AlongKind::Regressor);
}

Series upsilon_along(const PlantSpec& spec, const OutputRecord& rec, const Eigen::VectorXd& lambda,
                     double window, std::size_t decimation) {
  return along(spec, rec, lambda, window, decimation, AlongKind::Upsilon);
}

Series coupling_along(const PlantSpec& spec, const OutputRecord& rec, const Eigen::VectorXd& lambda,
                      double window, std::size_t decimation) {
  return along(spec, rec, lambda, window, decimation, AlongKind::Coupling);
}

}  // namespace adaptobs
