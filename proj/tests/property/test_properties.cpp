#include "adaptobs/bounds.hpp"
#include "adaptobs/errors.hpp"
#include "adaptobs/excitation.hpp"
#include "adaptobs/observer.hpp"
#include "adaptobs/ode.hpp"
#include "adaptobs/regressor.hpp"

#include "../support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace adaptobs;

namespace {

ObserverConfig explorer_config(double gamma, double epsilon) {
  ObserverConfig cfg;
  cfg.alpha = 1.0;
  cfg.gamma_theta = 2.0;
  cfg.gamma = gamma;
  cfg.epsilon = epsilon;
  cfg.omega = default_omega(2);
  cfg.lambda_box = {{0.1, 1.1}, {0.0, 200.0}};
  return cfg;
}

ObserverState start_state(std::size_t d, double a0, double a1) {
  ObserverState s;
  s.theta_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  s.torus_x1 = Eigen::Vector2d(-std::sin(a0), -std::sin(a1));
  s.torus_x2 = Eigen::Vector2d(std::cos(a0), std::cos(a1));
  s.x_hat = Eigen::VectorXd(0);
  return s;
}

// Observer alone, driven by a prescribed output and regressor.
VectorField observer_field(const ObserverConfig& cfg, std::size_t d, std::function<double(double)> y,
                           std::function<Eigen::VectorXd(double)> phibar) {
  return [=](double t, const StateVector& z, StateVector& dz) {
    const auto obs = ObserverState::unpack(z, d, cfg.s(), 0);
    dz = observer_rhs(obs, cfg, y(t), phibar(t), 0.0, 0.0, t).pack();
  };
}

SeriesFn random_family(std::mt19937_64& rng, std::size_t dim, double h, std::size_t n) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> amp(dim * 3), freq(dim * 3), phase(dim * 3);
  for (std::size_t k = 0; k < amp.size(); ++k) {
    amp[k] = U(rng);
    freq[k] = 0.2 + std::abs(U(rng));
    phase[k] = 3.0 * U(rng);
  }
  return [=](const Eigen::VectorXd& lam) {
    Series s;
    s.h = h;
    s.values.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const double t = s.time(k);
      for (std::size_t r = 0; r < dim; ++r) {
        double v = 0.0;
        for (std::size_t m = 0; m < 3; ++m) {
          const std::size_t q = 3 * r + m;
          v += amp[q] * std::sin(freq[q] * (1.0 + lam[0]) * t + phase[q]);
        }
        s.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
      }
    }
    return s;
  };
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("torus stays on the unit circle across 1e5 steps") {
  const auto cfg = explorer_config(1.0, 0.0);
  const std::size_t d = 3;
  const auto y = [](double t) { return std::sin(t) + 0.5 * std::cos(2.3 * t); };
  const auto phibar = [](double t) { return Eigen::Vector3d(std::cos(t), 0.3, std::sin(0.7 * t)); };
  const auto f = observer_field(cfg, d, y, phibar);
  ObserverState obs = start_state(d, 0.3, 2.0);
  StateVector z = obs.pack();
  Rk4Stepper rk(z.size());
  const double dt = 1e-3;
  double worst_drift = 0.0;
  double worst_defect = 0.0;
  double prev_warp = 0.0;
  for (std::size_t k = 0; k < 100000; ++k) {
    rk.step(f, static_cast<double>(k) * dt, z, dt);
    obs = ObserverState::unpack(z, d, cfg.s(), 0);
    worst_drift = std::max(worst_drift, renormalize_torus(obs));
    for (Eigen::Index j = 0; j < 2; ++j)
      worst_defect = std::max(worst_defect, std::abs(obs.torus_x1[j] * obs.torus_x1[j] +
                                                     obs.torus_x2[j] * obs.torus_x2[j] - 1.0));
    REQUIRE(obs.warp >= prev_warp);
    prev_warp = obs.warp;
    z = obs.pack();
  }
  CHECK(worst_defect <= 1e-6);
  CHECK(worst_drift < 1e-8);
  CHECK(prev_warp > 1.0);
}

TEST_CASE("inside the dead zone the explorer does not move") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double eps = 0.05;
  const auto cfg = explorer_config(0.7, eps);
  for (int rep = 0; rep < 2000; ++rep) {
    ObserverState obs = start_state(3, 3.0 * U(rng), 3.0 * U(rng));
    obs.x0_hat = 5.0 * U(rng);
    obs.theta_hat = Eigen::Vector3d(U(rng), U(rng), U(rng));
    const double y = obs.x0_hat + eps * U(rng);
    const auto dz = observer_rhs(obs, cfg, y, Eigen::Vector3d(U(rng), U(rng), U(rng)), U(rng), U(rng), 10.0 * U(rng));
    REQUIRE(dz.torus_x1.isZero(0.0));
    REQUIRE(dz.torus_x2.isZero(0.0));
    REQUIRE(dz.warp == 0.0);
  }

  // Integrated: an error that never leaves the dead zone keeps lambda_hat bitwise constant.
  const auto wide = explorer_config(0.7, 1e3);
  const auto f = observer_field(wide, 3, [](double t) { return 2.0 * std::sin(t); },
                                [](double t) { return Eigen::Vector3d(std::cos(t), 1.0, 0.2); });
  ObserverState obs = start_state(3, 0.4, 1.1);
  const Eigen::VectorXd lam0 = lambda_from_torus(obs.torus_x1, wide.lambda_box);
  StateVector z = obs.pack();
  for (std::size_t k = 0; k < 10000; ++k) {
    z = rk4_step(f, static_cast<double>(k) * 1e-3, z, 1e-3);
    obs = ObserverState::unpack(z, 3, 2, 0);
    renormalize_torus(obs);
    z = obs.pack();
    REQUIRE(lambda_from_torus(obs.torus_x1, wide.lambda_box) == lam0);
  }
  CHECK(obs.warp == 0.0);
}

TEST_CASE("windowed quadrature agrees with the auxiliary filter at constant rate") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int rep = 0; rep < 12; ++rep) {
    const double tau = 0.1 + U(rng);
    const double T = 20.0 + 40.0 * U(rng);
    const double w = 0.3 + 2.0 * U(rng);
    const double a1 = U(rng), a2 = U(rng), f1 = 0.2 + U(rng), f2 = 1.0 + 2.0 * U(rng);
    const double dt = 1e-2;
    CAPTURE(tau);
    CAPTURE(T);
    auto y = [&](double t) { return a1 * std::sin(f1 * t) + a2 * std::cos(f2 * t) + 0.3; };
    auto phi_of = [w](double x0, double t, std::span<double> o) {
      o[0] = x0;
      o[1] = x0 * x0 * x0;
      o[2] = std::cos(w * t);
    };
    const auto spec = testing::filter_plant(3, phi_of, testing::constant_beta(), tau);
    auto phi = [&](double t) {
      Eigen::VectorXd v(3);
      phi_of(y(t), t, std::span<double>(v.data(), 3));
      return v;
    };

    HistoryBuffer buf(dt, T);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(3);
    double phi_sup = phi(0.0).cwiseAbs().maxCoeff();
    double worst = 0.0;
    buf.push(0.0, y(0.0));
    const auto steps = static_cast<std::size_t>(std::llround(3.0 * T / dt));
    for (std::size_t k = 1; k <= steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      eta = aux_filter_step(eta, tau, 0.5 * (phi(t - dt) + phi(t)), dt);
      buf.push(t, y(t));
      phi_sup = std::max(phi_sup, phi(t).cwiseAbs().maxCoeff());
      if (t > T && k % 500 == 0) {
        const auto mu = windowed_mu(buf, spec, 1, tau, {}, buf.back_time());
        worst = std::max(worst, (mu.value - eta).cwiseAbs().maxCoeff());
      }
    }
    CHECK(worst <= std::max(1e-3, approximation_error_bound(T, tau, phi_sup)));
  }
}

TEST_CASE("RK4 converges at fourth order on the linear problem") {
  const VectorField f = [](double, const StateVector& x, StateVector& dx) {
    dx[0] = -0.5 * x[0] + 2.0 * x[1];
    dx[1] = -2.0 * x[0] - 0.5 * x[1];
  };
  const StateVector x0 = Eigen::Vector2d(1.0, 0.0);
  auto err = [&](double dt) {
    const auto tr = integrate(f, {0.0, 2.0, dt}, x0);
    const double t = tr.times.back();
    const Eigen::Vector2d exact = std::exp(-0.5 * t) * Eigen::Vector2d(std::cos(2.0 * t), -std::sin(2.0 * t));
    return (tr.states.back() - exact).norm();
  };
  for (double dt : {0.1, 0.05, 0.025}) {
    const double order = std::log2(err(dt) / err(dt / 2.0));
    CAPTURE(dt);
    CHECK(order >= 3.5);
  }
}

TEST_CASE("bound examples, monotonicity and degenerate zeros") {
  // Worked examples.
  CHECK(delta_total(0.0, 0.0, 0.0) == 0.0);
  CHECK(delta_total(2.0, 0.01, 0.005) == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(pe_gamma_cap(4.0, 1.0, 1.0, 1.0, 1.0) == 1.0);
  CHECK(pe_gamma_cap(4.0, 1.0, 1.0, 1.0, 2.0) == 0.5);
  CHECK(theta_error_bound(3.0, 2.0, 1.0, 1.5, 0.0, 0.0) == 0.0);
  CHECK(theta_error_bound(2.0, 1.0, 0.0, 1.0, 0.1, 0.05) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(ltv_residual_bound(0.0, 3.0, 1.0, 0.0) == 0.0);
  CHECK(ltv_residual_bound(1.0 / 12.0, 2.0, 1.0, 0.3) == doctest::Approx(2.3).epsilon(1e-14));
  const auto expo = [](double s) { return std::exp(-s); };
  CHECK(cascade_bounds(expo, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 0.5).epsilon_min == 0.0);
  CHECK(cascade_bounds(expo, 1.0, 1.0, 0.1, 0.1, 1.0, 1.0, 1.0, 2.0, 0.5).beta_inverse ==
        doctest::Approx(std::log(8.0)).epsilon(1e-9));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.1, 10.0);
  const auto dg = default_d_grid(20);
  const auto pg = default_psi_grid(20);
  for (int rep = 0; rep < 200; ++rep) {
    BoundInputs in;
    in.mu = U(rng);
    in.B = U(rng);
    in.D = U(rng);
    in.D_c = U(rng);
    in.L = U(rng);
    in.M = U(rng);
    in.rho = U(rng);
    in.D_rho = 1.0 + U(rng);
    in.D_lambda = U(rng);
    in.theta_norm = U(rng);

    const auto g = gamma_star(in, dg, pg);
    REQUIRE(g.value > 0.0);
    REQUIRE(g.value <= g.pe_cap);
    REQUIRE(g.value <= g.g);
    BoundInputs more = in;
    more.D_lambda *= 1.0 + U(rng);
    REQUIRE(gamma_star(more, dg, pg).value <= g.value);
    more = in;
    more.M *= 1.0 + U(rng);
    REQUIRE(gamma_star(more, dg, pg).value <= g.value);
    more = in;
    more.D_lambda *= 2.0;
    REQUIRE(gamma_g_term(more, 0.5, 2.0) <= gamma_g_term(in, 0.5, 2.0));

    const double k = U(rng), lerr = U(rng) / 10.0, delta = U(rng) / 10.0;
    const double base = theta_error_bound(k, in.D, in.D_c, in.theta_norm, lerr, delta);
    REQUIRE(base >= 0.0);
    REQUIRE(theta_error_bound(k, in.D, in.D_c, in.theta_norm, lerr, delta * 1.5) >= base);
    REQUIRE(theta_error_bound(k, in.D, in.D_c, in.theta_norm, lerr * 1.5, delta) >= base);
    REQUIRE(ltv_residual_bound(lerr * 2.0, in.B, in.beta_cb, delta) >= ltv_residual_bound(lerr, in.B, in.beta_cb, delta));
    REQUIRE(delta_total(in.theta_norm, lerr, delta) >= 0.0);
  }

  // epsilon_min tends to (beta(0) + 1)(d1 + d2) as d -> 0 and kappa grows.
  const double d1 = 0.02, d2 = 0.03;
  const double limit = (expo(0.0) + 1.0) * (d1 + d2);
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double scale : {1.0, 10.0, 100.0, 1000.0}) {
    const auto cb = cascade_bounds(expo, 1.0, 1.0, d1, d2, 1.0, 1.0, 1.0, 2.0 * scale, 0.5 / scale);
    const double gap = std::abs(cb.epsilon_min - limit);
    CHECK(gap <= prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap <= 1e-6 * limit);
}

TEST_CASE("LTV residual bound on a scalar exponentially stable testbed") {
  // y' = -a(t) y + u(t) + d(t), c = b = 1; u varies slowly and decays, d is a small disturbance.
  const double A = 1.0, delta = 0.01;
  auto a = [](double t) { return 1.0 + 0.5 * std::sin(t); };
  auto u = [A](double t) { return A * std::cos(0.05 * t) / (1.0 + 0.01 * t); };
  auto d = [delta](double t) { return delta * std::sin(3.0 * t); };
  // |u'| <= A (0.05 + 0.01) at t = 0, and decays afterwards.
  const double dU = A * (0.05 + 0.01);
  const VectorField f = [&](double t, const StateVector& x, StateVector& dx) { dx[0] = -a(t) * x[0] + u(t) + d(t); };
  const double dt = 1e-2;
  const auto tr = integrate(f, {0.0, 20000.0, dt}, StateVector::Zero(1));

  for (double eps : {0.1, 0.05, 0.02, 0.01}) {
    CAPTURE(eps);
    std::size_t last_out = 0;
    for (std::size_t k = 0; k < tr.states.size(); ++k)
      if (std::abs(tr.states[k][0]) >= eps) last_out = k;
    REQUIRE(last_out + 1 < tr.states.size());
    double worst = 0.0;
    for (std::size_t k = last_out + 1; k < tr.states.size(); ++k) worst = std::max(worst, std::abs(u(tr.times[k])));
    CHECK(worst <= ltv_residual_bound(eps, dU, 1.0, delta));
  }
}

TEST_CASE("equivalence-class membership is symmetric") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 5; ++rep) {
    const auto fam = random_family(rng, 2, 0.1, 400);
    std::vector<Series> s;
    for (const auto& l : lambda_grid({{0.0, 0.02}}, 9)) s.push_back(fam(l));
    for (double tol : {1e-3, 0.1, 0.5, 2.0}) {
      for (std::size_t a = 0; a < s.size(); ++a) {
        const auto ca = equivalence_class(a, s, tol);
        for (std::size_t b = 0; b < s.size(); ++b) {
          const auto cb = equivalence_class(b, s, tol);
          const bool b_in_a = std::find(ca.begin(), ca.end(), b) != ca.end();
          const bool a_in_b = std::find(cb.begin(), cb.end(), a) != cb.end();
          REQUIRE(b_in_a == a_in_b);
        }
      }
    }
  }
}

TEST_CASE("mu does not decrease when aligned windows are lengthened") {
  std::mt19937_64 rng(8);
  const double stride = 10.0, t_start = 0.0, t_end2 = 400.0;
  for (int rep = 0; rep < 5; ++rep) {
    const auto fam = random_family(rng, 3, 0.05, 8001);
    const auto grid = lambda_grid({{0.0, 1.0}}, 4);
    const double L2 = 100.0;
    const auto r2 = check_lambda_uPE(fam, grid, L2, t_start, t_end2, stride);
    for (double L1 : {20.0, 50.0, 80.0}) {
      CAPTURE(L1);
      const auto r1 = check_lambda_uPE(fam, grid, L1, t_start, t_end2 - (L2 - L1), stride);
      REQUIRE(r1.windows == r2.windows);
      for (std::size_t g = 0; g < grid.size(); ++g) CHECK(r2.mu_of_lambda[g] >= r1.mu_of_lambda[g] * (1.0 - 1e-12));
      CHECK(r2.mu >= r1.mu * (1.0 - 1e-12));
    }
  }
}

}  // TEST_SUITE
