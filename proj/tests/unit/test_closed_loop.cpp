#include "adaptobs/closed_loop.hpp"
#include "adaptobs/errors.hpp"
#include "adaptobs/models.hpp"

#include <doctest.h>

#include <cmath>

using namespace adaptobs;

namespace {

ObserverConfig duffing_gains() {
  ObserverConfig c;
  c.alpha = 1.0;
  c.gamma_theta = 2.0;
  c.gamma = 0.2;
  c.epsilon = 0.01;
  c.omega = {1.0};
  c.lambda_box = {{0.1, 1.1}};
  return c;
}

LoopOptions short_options() {
  LoopOptions o;
  o.window_T = 100.0;
  o.decimation = 10;
  return o;
}

// lambda along the unit-speed torus flow, integrated separately with small RK4 steps.
class TorusOracle {
 public:
  TorusOracle(double x1, double x2, double omega) : z_(2), omega_(omega) { z_ << x1, x2; }

  double x1_at(double w) {
    const VectorField f = [this](double, const StateVector& z, StateVector& dz) {
      const double r2 = z[0] * z[0] + z[1] * z[1];
      dz[0] = omega_ * (z[0] - z[1] - z[0] * r2);
      dz[1] = omega_ * (z[0] + z[1] - z[1] * r2);
    };
    while (w_ < w) {
      const double h = std::min(1e-3, w - w_);
      z_ = rk4_step(f, w_, z_, h);
      w_ += h;
    }
    return z_[0];
  }

 private:
  StateVector z_;
  double omega_;
  double w_ = 0.0;
};

}  // namespace

TEST_SUITE("closed_loop") {

TEST_CASE("Duffing loop keeps the torus invariants and the exploration clock") {
  const auto spec = models::duffing({});
  const auto cfg = duffing_gains();
  const auto res = run_closed_loop(spec, cfg, {0.0, 300.0, 1e-3}, short_options());
  REQUIRE(res.samples.size() == 30001);
  CHECK(res.max_torus_defect <= 1e-6);
  CHECK(res.max_torus_drift < 1e-8);

  TorusOracle oracle(0.0, 1.0, 1.0);
  double prev_warp = 0.0;
  double worst = 0.0;
  for (const auto& s : res.samples) {
    REQUIRE(cfg.lambda_box[0].contains(s.lambda_hat[0]));
    REQUIRE(s.warp >= prev_warp);
    prev_warp = s.warp;
    const double lam = lambda_from_torus(oracle.x1_at(s.warp), cfg.lambda_box[0]);
    worst = std::max(worst, std::abs(lam - s.lambda_hat[0]));
  }
  CHECK(prev_warp > 1.0);  // the explorer actually moved
  CHECK(worst <= 1e-4);
}

TEST_CASE("zero exploration gain freezes lambda and theta converges at that lambda") {
  const auto spec = models::duffing({});
  auto cfg = duffing_gains();
  cfg.gamma = 0.0;
  cfg.torus_angle = {torus_angle_for(0.2, cfg.lambda_box[0])};
  const auto res = run_closed_loop(spec, cfg, {0.0, 400.0, 1e-3}, short_options());
  const double lam0 = res.samples.front().lambda_hat[0];
  CHECK(lam0 == doctest::Approx(0.2).epsilon(1e-12));
  for (const auto& s : res.samples) REQUIRE(s.lambda_hat[0] == lam0);

  auto err_at = [&](double t) {
    const auto& s = res.samples[static_cast<std::size_t>(std::llround(t / (1e-3 * 10)))];
    return (s.theta_hat - spec.theta_true).norm();
  };
  CHECK(err_at(400.0) < 0.25 * err_at(100.0));
  CHECK(err_at(400.0) < 0.05 * spec.theta_true.norm());
}

TEST_CASE("runs are bitwise deterministic") {
  const auto spec = models::duffing({});
  const auto cfg = duffing_gains();
  const auto a = run_closed_loop(spec, cfg, {0.0, 50.0, 1e-3}, short_options());
  const auto b = run_closed_loop(spec, cfg, {0.0, 50.0, 1e-3}, short_options());
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    REQUIRE(a.samples[k].theta_hat == b.samples[k].theta_hat);
    REQUIRE(a.samples[k].lambda_hat == b.samples[k].lambda_hat);
    REQUIRE(a.samples[k].x0_hat == b.samples[k].x0_hat);
  }
}

TEST_CASE("direct and interpolated filtered regressors give the same loop") {
  const auto spec = models::duffing({});
  const auto cfg = duffing_gains();
  auto o = short_options();
  o.window_T = 10.0;
  o.decimation = 1;
  o.mode = RegressorMode::Direct;
  const auto direct = run_closed_loop(spec, cfg, {0.0, 40.0, 1e-2}, o);
  o.mode = RegressorMode::Interpolated;
  const auto interp = run_closed_loop(spec, cfg, {0.0, 40.0, 1e-2}, o);
  CHECK((direct.theta_final - interp.theta_final).norm() <= 1e-6);
  CHECK(std::abs(direct.lambda_final[0] - interp.lambda_final[0]) <= 1e-6);
}

TEST_CASE("gain above the supplied cap is flagged, and rejected when enforced") {
  const auto spec = models::duffing({});
  const auto cfg = duffing_gains();
  auto o = short_options();
  o.gamma_star = 0.1;
  const auto res = run_closed_loop(spec, cfg, {0.0, 1.0, 1e-3}, o);
  CHECK(res.gamma_advisory);
  o.gamma_star = 0.5;
  CHECK_FALSE(run_closed_loop(spec, cfg, {0.0, 1.0, 1e-3}, o).gamma_advisory);
  o.gamma_star = 0.1;
  o.enforce_gamma = true;
  CHECK_THROWS_AS(run_closed_loop(spec, cfg, {0.0, 1.0, 1e-3}, o), ConfigError);
}

TEST_CASE("leaving the divergence threshold raises DivergenceFault") {
  const auto spec = models::duffing({});
  const auto cfg = duffing_gains();
  auto o = short_options();
  o.divergence_limit = 1.2;  // Duffing from x0 = 1 swings past this within a few periods
  try {
    run_closed_loop(spec, cfg, {0.0, 100.0, 1e-3}, o);
    FAIL("expected DivergenceFault");
  } catch (const DivergenceFault& e) {
    CHECK(e.time() > 0.0);
    CHECK(e.time() < 100.0);
  }
}

TEST_CASE("last entry into a band") {
  const std::vector<double> t = {0, 1, 2, 3, 4};
  CHECK(last_entry_time(t, {0.0, 1.0, 0.5, 0.99, 1.01}, 1.0, 5.0) == 3.0);
  CHECK(last_entry_time(t, {1.0, 1.0, 1.0, 1.0, 1.0}, 1.0, 5.0) == 0.0);
  CHECK_FALSE(last_entry_time(t, {1.0, 1.0, 1.0, 1.0, 2.0}, 1.0, 5.0).has_value());
  // Zero truth uses an absolute band.
  CHECK(last_entry_time(t, {1.0, 0.2, 0.01, 0.0, -0.04}, 0.0, 5.0) == 2.0);
}

}  // TEST_SUITE
