#include "adaptobs/errors.hpp"
#include "adaptobs/experiments.hpp"
#include "adaptobs/plant.hpp"

#include <doctest.h>

#include <cmath>

using namespace adaptobs;

TEST_SUITE("experiments") {

TEST_CASE("Duffing truth and box") {
  const auto cfg = duffing_experiment();
  const auto spec = build_plant(cfg);
  CHECK(spec.lambda_true[0] == 0.2);
  CHECK(spec.theta_true.isApprox(Eigen::Vector3d(1.0, -1.0, 0.3)));
  REQUIRE(spec.lambda_box.size() == 1);
  CHECK(spec.lambda_box[0].lo == 0.1);
  CHECK(spec.lambda_box[0].hi == 1.1);
  CHECK(build_observer(cfg, spec).lambda_box[0].hi == 1.1);
  CHECK(cfg.observer.omega.size() == 1);
}

TEST_CASE("bio-reactor truth and input") {
  const auto cfg = bioreactor_experiment();
  const auto spec = build_plant(cfg);
  CHECK(spec.lambda_true.isApprox(Eigen::Vector2d(70.0, 0.3)));
  CHECK(spec.theta_true.isApprox(Eigen::Vector3d(-0.3, 0.3, 0.3)));
  CHECK(models::bioreactor_input(cfg.bioreactor, 0.0) == doctest::Approx(60.0));
  CHECK(cfg.observer.omega.size() == 2);
  CHECK(cfg.observer.omega[0] != cfg.observer.omega[1]);
}

TEST_CASE("Lotka-Volterra truth, box and reconstruction channel") {
  const auto cfg = lotka_volterra_experiment();
  const auto spec = build_plant(cfg);
  const auto& p = cfg.lotka_volterra;
  CHECK(spec.lambda_box[0].lo == 0.2);
  CHECK(spec.lambda_box[0].hi == 0.6);
  CHECK(spec.theta_true[2] == doctest::Approx(spec.theta_true[1] * (spec.theta_true[0] + spec.lambda_true[0])));

  const auto ch = reconstruction_channels(cfg);
  REQUIRE(ch.size() == 1);
  CHECK(ch[0].name == "y");
  StateVector x(2);
  x << 1.5, 0.9;
  CHECK(ch[0].truth(0.0, x) == doctest::Approx(0.9 - p.delta * 1.5));
  ObserverState obs;
  obs.x_hat = Eigen::VectorXd::Constant(1, 0.7);
  obs.theta_hat = Eigen::Vector3d(0.1, 0.25, 0.0);
  CHECK(ch[0].estimate(0.0, x, obs, spec.lambda_true) == doctest::Approx(0.7 - 0.25 * 1.5));

  // With exact estimates the channel reproduces the predator population.
  const auto [x0, x1] = lotka_volterra_transform(p.x_init, p.y_init, p.delta);
  StateVector z(2);
  z << x0, x1;
  CHECK(ch[0].truth(0.0, z) == doctest::Approx(p.y_init).epsilon(1e-12));
}

TEST_CASE("model names") {
  for (const auto& n : builtin_names()) CHECK(to_string(parse_model_kind(n)) == n);
  CHECK_THROWS_AS(parse_model_kind("van_der_pol"), std::invalid_argument);
  CHECK_FALSE(builtin_experiment("nope").has_value());
}

TEST_CASE("builtins validate, bad gains do not") {
  for (const auto& n : builtin_names()) CHECK_NOTHROW(builtin_experiment(n)->validate());
  auto cfg = duffing_experiment();
  cfg.observer.omega = {1.0, 2.0};
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "observer.omega");
  }
}

TEST_CASE("short runs are deterministic and stay in the box") {
  for (const auto& n : builtin_names()) {
    CAPTURE(n);
    auto cfg = *builtin_experiment(n);
    cfg.grid.t_end = cfg.window_T + 100.0;
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    REQUIRE(a.samples.size() == b.samples.size());
    CHECK(a.theta_final == b.theta_final);
    CHECK(a.lambda_final == b.lambda_final);
    const auto spec = build_plant(cfg);
    for (const auto& s : a.samples) {
      for (std::size_t j = 0; j < spec.lambda_dim(); ++j) {
        CHECK(s.lambda_hat[static_cast<Eigen::Index>(j)] >= spec.lambda_box[j].lo - 1e-12);
        CHECK(s.lambda_hat[static_cast<Eigen::Index>(j)] <= spec.lambda_box[j].hi + 1e-12);
      }
      CHECK(std::isfinite(s.x0_hat));
    }
    CHECK(a.channel_names.size() == 1);
  }
}

}  // TEST_SUITE
