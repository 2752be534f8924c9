#include "adaptobs/errors.hpp"
#include "adaptobs/excitation.hpp"
#include "adaptobs/models.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace adaptobs;

namespace {

// Series of f(lambda, t) (d components) on t = k h, k = 0..n-1.
SeriesFn sampled(std::size_t d, double h, std::size_t n, std::function<void(const Eigen::VectorXd&, double, Eigen::Ref<Eigen::VectorXd>)> f) {
  return [=](const Eigen::VectorXd& lam) {
    Series s;
    s.t0 = 0.0;
    s.h = h;
    s.values.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) f(lam, s.time(k), s.values.col(static_cast<Eigen::Index>(k)));
    return s;
  };
}

std::vector<Eigen::VectorXd> line_grid(double lo, double hi, std::size_t n) { return lambda_grid({{lo, hi}}, n); }

}  // namespace

TEST_SUITE("excitation") {

TEST_CASE("Jacobi eigenvalues agree with Eigen's symmetric solver") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N;
  for (int n = 1; n <= 8; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::MatrixXd a(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = N(rng);
      a = (a + a.transpose()).eval();
      const Eigen::VectorXd ours = symmetric_eigenvalues(a);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a, Eigen::EigenvaluesOnly);
      CHECK((ours - ref.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, a.norm()));
    }
  }
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(symmetric_eigenvalues(asym), std::invalid_argument);
}

TEST_CASE("tensor lambda grid") {
  const auto g = lambda_grid({{0.0, 1.0}, {10.0, 20.0}}, 3);
  REQUIRE(g.size() == 9);
  CHECK(g.front() == Eigen::Vector2d(0.0, 10.0));
  CHECK(g.back() == Eigen::Vector2d(1.0, 20.0));
  const auto one = lambda_grid({{0.2, 0.6}}, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0][0] == doctest::Approx(0.4));
}

TEST_CASE("identically zero regressor is not PE") {
  const auto zero = sampled(3, 0.1, 2001, [](const Eigen::VectorXd&, double, Eigen::Ref<Eigen::VectorXd> o) { o.setZero(); });
  const auto rep = check_lambda_uPE(zero, line_grid(0.1, 1.1, 5), 50.0, 0.0, 200.0, 10.0);
  CHECK(rep.mu == 0.0);
  CHECK_FALSE(rep.verdict);
  CHECK(rep.windows == 16);
}

TEST_CASE("Gram matrix of (1, sin) over whole periods") {
  const double w = 2.0 * std::numbers::pi / 10.0;
  const auto f = sampled(2, 0.01, 20001, [w](const Eigen::VectorXd&, double t, Eigen::Ref<Eigen::VectorXd> o) {
    o[0] = 1.0;
    o[1] = std::sin(w * t);
  });
  const auto rep = check_lambda_uPE(f, line_grid(0.0, 1.0, 2), 50.0, 0.0, 200.0, 10.0);
  CHECK(rep.mu == doctest::Approx(25.0).epsilon(1e-9));
  CHECK(rep.verdict);
}

TEST_CASE("empty and single-point grids") {
  const auto one = sampled(1, 0.1, 1001, [](const Eigen::VectorXd&, double, Eigen::Ref<Eigen::VectorXd> o) { o[0] = 1.0; });
  CHECK_THROWS_AS(check_lambda_uPE(one, {}, 10.0, 0.0, 100.0, 10.0), DomainFault);
  const auto rep = check_lambda_uPE(one, line_grid(0.0, 1.0, 1), 10.0, 0.0, 100.0, 10.0);
  REQUIRE_FALSE(rep.warnings.empty());
  CHECK(rep.warnings[0].find("grid too coarse") != std::string::npos);
  CHECK_THROWS_AS(check_lambda_uPE(one, line_grid(0.0, 1.0, 2), 10.0, 0.0, 200.0, 10.0), DomainFault);
  CHECK_THROWS_AS(check_lambda_uPE(one, line_grid(0.0, 1.0, 2), 15.0, 0.0, 100.0, 10.0), std::invalid_argument);
}

TEST_CASE("scaling the regressor by k scales mu by k squared") {
  auto base = [](const Eigen::VectorXd& lam, double t, Eigen::Ref<Eigen::VectorXd> o) {
    o[0] = std::cos(lam[0] * t);
    o[1] = std::sin(0.7 * t) + 0.2;
  };
  const auto grid = line_grid(0.5, 1.5, 4);
  const auto r1 = check_lambda_uPE(sampled(2, 0.05, 4001, base), grid, 40.0, 0.0, 200.0, 10.0);
  for (double k : {0.1, 3.0, 1e3}) {
    const auto rk = check_lambda_uPE(
        sampled(2, 0.05, 4001, [&](const Eigen::VectorXd& lam, double t, Eigen::Ref<Eigen::VectorXd> o) {
          base(lam, t, o);
          o *= k;
        }),
        grid, 40.0, 0.0, 200.0, 10.0);
    for (std::size_t g = 0; g < grid.size(); ++g)
      CHECK(rk.mu_of_lambda[g] == doctest::Approx(k * k * r1.mu_of_lambda[g]).epsilon(1e-6));
  }
}

TEST_CASE("equivalence classes") {
  const auto grid = line_grid(0.5, 1.5, 5);
  const auto sin_series = sampled(1, 0.05, 2001, [](const Eigen::VectorXd& lam, double t, Eigen::Ref<Eigen::VectorXd> o) {
    o[0] = std::sin(lam[0] * t);
  });
  const auto const_series = sampled(2, 0.05, 2001, [](const Eigen::VectorXd&, double t, Eigen::Ref<Eigen::VectorXd> o) {
    o[0] = std::cos(t);
    o[1] = 1.0;
  });
  std::vector<Series> s, c;
  for (const auto& l : grid) {
    s.push_back(sin_series(l));
    c.push_back(const_series(l));
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(equivalence_class(k, s, 1e-3) == std::vector<std::size_t>{k});
    CHECK(equivalence_class(k, c, 1e-3).size() == grid.size());
  }
  CHECK(equivalence_partition(s, 1e-3).size() == grid.size());
  CHECK(equivalence_partition(c, 1e-3).size() == 1);
  CHECK_THROWS_AS(equivalence_class(0, {}, 1e-3), DomainFault);
}

TEST_CASE("nonlinear PE conventions") {
  const auto ups = sampled(1, 0.1, 1001, [](const Eigen::VectorXd& lam, double t, Eigen::Ref<Eigen::VectorXd> o) {
    o[0] = std::sin(lam[0] * t);
  });
  SUBCASE("single-point grid is unconstrained") {
    const auto rep = check_nonlinear_PE(ups, ups, line_grid(0.5, 1.5, 1), 10.0, 10, 1e-3);
    CHECK(rep.unconstrained);
    CHECK(std::isinf(rep.beta));
    CHECK_FALSE(rep.warnings.empty());
  }
  SUBCASE("points in the same class impose no constraint") {
    const auto flat = sampled(1, 0.1, 1001, [](const Eigen::VectorXd&, double t, Eigen::Ref<Eigen::VectorXd> o) {
      o[0] = std::cos(t);
    });
    const auto rep = check_nonlinear_PE(flat, flat, line_grid(0.5, 1.5, 6), 10.0, 10, 1e-3);
    CHECK(rep.classes.size() == 1);
    CHECK(rep.unconstrained);
    CHECK(std::isinf(rep.beta));
  }
  SUBCASE("distinct frequencies give a positive beta") {
    const auto rep = check_nonlinear_PE(ups, ups, line_grid(0.5, 1.5, 6), 10.0, 10, 1e-3);
    CHECK_FALSE(rep.unconstrained);
    CHECK(rep.beta > 0.0);
  }
}

TEST_CASE("Duffing upsilon over 21 grid points: positive beta, singleton classes") {
  const auto spec = models::duffing({});
  const double T = 100.0;
  const auto rec = simulate_output(spec, {0.0, 2100.0, 1e-3});
  const SeriesFn ups = [&](const Eigen::VectorXd& l) { return upsilon_along(spec, rec, l, T, 1000); };
  const SeriesFn reg = [&](const Eigen::VectorXd& l) { return regressor_along(spec, rec, l, T, 1000); };
  const auto rep = check_nonlinear_PE(ups, reg, lambda_grid(spec.lambda_box, 21), 50.0, 50, 1e-3);
  CHECK(rep.beta > 0.0);
  CHECK(std::isfinite(rep.beta));
  CHECK(rep.classes.size() == 21);
  for (const auto& cls : rep.classes) CHECK(cls.size() == 1);
}

TEST_CASE("regressor series along a record") {
  const auto spec = models::duffing({});
  const auto rec = simulate_output(spec, {0.0, 300.0, 1e-2});
  const auto s = regressor_along(spec, rec, spec.lambda_true, 100.0, 10);
  CHECK(s.t0 == doctest::Approx(100.0));
  CHECK(s.h == doctest::Approx(0.1));
  CHECK(s.values.rows() == 3);
  CHECK(s.size() == 2001);
  const auto u = upsilon_along(spec, rec, spec.lambda_true, 100.0, 10);
  for (std::size_t k = 0; k < s.size(); k += 100)
    CHECK(u.values(0, static_cast<Eigen::Index>(k)) ==
          doctest::Approx(spec.theta_true.dot(s.values.col(static_cast<Eigen::Index>(k)))).epsilon(1e-12));
  CHECK(coupling_along(spec, rec, spec.lambda_true, 100.0, 10).values.isZero(0.0));
}

}  // TEST_SUITE
