#include "adaptobs/config.hpp"
#include "adaptobs/errors.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace adaptobs;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Parses `text` and returns the ConfigError it raises.
ConfigError parse_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected ConfigError");
  return ConfigError("", 0, "");
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("serialized builtins parse back to the same configuration") {
  for (const auto& name : builtin_names()) {
    CAPTURE(name);
    const auto cfg = *builtin_experiment(name);
    const std::string text = serialize_config(cfg);
    const auto back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.grid.dt == cfg.grid.dt);
    CHECK(back.observer.gamma == cfg.observer.gamma);
    CHECK(back.observer.omega == cfg.observer.omega);
    CHECK(back.observer.torus_angle == cfg.observer.torus_angle);
  }
}

TEST_CASE("shipped config files equal the builtins") {
  for (const auto& name : builtin_names()) {
    CAPTURE(name);
    const std::string path = std::string(ADAPTOBS_SOURCE_DIR) + "/configs/" + name + ".cfg";
    CHECK(read_file(path) == serialize_config(*builtin_experiment(name)));
    CHECK(serialize_config(load_config(path)) == serialize_config(*builtin_experiment(name)));
  }
}

TEST_CASE("omitted keys keep the model defaults") {
  const auto cfg = parse_config("[experiment]\nname = short\nmodel = duffing\n[integration]\nt_end = 50\n");
  CHECK(cfg.name == "short");
  CHECK(cfg.grid.t_end == 50.0);
  CHECK(cfg.observer.gamma == duffing_experiment().observer.gamma);
}

TEST_CASE("comments and whitespace") {
  const auto cfg = parse_config(
      "# leading comment\n; another\n\n[experiment]\n  name = c   # inline\nmodel=lotka_volterra\n"
      "[observer]\ntorus_angle =\n");
  CHECK(cfg.name == "c");
  CHECK(cfg.model == ModelKind::LotkaVolterra);
  CHECK(cfg.observer.torus_angle.empty());
}

TEST_CASE("errors name the field and the line") {
  SUBCASE("malformed number") {
    const auto e = parse_error("[experiment]\nmodel = duffing\n[observer]\ngamma = fast\n");
    CHECK(e.field() == "observer.gamma");
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("observer.gamma") != std::string::npos);
  }
  SUBCASE("unknown key") {
    const auto e = parse_error("[experiment]\nmodel = duffing\n[observer]\ngama = 1\n");
    CHECK(e.field() == "observer.gama");
    CHECK(e.line() == 4);
  }
  SUBCASE("unknown section") {
    CHECK(parse_error("[nope]\n").line() == 1);
  }
  SUBCASE("duplicate key") {
    const auto e = parse_error("[experiment]\nmodel = duffing\nmodel = duffing\n");
    CHECK(e.field() == "experiment.model");
    CHECK(e.line() == 3);
  }
  SUBCASE("missing model") {
    CHECK(parse_error("[experiment]\nname = x\n").field() == "experiment.model");
  }
  SUBCASE("unknown model") {
    const auto e = parse_error("[experiment]\nmodel = pendulum\n");
    CHECK(e.field() == "experiment.model");
    CHECK(e.line() == 2);
  }
  SUBCASE("parameter of another model") {
    const auto e = parse_error("[experiment]\nmodel = duffing\n[plant]\nr_max = 2\n");
    CHECK(e.field() == "plant.r_max");
    CHECK(std::string(e.what()).find("not a parameter of model duffing") != std::string::npos);
  }
  SUBCASE("bad interval") {
    const auto e = parse_error("[experiment]\nmodel = duffing\n[plant]\ntau_box = 0.1\n");
    CHECK(e.field() == "plant.tau_box");
  }
  SUBCASE("bad bool") {
    CHECK(parse_error("[experiment]\nmodel = duffing\n[bounds]\nenforce_gamma = maybe\n").field() ==
          "bounds.enforce_gamma");
  }
  SUBCASE("validation failure points at the offending line") {
    const auto e = parse_error("[experiment]\nmodel = duffing\n[integration]\ndt = -1\n");
    CHECK(e.field() == "integration.dt");
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()) .find("integration.dt: integration.dt") == std::string::npos);
  }
  SUBCASE("cross-field validation") {
    const auto e = parse_error("[experiment]\nmodel = duffing\n[pe]\nstride = 30\n");
    CHECK(e.field() == "pe.stride");
  }
}

TEST_CASE("resolving names and paths") {
  CHECK(resolve_config("duffing").model == ModelKind::Duffing);
  const std::string base = std::string(ADAPTOBS_SOURCE_DIR) + "/configs/bioreactor";
  CHECK(resolve_config(base).model == ModelKind::Bioreactor);
  CHECK(resolve_config(base + ".cfg").model == ModelKind::Bioreactor);
  CHECK(resolve_config("examples/lotka_volterra").model == ModelKind::LotkaVolterra);
  CHECK_THROWS_AS(resolve_config("/no/such/example"), ConfigError);
}

}  // TEST_SUITE
