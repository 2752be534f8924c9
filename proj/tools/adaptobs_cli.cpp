// adaptobs: run adaptive-observer experiments, check excitation, evaluate gain bounds.
//
// Exit status: 0 success, 1 usage or I/O failure, 2 config error, 3 divergence,
// 4 regressor not persistently exciting, 5 a bound constant could not be estimated.

#include "adaptobs/config.hpp"
#include "adaptobs/errors.hpp"
#include "adaptobs/experiments.hpp"
#include "adaptobs/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace adaptobs;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kNotPE = 4, kNoConstant = 5 };

struct OutputOptions {
  std::string out;
  bool overwrite = false;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

fs::path output_dir(const OutputOptions& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("ADAPTOBS_OUT_DIR"); env && *env) return env;
  return "results";
}

// Fails early so that a long run is not wasted on an unusable destination.
void check_destination(const fs::path& dir, bool overwrite) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !overwrite)
    throw std::runtime_error("output directory " + dir.string() + " is not empty (pass --overwrite to replace it)");
}

// Files are written into a sibling staging directory that is renamed into place at the end.
class StagedDir {
 public:
  explicit StagedDir(fs::path target) : target_(std::move(target)) {
    const fs::path parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
    fs::create_directories(parent);
    staging_ = parent / (".tmp-" + target_.filename().string() + "-" + std::to_string(::getpid()));
    fs::remove_all(staging_);
    fs::create_directory(staging_);
  }
  ~StagedDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  fs::path file(const std::string& name) const { return staging_ / name; }

  void commit(bool overwrite) {
    check_destination(target_, overwrite);
    if (fs::exists(target_)) fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream f(p, std::ios::binary);
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

nlohmann::json manifest(const std::string& command, const std::string& config, const fs::path& out,
                        const ExperimentConfig& cfg) {
  std::uint64_t seed = 0;
  switch (cfg.model) {
    case ModelKind::Duffing: seed = cfg.duffing.noise.seed; break;
    case ModelKind::Bioreactor: seed = cfg.bioreactor.noise.seed; break;
    case ModelKind::LotkaVolterra: seed = cfg.lotka_volterra.noise.seed; break;
  }
  return {{"command", command}, {"config", config},  {"output_dir", out.string()},
          {"seed", seed},       {"version", kVersion}, {"timestamp", utc_timestamp()}};
}

void apply_seed(ExperimentConfig& cfg, std::optional<std::uint64_t> seed) {
  if (!seed) return;
  cfg.duffing.noise.seed = *seed;
  cfg.bioreactor.noise.seed = *seed;
  cfg.lotka_volterra.noise.seed = *seed;
}

int cmd_run(const std::string& config, const OutputOptions& oo, std::optional<double> t_end,
            std::optional<double> gamma_star, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg = resolve_config(config);
  apply_seed(cfg, seed);
  if (t_end) cfg.grid.t_end = *t_end;
  cfg.validate();
  const fs::path out = output_dir(oo);
  check_destination(out, oo.overwrite);

  const ExperimentResult res = run_experiment(cfg, gamma_star);
  StagedDir dir(out);
  {
    std::ofstream f(dir.file("trajectory.csv"), std::ios::binary);
    write_trajectory_csv(f, res);
    if (!f) throw std::runtime_error("cannot write trajectory.csv");
  }
  write_json(dir.file("summary.json"), summary_json(cfg, res));
  {
    std::ofstream f(dir.file("config.cfg"), std::ios::binary);
    f << serialize_config(cfg);
  }
  write_json(dir.file("manifest.json"), manifest("run", config, out, cfg));
  dir.commit(oo.overwrite);

  std::cout << "run " << cfg.name << ": " << res.samples.size() << " samples -> " << out.string() << "\n";
  for (const auto& c : res.convergence) {
    std::cout << "  " << c.name << " truth " << c.truth << " final " << c.terminal;
    if (c.time)
      std::cout << " within " << res.band_percent << "% from t = " << *c.time;
    else
      std::cout << " outside the " << res.band_percent << "% band at the end";
    std::cout << "\n";
  }
  if (res.gamma_advisory) std::cout << "  advisory: gamma exceeds gamma* = " << *res.gamma_star << "\n";
  return kOk;
}

int cmd_check_pe(const std::string& config, const OutputOptions& oo, std::optional<std::size_t> grid,
                 std::optional<double> L, std::optional<double> stride, std::optional<double> t_end) {
  ExperimentConfig cfg = resolve_config(config);
  if (grid) cfg.pe.grid_points = *grid;
  if (L) cfg.pe.L = *L;
  if (stride) cfg.pe.stride = *stride;
  if (t_end) cfg.pe.t_end = *t_end;
  cfg.validate();
  const fs::path out = output_dir(oo);
  check_destination(out, oo.overwrite);

  const PEAnalysis pe = run_pe_analysis(cfg);
  StagedDir dir(out);
  write_json(dir.file("pe_report.json"), pe_json(cfg, pe));
  write_json(dir.file("manifest.json"), manifest("check-pe", config, out, cfg));
  dir.commit(oo.overwrite);

  std::cout << "check-pe " << cfg.name << ": mu = " << pe.upe.mu << " over " << pe.upe.lambda_grid.size()
            << " grid points, " << pe.upe.windows << " windows of length " << pe.upe.L << " -> "
            << (pe.upe.verdict ? "PE" : "not PE") << "\n";
  for (const auto& w : pe.upe.warnings) std::cout << "  warning: " << w << "\n";
  std::cout << "  nonlinear PE beta = " << pe.npe.beta << ", " << pe.npe.classes.size() << " classes\n";
  return pe.upe.verdict ? kOk : kNotPE;
}

int cmd_bounds(const std::string& config, const OutputOptions& oo, bool no_pe, std::optional<double> mu,
               const std::string& pe_report) {
  ExperimentConfig cfg = resolve_config(config);
  const fs::path out = output_dir(oo);
  check_destination(out, oo.overwrite);
  if (!pe_report.empty()) {
    std::ifstream f(pe_report);
    if (!f) throw std::runtime_error("cannot open PE report " + pe_report);
    const auto j = nlohmann::json::parse(f);
    mu = j.at("upe").at("mu").get<double>();
  }

  const BoundsReport b = compute_bounds(cfg, mu, !no_pe);
  StagedDir dir(out);
  write_json(dir.file("bounds.json"), bounds_json(cfg, b));
  write_json(dir.file("manifest.json"), manifest("bounds", config, out, cfg));
  dir.commit(oo.overwrite);

  std::cout << "bounds " << cfg.name << ": gamma* = " << b.gamma_star.value << " (PE cap " << b.gamma_star.pe_cap
            << ", G " << b.gamma_star.g << "), gamma = " << b.gamma
            << (b.gamma_advisory ? " exceeds gamma*" : " within gamma*") << "\n";
  std::cout << "  cascade gamma_max = " << b.cascade.gamma_max << ", epsilon_min = " << b.cascade.epsilon_min << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive observer experiments, excitation checks and gain bounds"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  OutputOptions oo;
  std::string config;
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("config", config, "Builtin example name or config file")->required();
    sub->add_option("--out,-o", oo.out, "Output directory (default: $ADAPTOBS_OUT_DIR or ./results)");
    sub->add_flag("--overwrite", oo.overwrite, "Replace a non-empty output directory");
  };

  std::optional<double> t_end, gamma_star, L, stride, mu;
  std::optional<std::size_t> grid;
  std::optional<std::uint64_t> seed;
  bool no_pe = false;
  std::string pe_report;

  auto* run = app.add_subcommand("run", "Run a closed-loop experiment");
  add_output(run);
  run->add_option("--t-end", t_end, "Override the integration horizon");
  run->add_option("--gamma-star", gamma_star, "Exploration-gain bound to check gamma against");
  run->add_option("--seed", seed, "Seed for the optional disturbance");

  auto* pe = app.add_subcommand("check-pe", "Check lambda-uniform and nonlinear persistency of excitation");
  add_output(pe);
  pe->add_option("--grid", grid, "Lambda grid points per dimension");
  pe->add_option("--L", L, "Excitation window length");
  pe->add_option("--stride", stride, "Window start spacing");
  pe->add_option("--t-end", t_end, "End of the checked interval");

  auto* bounds = app.add_subcommand("bounds", "Estimate constants and evaluate the gain and error bounds");
  add_output(bounds);
  bounds->add_flag("--no-pe", no_pe, "Do not run the excitation check; requires --mu or --pe-report");
  bounds->add_option("--mu", mu, "Excitation level from a previous check");
  bounds->add_option("--pe-report", pe_report, "pe_report.json from a previous check-pe");

  auto* list = app.add_subcommand("list-examples", "List the builtin examples");
  std::string print_name;
  auto* print = app.add_subcommand("print-config", "Print the full configuration of an example or file");
  print->add_option("config", print_name, "Builtin example name or config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, oo, t_end, gamma_star, seed);
    if (*pe) return cmd_check_pe(config, oo, grid, L, stride, t_end);
    if (*bounds) return cmd_bounds(config, oo, no_pe, mu, pe_report);
    if (*list) {
      for (const auto& n : builtin_names()) {
        const auto c = *builtin_experiment(n);
        std::cout << n << "  (t_end " << c.grid.t_end << ", dt " << c.grid.dt << ", lambda dim "
                  << build_plant(c).lambda_dim() << ")\n";
      }
      return kOk;
    }
    if (*print) {
      std::cout << serialize_config(resolve_config(print_name));
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DivergenceFault& e) {
    std::cerr << "divergence at t = " << e.time() << ": " << e.what() << "\n";
    return kDivergence;
  } catch (const ConstantUnavailable& e) {
    std::cerr << "constant unavailable: " << e.what() << "\n";
    return kNoConstant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
