#include "adaptobs/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace adaptobs {

namespace {

using nlohmann::json;

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

json vec(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

json lambda_points(const std::vector<Eigen::VectorXd>& grid) {
  json a = json::array();
  for (const auto& l : grid) a.push_back(vec(l));
  return a;
}

// JSON has no infinity; unconstrained values are written as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> trajectory_header(const ExperimentResult& res) {
  std::vector<std::string> h = {"t", "x0", "x0_hat"};
  for (Eigen::Index k = 0; k < res.theta_true.size(); ++k) h.push_back("theta_hat_" + std::to_string(k + 1));
  for (Eigen::Index k = 0; k < res.lambda_true.size(); ++k) h.push_back("lambda_hat_" + std::to_string(k + 1));
  h.push_back("e_deadzone");
  for (const auto& c : res.channel_names) {
    h.push_back(c);
    h.push_back(c + "_hat");
  }
  return h;
}

void write_trajectory_csv(std::ostream& out, const ExperimentResult& res) {
  const auto header = trajectory_header(res);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << csv_escape(header[k]);
  out << "\r\n";
  for (const auto& s : res.samples) {
    out << num(s.t) << ',' << num(s.plant[0]) << ',' << num(s.x0_hat);
    for (Eigen::Index k = 0; k < s.theta_hat.size(); ++k) out << ',' << num(s.theta_hat[k]);
    for (Eigen::Index k = 0; k < s.lambda_hat.size(); ++k) out << ',' << num(s.lambda_hat[k]);
    out << ',' << num(s.e_deadzone);
    for (std::size_t c = 0; c < s.channel_truth.size(); ++c)
      out << ',' << num(s.channel_truth[c]) << ',' << num(s.channel_estimate[c]);
    out << "\r\n";
  }
}

std::vector<ChannelError> channel_errors(const ExperimentResult& res, double fraction) {
  std::vector<ChannelError> out;
  const std::size_t N = res.samples.size();
  if (N == 0) return out;
  const double t_first = res.samples.front().t;
  const double t_last = res.samples.back().t;
  const double t_from = t_last - fraction * (t_last - t_first);
  for (std::size_t c = 0; c < res.channel_names.size(); ++c) {
    ChannelError e;
    e.name = res.channel_names[c];
    double se = 0.0;
    double st = 0.0;
    for (const auto& s : res.samples) {
      const double truth = s.channel_truth[c];
      const double err = std::abs(s.channel_estimate[c] - truth);
      const double rel = truth != 0.0 ? err / std::abs(truth) : (err == 0.0 ? 0.0 : INFINITY);
      e.peak_relative = std::max(e.peak_relative, rel);
      if (s.t < t_from) continue;
      e.max_relative = std::max(e.max_relative, rel);
      se += err * err;
      st += truth * truth;
    }
    e.rms_relative = st > 0.0 ? std::sqrt(se / st) : 0.0;
    out.push_back(e);
  }
  return out;
}

nlohmann::json summary_json(const ExperimentConfig& cfg, const ExperimentResult& res) {
  json j;
  j["schema_version"] = 1;
  j["experiment"] = cfg.name;
  j["model"] = to_string(cfg.model);
  j["horizon"] = {{"t0", cfg.grid.t0}, {"t_end", cfg.grid.t_end}, {"dt", cfg.grid.dt}, {"steps", res.steps},
                  {"samples", res.samples.size()}, {"decimation", cfg.decimation}};
  j["theta_true"] = vec(res.theta_true);
  j["lambda_true"] = vec(res.lambda_true);
  j["theta_final"] = vec(res.theta_final);
  j["lambda_final"] = vec(res.lambda_final);

  const Eigen::VectorXd et = (res.theta_final - res.theta_true).cwiseAbs();
  const Eigen::VectorXd el = (res.lambda_final - res.lambda_true).cwiseAbs();
  j["terminal_errors"] = {{"theta", vec(et)}, {"lambda", vec(el)},
                          {"theta_norm", (res.theta_final - res.theta_true).norm()},
                          {"lambda_norm", (res.lambda_final - res.lambda_true).norm()}};

  json conv = json::array();
  for (const auto& c : res.convergence)
    conv.push_back({{"name", c.name}, {"truth", c.truth}, {"terminal", c.terminal},
                    {"time", c.time ? json(*c.time) : json(nullptr)}});
  j["convergence"] = {{"band_percent", res.band_percent}, {"parameters", conv}};

  j["tail"] = {{"fraction", cfg.tail_fraction}, {"start", res.tail_start},
               {"deadzone_mean", res.tail_deadzone_mean}, {"lambda_variation", vec(res.tail_lambda_variation)}};
  j["warm_up_end"] = res.warm_up_end;
  j["torus"] = {{"max_drift", res.max_torus_drift}, {"max_defect", res.max_torus_defect}};
  j["max_output_error"] = res.max_output_error;
  j["delta_phi"] = {{"tail", res.delta_phi.tail},
                    {"quadrature", res.delta_phi.quadrature},
                    {"interpolation", res.delta_phi.interpolation},
                    {"total", res.delta_phi.total},
                    {"checkpoints", res.delta_phi.checkpoints}};
  j["delta_xi"] = res.delta_xi;

  json ch = json::array();
  for (const auto& e : channel_errors(res, 0.2))
    ch.push_back({{"name", e.name}, {"window_fraction", 0.2}, {"max_relative_error", finite_or_null(e.max_relative)},
                  {"rms_relative_error", e.rms_relative}, {"peak_relative_error", finite_or_null(e.peak_relative)}});
  j["channels"] = ch;

  j["advisory"] = {{"gamma", cfg.observer.gamma},
                   {"gamma_star", res.gamma_star ? json(*res.gamma_star) : json(nullptr)},
                   {"gamma_exceeds_bound", res.gamma_advisory},
                   {"enforced", cfg.bounds.enforce_gamma}};
  return j;
}

nlohmann::json pe_json(const ExperimentConfig& cfg, const PEAnalysis& pe) {
  json j;
  j["experiment"] = cfg.name;
  const auto& u = pe.upe;
  j["upe"] = {{"L", u.L},
              {"stride", u.stride},
              {"t_start", u.t_start},
              {"t_end", u.t_end},
              {"sample_spacing", u.sample_spacing},
              {"windows", u.windows},
              {"lambda_grid", lambda_points(u.lambda_grid)},
              {"mu_of_lambda", vec(u.mu_of_lambda)},
              {"mu", u.mu},
              {"threshold", u.threshold},
              {"verdict", u.verdict},
              {"warnings", u.warnings},
              {"sampling", "evidence on a finite lambda grid and window set, not a proof"}};
  const auto& n = pe.npe;
  j["npe"] = {{"L", n.L},
              {"beta", finite_or_null(n.beta)},
              {"unconstrained", n.unconstrained},
              {"lambda_grid", lambda_points(n.lambda_grid)},
              {"classes", n.classes},
              {"t_samples", n.t_samples},
              {"class_tolerance", n.class_tolerance},
              {"warnings", n.warnings}};
  return j;
}

nlohmann::json bounds_json(const ExperimentConfig& cfg, const BoundsReport& b) {
  auto c = [](double v, const char* provenance) { return json{{"value", v}, {"provenance", provenance}}; };
  json j;
  j["experiment"] = cfg.name;
  j["constants"] = {
      {"mu", c(b.mu, b.mu_source == "prior" ? "prior" : "empirical")},
      {"L", c(b.L, "config")},
      {"B", c(b.regressor.B, "empirical")},
      {"D", c(b.regressor.D, "empirical")},
      {"D_c", c(b.regressor.D_c, "empirical")},
      {"S", c(b.S, "analytic")},
      {"M", c(b.M, "analytic")},
      {"D_lambda", c(b.D_lambda, "analytic")},
      {"theta_norm", c(b.theta_norm, "config")},
      {"Delta_phi", c(b.delta_phi, "empirical")},
      {"Delta_xi", c(b.delta_xi, "config")},
      {"Delta", c(b.delta, "derived")},
      {"dU", c(b.dU, "empirical")},
      {"beta_cb", c(b.beta_cb, "config")},
      {"rho", c(b.stability.rho, "empirical")},
      {"D_rho", c(b.stability.D_rho, "empirical")},
      {"kappa", c(b.kappa, "derived")},
  };
  j["stability_fit"] = {{"residual", b.stability.residual}, {"horizon", b.stability.horizon}};
  j["gamma_star"] = {{"value", b.gamma_star.value},
                     {"pe_cap", b.gamma_star.pe_cap},
                     {"g_term", b.gamma_star.g},
                     {"best_d", b.gamma_star.best_d},
                     {"best_psi", b.gamma_star.best_psi},
                     {"d_points", b.gamma_star.d_points},
                     {"psi_points", b.gamma_star.psi_points}};
  j["advisory"] = {{"gamma", b.gamma}, {"gamma_exceeds_bound", b.gamma_advisory}};
  j["error_gains"] = {{"c1", b.gain_c}, {"c2", b.gain_c}, {"d1", b.gain_d}, {"d2", b.gain_d}};
  j["cascade"] = {{"kappa", b.cascade_kappa},
                  {"d", b.cascade_d},
                  {"h0", b.cascade_h0},
                  {"x0_norm", b.cascade_x0_norm},
                  {"y0_norm", b.cascade_x0_norm},
                  {"beta_inverse", b.cascade.beta_inverse},
                  {"gamma_max", b.cascade.gamma_max},
                  {"epsilon_min", b.cascade.epsilon_min}};
  j["theta_error_floor"] = b.theta_error_floor;
  j["ltv_residual"] = {{"epsilon", b.epsilon}, {"bound", b.ltv_residual}};
  j["warnings"] = b.warnings;
  return j;
}

}  // namespace adaptobs
