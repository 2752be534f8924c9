#include "adaptobs/config.hpp"

#include "adaptobs/errors.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace adaptobs {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

using Setter = std::function<void(ExperimentConfig&, const std::string& raw, const std::string& field, int line)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Setter set;
  Getter get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& field, int line, const std::string& what) {
  std::ostringstream msg;
  if (line > 0) msg << "line " << line << ": ";
  msg << field << ": " << what;
  throw ConfigError(field, line, msg.str());
}

// Shortest representation that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double to_double(const std::string& raw, const std::string& field, int line) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) fail(field, line, "expected a number, got '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& raw, const std::string& field, int line) {
  const std::string s = trim(raw);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    fail(field, line, "expected a nonnegative integer, got '" + s + "'");
  return v;
}

std::vector<double> to_list(const std::string& raw, const std::string& field, int line) {
  std::vector<double> out;
  const std::string s = trim(raw);
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item, field, line));
  if (s.back() == ',') fail(field, line, "trailing comma");
  return out;
}

std::string list_str(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + fmt(v[k]);
  return out;
}

// Field builders over an accessor returning a reference into the config.
template <class Acc>
Field num(std::string sec, std::string key, Acc acc) {
  return {sec, key, [acc](ExperimentConfig& c, const std::string& raw, const std::string& f, int l) {
            acc(c) = to_double(raw, f, l);
          },
          [acc](const ExperimentConfig& c) { return fmt(acc(const_cast<ExperimentConfig&>(c))); }};
}

template <class Acc>
Field count(std::string sec, std::string key, Acc acc) {
  return {sec, key, [acc](ExperimentConfig& c, const std::string& raw, const std::string& f, int l) {
            using T = std::remove_reference_t<decltype(acc(c))>;
            acc(c) = static_cast<T>(to_uint(raw, f, l));
          },
          [acc](const ExperimentConfig& c) { return std::to_string(acc(const_cast<ExperimentConfig&>(c))); }};
}

template <class Acc>
Field flag(std::string sec, std::string key, Acc acc) {
  return {sec, key, [acc](ExperimentConfig& c, const std::string& raw, const std::string& f, int l) {
            const std::string s = trim(raw);
            if (s == "true") acc(c) = true;
            else if (s == "false") acc(c) = false;
            else fail(f, l, "expected true or false, got '" + s + "'");
          },
          [acc](const ExperimentConfig& c) { return std::string(acc(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); }};
}

template <class Acc>
Field interval(std::string sec, std::string key, Acc acc) {
  return {sec, key, [acc](ExperimentConfig& c, const std::string& raw, const std::string& f, int l) {
            const auto v = to_list(raw, f, l);
            if (v.size() != 2) fail(f, l, "expected an interval 'lo, hi'");
            acc(c) = Interval{v[0], v[1]};
          },
          [acc](const ExperimentConfig& c) {
            const Interval& i = acc(const_cast<ExperimentConfig&>(c));
            return fmt(i.lo) + ", " + fmt(i.hi);
          }};
}

template <class Acc>
Field list(std::string sec, std::string key, Acc acc) {
  return {sec, key, [acc](ExperimentConfig& c, const std::string& raw, const std::string& f, int l) {
            acc(c) = to_list(raw, f, l);
          },
          [acc](const ExperimentConfig& c) { return list_str(acc(const_cast<ExperimentConfig&>(c))); }};
}

template <class Acc>
Field noise(std::string key, Acc acc) {
  // acc returns the model's NoiseSpec
  if (key == "noise_amplitude") return num("plant", key, [acc](ExperimentConfig& c) -> double& { return acc(c).amplitude; });
  if (key == "noise_knot_spacing") return num("plant", key, [acc](ExperimentConfig& c) -> double& { return acc(c).knot_spacing; });
  return count("plant", key, [acc](ExperimentConfig& c) -> std::uint64_t& { return acc(c).seed; });
}

#define ACC(expr) [](ExperimentConfig& c) -> auto& { return expr; }

std::vector<Field> plant_fields(ModelKind m) {
  std::vector<Field> f;
  auto add_noise = [&f](auto acc) {
    for (const char* k : {"noise_amplitude", "noise_seed", "noise_knot_spacing"}) f.push_back(noise(k, acc));
  };
  switch (m) {
    case ModelKind::Duffing:
      f.push_back(num("plant", "delta", ACC(c.duffing.delta)));
      f.push_back(num("plant", "alpha", ACC(c.duffing.alpha)));
      f.push_back(num("plant", "beta", ACC(c.duffing.beta)));
      f.push_back(num("plant", "gamma", ACC(c.duffing.gamma)));
      f.push_back(num("plant", "omega", ACC(c.duffing.omega)));
      f.push_back(num("plant", "x0_init", ACC(c.duffing.x0_init)));
      f.push_back(num("plant", "x1_init", ACC(c.duffing.x1_init)));
      f.push_back(interval("plant", "tau_box", ACC(c.duffing.tau_box)));
      f.push_back(interval("plant", "theta_box", ACC(c.duffing.theta_box)));
      add_noise(ACC(c.duffing.noise));
      break;
    case ModelKind::Bioreactor:
      f.push_back(num("plant", "d", ACC(c.bioreactor.d)));
      f.push_back(num("plant", "k", ACC(c.bioreactor.k)));
      f.push_back(num("plant", "r_max", ACC(c.bioreactor.r_max)));
      f.push_back(num("plant", "b", ACC(c.bioreactor.b)));
      f.push_back(num("plant", "u_amp", ACC(c.bioreactor.u_amp)));
      f.push_back(num("plant", "u_freq", ACC(c.bioreactor.u_freq)));
      f.push_back(num("plant", "u_offset", ACC(c.bioreactor.u_offset)));
      f.push_back(num("plant", "s0_init", ACC(c.bioreactor.s0_init)));
      f.push_back(num("plant", "s1_init", ACC(c.bioreactor.s1_init)));
      f.push_back(interval("plant", "k_box", ACC(c.bioreactor.k_box)));
      f.push_back(interval("plant", "d_box", ACC(c.bioreactor.d_box)));
      f.push_back(interval("plant", "theta_box", ACC(c.bioreactor.theta_box)));
      add_noise(ACC(c.bioreactor.noise));
      break;
    case ModelKind::LotkaVolterra:
      f.push_back(num("plant", "alpha", ACC(c.lotka_volterra.alpha)));
      f.push_back(num("plant", "gamma", ACC(c.lotka_volterra.gamma)));
      f.push_back(num("plant", "delta", ACC(c.lotka_volterra.delta)));
      f.push_back(num("plant", "x_init", ACC(c.lotka_volterra.x_init)));
      f.push_back(num("plant", "y_init", ACC(c.lotka_volterra.y_init)));
      f.push_back(interval("plant", "tau_box", ACC(c.lotka_volterra.tau_box)));
      f.push_back(interval("plant", "theta_box", ACC(c.lotka_volterra.theta_box)));
      add_noise(ACC(c.lotka_volterra.noise));
      break;
  }
  return f;
}

std::vector<Field> all_fields(ModelKind m) {
  std::vector<Field> f;
  f.push_back({"experiment", "name",
               [](ExperimentConfig& c, const std::string& raw, const std::string& field, int line) {
                 c.name = trim(raw);
                 if (c.name.empty()) fail(field, line, "must not be empty");
               },
               [](const ExperimentConfig& c) { return c.name; }});
  f.push_back({"experiment", "model", [](ExperimentConfig&, const std::string&, const std::string&, int) {},
               [](const ExperimentConfig& c) { return to_string(c.model); }});
  for (auto& p : plant_fields(m)) f.push_back(std::move(p));

  f.push_back(num("observer", "alpha", ACC(c.observer.alpha)));
  f.push_back(num("observer", "gamma_theta", ACC(c.observer.gamma_theta)));
  f.push_back(num("observer", "gamma", ACC(c.observer.gamma)));
  f.push_back(num("observer", "epsilon", ACC(c.observer.epsilon)));
  f.push_back(list("observer", "omega", ACC(c.observer.omega)));
  f.push_back({"observer", "sigma",
               [](ExperimentConfig& c, const std::string& raw, const std::string& field, int line) {
                 try {
                   c.observer.sigma = parse_saturation(trim(raw));
                 } catch (const std::invalid_argument&) {
                   fail(field, line, "expected tanh or clip, got '" + trim(raw) + "'");
                 }
               },
               [](const ExperimentConfig& c) { return to_string(c.observer.sigma); }});
  f.push_back(list("observer", "torus_angle", ACC(c.observer.torus_angle)));
  f.push_back({"observer", "theta_init",
               [](ExperimentConfig& c, const std::string& raw, const std::string& field, int line) {
                 const auto v = to_list(raw, field, line);
                 c.observer.theta_init = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
               },
               [](const ExperimentConfig& c) {
                 const auto& t = c.observer.theta_init;
                 return list_str(std::vector<double>(t.data(), t.data() + t.size()));
               }});

  f.push_back(num("integration", "t0", ACC(c.grid.t0)));
  f.push_back(num("integration", "t_end", ACC(c.grid.t_end)));
  f.push_back(num("integration", "dt", ACC(c.grid.dt)));

  f.push_back(num("regressor", "window_T", ACC(c.window_T)));
  f.push_back({"regressor", "mode",
               [](ExperimentConfig& c, const std::string& raw, const std::string& field, int line) {
                 try {
                   c.mode = parse_regressor_mode(trim(raw));
                 } catch (const std::invalid_argument&) {
                   fail(field, line, "expected interpolated or direct, got '" + trim(raw) + "'");
                 }
               },
               [](const ExperimentConfig& c) { return to_string(c.mode); }});
  f.push_back(count("regressor", "nodes", ACC(c.nodes)));

  f.push_back(count("output", "decimation", ACC(c.decimation)));
  f.push_back(num("output", "band_percent", ACC(c.band_percent)));
  f.push_back(num("output", "tail_fraction", ACC(c.tail_fraction)));

  f.push_back(count("pe", "grid_points", ACC(c.pe.grid_points)));
  f.push_back(num("pe", "L", ACC(c.pe.L)));
  f.push_back(num("pe", "stride", ACC(c.pe.stride)));
  f.push_back(num("pe", "t_start", ACC(c.pe.t_start)));
  f.push_back(num("pe", "t_end", ACC(c.pe.t_end)));
  f.push_back(count("pe", "sample_decimation", ACC(c.pe.sample_decimation)));
  f.push_back(num("pe", "threshold", ACC(c.pe.threshold)));
  f.push_back(count("pe", "npe_grid_points", ACC(c.pe.npe_grid_points)));
  f.push_back(num("pe", "npe_L", ACC(c.pe.npe_L)));
  f.push_back(count("pe", "npe_decimation", ACC(c.pe.npe_decimation)));
  f.push_back(count("pe", "npe_t_every", ACC(c.pe.npe_t_every)));
  f.push_back(num("pe", "class_tolerance", ACC(c.pe.class_tolerance)));

  f.push_back(flag("bounds", "enforce_gamma", ACC(c.bounds.enforce_gamma)));
  f.push_back(count("bounds", "grid_points", ACC(c.bounds.grid_points)));
  f.push_back(count("bounds", "d_points", ACC(c.bounds.d_points)));
  f.push_back(count("bounds", "psi_points", ACC(c.bounds.psi_points)));
  f.push_back(num("bounds", "stability_horizon", ACC(c.bounds.stability_horizon)));
  f.push_back(num("bounds", "beta_cb", ACC(c.bounds.beta_cb)));
  f.push_back(num("bounds", "cascade_kappa", ACC(c.bounds.cascade_kappa)));
  f.push_back(num("bounds", "cascade_d", ACC(c.bounds.cascade_d)));
  f.push_back(num("bounds", "cascade_h0", ACC(c.bounds.cascade_h0)));
  return f;
}

#undef ACC

const char* const kSections[] = {"experiment", "plant", "observer", "integration", "regressor", "output", "pe", "bounds"};

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, Entry> entries;
  std::vector<std::string> order;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s[0] == '[') {
      if (s.back() != ']') fail(s, line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      bool known = false;
      for (const char* k : kSections) known = known || section == k;
      if (!known) fail(section, line, "unknown section");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(section.empty() ? s : section + "." + trim(s), line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    std::string value = s.substr(eq + 1);
    if (const auto hash = value.find('#'); hash != std::string::npos) value = value.substr(0, hash);
    value = trim(value);
    if (section.empty()) fail(key, line, "key outside any section");
    if (key.empty()) fail(section, line, "missing key");
    const std::string field = section + "." + key;
    if (entries.count(field)) fail(field, line, "duplicate key (first set on line " + std::to_string(entries[field].line) + ")");
    entries[field] = {value, line};
    order.push_back(field);
  }

  const auto model_it = entries.find("experiment.model");
  if (model_it == entries.end()) fail("experiment.model", 0, "missing (duffing, bioreactor or lotka_volterra)");
  ModelKind model;
  try {
    model = parse_model_kind(model_it->second.value);
  } catch (const std::invalid_argument& e) {
    fail("experiment.model", model_it->second.line, e.what());
  }

  ExperimentConfig cfg = *builtin_experiment(to_string(model));
  const auto fields = all_fields(model);
  std::map<std::string, const Field*> by_name;
  for (const auto& f : fields) by_name[f.section + "." + f.key] = &f;
  for (const auto& name : order) {
    const auto it = by_name.find(name);
    const Entry& e = entries[name];
    if (it == by_name.end()) {
      if (name.rfind("plant.", 0) == 0) fail(name, e.line, "not a parameter of model " + to_string(model));
      fail(name, e.line, "unknown key");
    }
    it->second->set(cfg, e.value, name, e.line);
  }

  try {
    cfg.validate();
  } catch (const ConfigError& err) {
    const auto it = entries.find(err.field());
    std::string what = err.what();
    if (const std::string prefix = err.field() + ": "; what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
    if (it != entries.end()) fail(err.field(), it->second.line, what);
    throw;
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", 0, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "# adaptobs experiment configuration\n";
  std::string section;
  for (const auto& f : all_fields(cfg.model)) {
    if (f.section != section) {
      out << (section.empty() ? "" : "\n") << "[" << f.section << "]\n";
      section = f.section;
    }
    const std::string v = f.get(cfg);
    out << f.key << (v.empty() ? " =" : " = " + v) << "\n";
  }
  return out.str();
}

ExperimentConfig resolve_config(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  if (auto b = builtin_experiment(name_or_path)) return *b;
  std::error_code ec;
  if (fs::is_regular_file(name_or_path, ec)) return load_config(name_or_path);
  if (fs::is_regular_file(name_or_path + ".cfg", ec)) return load_config(name_or_path + ".cfg");
  if (auto b = builtin_experiment(fs::path(name_or_path).filename().string())) return *b;
  throw ConfigError("config", 0, "no builtin example or config file named '" + name_or_path + "'");
}

}  // namespace adaptobs
