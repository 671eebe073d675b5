#include "febe/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "febe/mesh.hpp"

namespace febe {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace((unsigned char)s[b])) ++b;
  while (e > b && std::isspace((unsigned char)s[e - 1])) --e;
  return s.substr(b, e - b);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': not a number: '" + value + "'");
  }
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': not an integer: '" + value + "'");
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error("config: " + msg);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string s = trim(line);
    if (s.empty()) continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(lineno) +
                  ": expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw Error("config: duplicate key '" + key + "'");
  }

  RunConfig cfg;
  bool steps_set = false, duration_set = false;
  double duration = 0;
  for (const auto& [key, value] : kv) {
    if (key == "scenario") {
      cfg.scenario = value;
    } else if (key == "mesh") {
      cfg.mesh_path = value;
    } else if (key == "poisson_ratio") {
      cfg.poisson_ratio = to_double(key, value);
    } else if (key == "bending_scale") {
      cfg.bending_scale = to_double(key, value);
    } else if (key == "coupling_strength") {
      cfg.coupling_strength = to_double(key, value);
    } else if (key == "viscosity_ratio") {
      cfg.viscosity_ratio = to_double(key, value);
    } else if (key == "time_step") {
      cfg.time_step = to_double(key, value);
    } else if (key == "steps") {
      cfg.steps = (int)to_int(key, value);
      steps_set = true;
    } else if (key == "duration") {
      duration = to_double(key, value);
      duration_set = true;
    } else if (key == "tolerance") {
      cfg.tolerance = to_double(key, value);
    } else if (key == "quad_tol") {
      cfg.quad_tol = to_double(key, value);
    } else if (key == "quad_min_order") {
      cfg.quad_min_order = (int)to_int(key, value);
    } else if (key == "quad_max_order") {
      cfg.quad_max_order = (int)to_int(key, value);
    } else if (key == "perturb_amplitude") {
      cfg.perturb_amplitude = to_double(key, value);
    } else if (key == "perturb_seed") {
      cfg.perturb_seed = (std::uint64_t)to_int(key, value);
    } else if (key == "inflow_magnitude") {
      cfg.inflow_magnitude = to_double(key, value);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "snapshot_cadence") {
      cfg.snapshot_cadence = (int)to_int(key, value);
    } else if (key == "max_subiterations") {
      cfg.max_subiterations = (int)to_int(key, value);
    } else if (key == "max_newton") {
      cfg.max_newton = (int)to_int(key, value);
    } else if (key == "gap") {
      cfg.gap = to_double(key, value);
    } else if (key == "refine") {
      cfg.refine = (int)to_int(key, value);
    } else {
      throw Error("config: unknown key '" + key + "'");
    }
  }

  require(cfg.time_step > 0 && std::isfinite(cfg.time_step), "time_step must be positive");
  if (duration_set) {
    require(!steps_set, "give either steps or duration, not both");
    require(duration >= 0 && std::isfinite(duration), "duration must be nonnegative");
    cfg.steps = (int)std::llround(duration / cfg.time_step);
  }
  require(cfg.steps >= 0, "steps must be nonnegative");
  require(cfg.poisson_ratio >= 0 && cfg.poisson_ratio < 0.5,
          "poisson_ratio must lie in [0, 1/2)");
  require(cfg.bending_scale > 0 && std::isfinite(cfg.bending_scale),
          "bending_scale must be positive");
  require(cfg.coupling_strength >= 0 && std::isfinite(cfg.coupling_strength),
          "coupling_strength must be nonnegative");
  require(cfg.viscosity_ratio >= 0 && !std::isnan(cfg.viscosity_ratio),
          "viscosity_ratio must be nonnegative or inf");
  require(cfg.tolerance > 0 && std::isfinite(cfg.tolerance), "tolerance must be positive");
  require(cfg.quad_tol > 0 && std::isfinite(cfg.quad_tol), "quad_tol must be positive");
  require(cfg.quad_min_order >= 1 && cfg.quad_max_order >= cfg.quad_min_order &&
              cfg.quad_max_order <= 100,
          "quadrature orders must satisfy 1 <= quad_min_order <= quad_max_order <= 100");
  require(cfg.perturb_amplitude >= 0 && std::isfinite(cfg.perturb_amplitude),
          "perturb_amplitude must be nonnegative");
  require(cfg.inflow_magnitude >= 0 && std::isfinite(cfg.inflow_magnitude),
          "inflow_magnitude must be nonnegative");
  require(cfg.snapshot_cadence >= 1, "snapshot_cadence must be at least 1");
  require(cfg.max_subiterations >= 1, "max_subiterations must be at least 1");
  require(cfg.max_newton >= 1, "max_newton must be at least 1");
  require(cfg.gap > 0 && std::isfinite(cfg.gap), "gap must be positive");
  require(cfg.refine >= 0 && cfg.refine <= 6, "refine must lie in [0, 6]");
  require(!cfg.output_dir.empty(), "output_dir must not be empty");
  if (cfg.mesh_path.empty()) {
    require(cfg.scenario == "balloon" || cfg.scenario == "sphere_drag" ||
                cfg.scenario == "two_plates" || cfg.scenario == "cube",
            "unknown scenario '" + cfg.scenario + "'");
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  char buf[64];
  std::ostringstream out;
  auto num = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << " = " << buf << "\n";
  };
  out << "scenario = " << cfg.scenario << "\n";
  if (!cfg.mesh_path.empty()) out << "mesh = " << cfg.mesh_path << "\n";
  num("poisson_ratio", cfg.poisson_ratio);
  num("bending_scale", cfg.bending_scale);
  num("coupling_strength", cfg.coupling_strength);
  num("viscosity_ratio", cfg.viscosity_ratio);
  num("time_step", cfg.time_step);
  out << "steps = " << cfg.steps << "\n";
  num("tolerance", cfg.tolerance);
  num("quad_tol", cfg.quad_tol);
  out << "quad_min_order = " << cfg.quad_min_order << "\n";
  out << "quad_max_order = " << cfg.quad_max_order << "\n";
  num("perturb_amplitude", cfg.perturb_amplitude);
  out << "perturb_seed = " << cfg.perturb_seed << "\n";
  num("inflow_magnitude", cfg.inflow_magnitude);
  out << "output_dir = " << cfg.output_dir << "\n";
  out << "snapshot_cadence = " << cfg.snapshot_cadence << "\n";
  out << "max_subiterations = " << cfg.max_subiterations << "\n";
  out << "max_newton = " << cfg.max_newton << "\n";
  num("gap", cfg.gap);
  out << "refine = " << cfg.refine << "\n";
  return out.str();
}

}  // namespace febe
