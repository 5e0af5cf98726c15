#pragma once

// File formats: tab-separated input tables, the versioned JSON fit file, the
// JSON run and scenario configurations (strict: unknown keys are rejected),
// and numeric serialization at 17 significant digits so every written value
// round-trips losslessly.

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "ecnshrink/cash.hpp"
#include "ecnshrink/ecn.hpp"
#include "ecnshrink/simlab.hpp"

namespace ecns {

/// Raised for malformed inputs and configurations; maps to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string to_string17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct InputTable {
  std::vector<std::string> ids;
  Eigen::VectorXd x;  // z values when z_only
  Eigen::VectorXd s;  // empty when z_only
  bool z_only = false;

  long rows() const { return x.size(); }

  Dataset dataset() const {
    if (z_only) throw InputError("input table has z-scores only; (x, s) required");
    return Dataset{x, s};
  }

  Eigen::VectorXd z_scores() const { return z_only ? x : Eigen::VectorXd(x.cwiseQuotient(s)); }
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline double parse_double(const std::string& field, long line_no, const char* col) {
  try {
    std::size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    if (!std::isfinite(v)) {
      throw InputError("line " + std::to_string(line_no) + ": non-finite " + col + " value");
    }
    return v;
  } catch (const InputError&) {
    throw;
  } catch (const std::exception&) {
    throw InputError("line " + std::to_string(line_no) + ": cannot parse " + col +
                     " value '" + field + "'");
  }
}

}  // namespace detail

inline InputTable parse_input_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  InputTable table;
  if (line == "id\tx\ts") {
    table.z_only = false;
  } else if (line == "id\tz") {
    table.z_only = true;
  } else {
    throw InputError("line 1: header must be exactly 'id\\tx\\ts' or 'id\\tz', got '" + line +
                     "'");
  }
  std::vector<double> xs, ss;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_tabs(line);
    std::size_t expected = table.z_only ? 2 : 3;
    if (fields.size() != expected) {
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(expected) + " tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    table.ids.push_back(fields[0]);
    xs.push_back(detail::parse_double(fields[1], line_no, table.z_only ? "z" : "x"));
    if (!table.z_only) {
      double s = detail::parse_double(fields[2], line_no, "s");
      if (!(s > 0.0)) {
        throw InputError("line " + std::to_string(line_no) + ": s must be positive");
      }
      ss.push_back(s);
    }
  }
  table.x = Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size());
  if (!table.z_only) table.s = Eigen::Map<Eigen::VectorXd>(ss.data(), ss.size());
  return table;
}

inline InputTable read_input_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return parse_input_table(in);
}

struct RunConfig {
  CashConfig cash;
  std::uint64_t seed = 1;
  std::optional<std::string> output;
};

namespace detail {

inline void require_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw InputError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

inline nlohmann::json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig cfg;
  detail::require_keys(j,
                       {"penalty", "lambda0", "grid", "sigma_grid", "max_outer_iters",
                        "outer_tol", "seed", "output"},
                       "run config");
  try {
    if (j.contains("penalty")) {
      const auto& p = j.at("penalty");
      detail::require_keys(p, {"gamma", "rho", "L"}, "penalty");
      cfg.cash.penalty.gamma = p.value("gamma", cfg.cash.penalty.gamma);
      cfg.cash.penalty.rho = p.value("rho", cfg.cash.penalty.rho);
      cfg.cash.penalty.max_order = p.value("L", cfg.cash.penalty.max_order);
    }
    cfg.cash.lambda0 = j.value("lambda0", cfg.cash.lambda0);
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      detail::require_keys(g, {"lo", "hi", "step"}, "grid");
      cfg.cash.grid.lo = g.value("lo", cfg.cash.grid.lo);
      cfg.cash.grid.hi = g.value("hi", cfg.cash.grid.hi);
      cfg.cash.grid.step = g.value("step", cfg.cash.grid.step);
    }
    if (j.contains("sigma_grid")) {
      std::vector<double> sg = j.at("sigma_grid").get<std::vector<double>>();
      cfg.cash.sigma_override = Eigen::Map<Eigen::VectorXd>(sg.data(), sg.size());
    }
    cfg.cash.max_outer_iters = j.value("max_outer_iters", cfg.cash.max_outer_iters);
    cfg.cash.outer_tol = j.value("outer_tol", cfg.cash.outer_tol);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("run config: ") + e.what());
  }
  try {
    cfg.cash.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("run config: ") + e.what());
  }
  return cfg;
}

inline RunConfig read_run_config(const std::string& path) {
  return parse_run_config(detail::parse_json_file(path));
}

/// Fitted-model file, format_version 1.  Written by hand so key order and
/// the 17-significant-digit float format are stable across runs.
struct FitFile {
  std::string model;  // "cash" or "ecn"
  Eigen::VectorXd omega;
  Eigen::VectorXd sigma_grid;  // empty for ecn
  Eigen::VectorXd pi;          // empty for ecn
  bool converged = true;
  std::vector<double> objective_trace;
  double fitted_sd = 1.0;  // NaN serializes as null
};

namespace detail {

inline void write_array(std::string& out, const char* key, const double* v, long n) {
  out += "  \"";
  out += key;
  out += "\": [";
  for (long i = 0; i < n; ++i) {
    if (i) out += ", ";
    out += to_string17(v[i]);
  }
  out += "]";
}

}  // namespace detail

inline std::string serialize_fit_file(const FitFile& fit) {
  std::string out = "{\n";
  out += "  \"format_version\": 1,\n";
  out += "  \"model\": \"" + fit.model + "\",\n";
  detail::write_array(out, "omega", fit.omega.data(), fit.omega.size());
  out += ",\n";
  detail::write_array(out, "sigma_grid", fit.sigma_grid.data(), fit.sigma_grid.size());
  out += ",\n";
  detail::write_array(out, "pi", fit.pi.data(), fit.pi.size());
  out += ",\n";
  out += std::string("  \"converged\": ") + (fit.converged ? "true" : "false") + ",\n";
  detail::write_array(out, "objective_trace", fit.objective_trace.data(),
                      static_cast<long>(fit.objective_trace.size()));
  out += ",\n";
  out += "  \"fitted_noise_sd\": ";
  out += std::isnan(fit.fitted_sd) ? "null" : to_string17(fit.fitted_sd);
  out += "\n}\n";
  return out;
}

inline FitFile parse_fit_file(const nlohmann::json& j) {
  detail::require_keys(j,
                       {"format_version", "model", "omega", "sigma_grid", "pi", "converged",
                        "objective_trace", "fitted_noise_sd"},
                       "fit file");
  FitFile fit;
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw InputError("fit file: unsupported format_version");
    }
    fit.model = j.at("model").get<std::string>();
    if (fit.model != "cash" && fit.model != "ecn") {
      throw InputError("fit file: model must be 'cash' or 'ecn'");
    }
    auto vec = [](const nlohmann::json& a) {
      std::vector<double> v = a.get<std::vector<double>>();
      return Eigen::Map<Eigen::VectorXd>(v.data(), v.size()).eval();
    };
    fit.omega = vec(j.at("omega"));
    fit.sigma_grid = vec(j.at("sigma_grid"));
    fit.pi = vec(j.at("pi"));
    fit.converged = j.at("converged").get<bool>();
    fit.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    fit.fitted_sd = j.at("fitted_noise_sd").is_null()
                        ? std::numeric_limits<double>::quiet_NaN()
                        : j.at("fitted_noise_sd").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("fit file: ") + e.what());
  }
  if (fit.model == "cash" && fit.pi.size() != fit.sigma_grid.size() + 1) {
    throw InputError("fit file: pi must have one more entry than sigma_grid");
  }
  return fit;
}

inline FitFile read_fit_file(const std::string& path) {
  return parse_fit_file(detail::parse_json_file(path));
}

/// Scenario configuration for the simulation command.
struct SimulateConfig {
  Scenario scenario;
  int replicates = 50;
};

inline SimulateConfig parse_simulate_config(const nlohmann::json& j) {
  SimulateConfig cfg;
  detail::require_keys(j, {"g1", "pi0", "p", "noise", "seed", "replicates"},
                       "scenario config");
  try {
    cfg.scenario.g1 = effect_family_from_string(j.value("g1", std::string("Gaussian")));
    cfg.scenario.pi0 = j.value("pi0", cfg.scenario.pi0);
    cfg.scenario.p = j.value("p", cfg.scenario.p);
    cfg.scenario.seed = j.value("seed", cfg.scenario.seed);
    cfg.replicates = j.value("replicates", cfg.replicates);
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      detail::require_keys(n, {"type", "rho", "loadings"}, "noise model");
      std::string type = n.value("type", std::string("iid"));
      if (type == "iid") {
        cfg.scenario.noise.kind = NoiseModel::Kind::iid;
      } else if (type == "one_factor") {
        cfg.scenario.noise.kind = NoiseModel::Kind::one_factor;
      } else if (type == "equicorrelated") {
        cfg.scenario.noise.kind = NoiseModel::Kind::equicorrelated;
      } else if (type == "k_factor") {
        cfg.scenario.noise.kind = NoiseModel::Kind::k_factor;
      } else if (type == "pairs") {
        cfg.scenario.noise.kind = NoiseModel::Kind::pairs;
      } else {
        throw InputError("scenario config: unknown noise type '" + type + "'");
      }
      cfg.scenario.noise.rho = n.value("rho", cfg.scenario.noise.rho);
      if (n.contains("loadings")) {
        std::vector<double> b = n.at("loadings").get<std::vector<double>>();
        cfg.scenario.noise.loadings = Eigen::Map<Eigen::VectorXd>(b.data(), b.size());
      }
    }
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("scenario config: ") + e.what());
  }
  if (cfg.replicates < 1) throw InputError("scenario config: replicates must be positive");
  try {
    cfg.scenario.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("scenario config: ") + e.what());
  }
  return cfg;
}

inline SimulateConfig read_simulate_config(const std::string& path) {
  return parse_simulate_config(detail::parse_json_file(path));
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open output file for writing: " + path);
  out << content;
  if (!out) throw InputError("failed writing output file: " + path);
}

}  // namespace ecns
