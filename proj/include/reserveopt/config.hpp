#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reserveopt/types.hpp"

namespace reserveopt {

struct OutputSpec {
  int surface_time_stride = 64;   // every k-th exercise date in the surface CSV
  int surface_x_stride = 16;      // every k-th x node
  std::vector<double> learning_times = {0.0, 2.0};
};

struct ValidationSpec {
  std::uint64_t seed = 20260823;
  long long n_paths = 200000;
  int lattice_points = 801;
  int lattice_substeps = 2;
};

struct ScenarioConfig {
  std::string name;
  MarketModel market;
  ExtractionPlan plan;
  CostModel costs;
  std::optional<PriorSpec> prior;          // calibrated technical model, or ...
  std::optional<TechnicalModel> technical; // ... an explicit one
  bool no_learning = false;
  GridSpec grid;
  OutputSpec output;
  ValidationSpec validation;

  void validate() const {
    if (name.empty()) throw std::invalid_argument("scenario: missing name");
    market.validate();
    plan.validate();
    costs.validate();
    grid.validate();
    if (prior.has_value() == technical.has_value())
      throw std::invalid_argument("scenario '" + name +
                                  "': need exactly one of prior/technical");
    if (prior) prior->validate();
    if (technical) technical->validate();
  }
};

struct RunConfig {
  std::string output_dir = "out";
  std::vector<ScenarioConfig> scenarios;
};

namespace detail {

template <class T>
T require(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key))
    throw std::runtime_error("config: missing field '" + key + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: bad field '" + key + "' in " + where + ": " + e.what());
  }
}

template <class T>
T optional_or(const nlohmann::json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline ScenarioConfig parse_scenario(const nlohmann::json& j) {
  ScenarioConfig sc;
  sc.name = require<std::string>(j, "name", "scenario");
  const std::string where = "scenario '" + sc.name + "'";

  const auto& mk = j.at("market");
  sc.market = {require<double>(mk, "kappa", where), require<double>(mk, "theta", where),
               require<double>(mk, "sigma", where), require<double>(mk, "rho", where)};

  const auto& ex = j.at("extraction");
  sc.plan = {require<double>(ex, "alpha", where), require<double>(ex, "beta", where),
             require<double>(ex, "gamma", where), require<double>(ex, "epsilon", where),
             require<double>(ex, "running_cost", where)};

  const auto& co = j.at("costs");
  sc.costs = {require<double>(co, "c0", where), require<double>(co, "c1", where)};

  if (j.contains("prior")) {
    const auto& pr = j.at("prior");
    PriorSpec prior;
    prior.mu = require<double>(pr, "mu", where);
    prior.sigma0_sq = require<double>(pr, "sigma0_sq", where);
    prior.sigmaTp_sq = require<double>(pr, "sigmaTp_sq", where);
    prior.t_prime = require<double>(pr, "t_prime", where);
    prior.m = require<int>(pr, "m", where);
    prior.n_sigmas = optional_or<double>(pr, "n_sigmas", 3.0);
    sc.prior = prior;
  }
  if (j.contains("technical")) {
    const auto& te = j.at("technical");
    TechnicalModel tech;
    const auto vols = require<std::vector<double>>(te, "volumes", where);
    tech.volumes = Eigen::Map<const Eigen::VectorXd>(vols.data(), vols.size());
    const auto rows = require<std::vector<std::vector<double>>>(te, "generator", where);
    tech.generator.resize(rows.size(), rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.size())
        throw std::runtime_error("config: ragged generator in " + where);
      for (size_t c = 0; c < rows.size(); ++c) tech.generator(r, c) = rows[r][c];
    }
    tech.learn_a = require<double>(te, "learn_a", where);
    tech.learn_b = require<double>(te, "learn_b", where);
    sc.technical = tech;
  }
  sc.no_learning = optional_or<std::string>(j, "learning", "calibrated") == "none";

  const auto& gr = j.at("grid");
  sc.grid.x_half_width = require<double>(gr, "x_half_width", where);
  sc.grid.n_points = require<int>(gr, "n_points", where);
  sc.grid.quadrature_points = optional_or<int>(gr, "quadrature_points", 64);
  const double t_max = require<double>(gr, "t_max", where);
  const int n_steps = require<int>(gr, "n_steps", where);
  if (n_steps < 1) throw std::runtime_error("config: n_steps must be >= 1 in " + where);
  sc.grid.exercise_dates.resize(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i) sc.grid.exercise_dates[i] = i * t_max / n_steps;

  if (j.contains("output")) {
    const auto& ou = j.at("output");
    sc.output.surface_time_stride = optional_or<int>(ou, "surface_time_stride", 64);
    sc.output.surface_x_stride = optional_or<int>(ou, "surface_x_stride", 16);
    sc.output.learning_times =
        optional_or<std::vector<double>>(ou, "learning_times", {0.0, 2.0});
  }
  if (j.contains("validation")) {
    const auto& va = j.at("validation");
    sc.validation.seed = optional_or<std::uint64_t>(va, "seed", 20260823ull);
    sc.validation.n_paths = optional_or<long long>(va, "n_paths", 200000);
    sc.validation.lattice_points = optional_or<int>(va, "lattice_points", 801);
    sc.validation.lattice_substeps = optional_or<int>(va, "lattice_substeps", 2);
  }
  sc.validate();
  return sc;
}

}  // namespace detail

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config: parse error in '" + path + "': " + e.what());
  }
  RunConfig cfg;
  cfg.output_dir = detail::optional_or<std::string>(j, "output_dir", "out");
  if (!j.contains("scenarios") || !j.at("scenarios").is_array() || j.at("scenarios").empty())
    throw std::runtime_error("config: need a nonempty 'scenarios' array in '" + path + "'");
  std::set<std::string> names;
  for (const auto& js : j.at("scenarios")) {
    ScenarioConfig sc = detail::parse_scenario(js);
    if (!names.insert(sc.name).second)
      throw std::runtime_error("config: duplicate scenario name '" + sc.name + "'");
    cfg.scenarios.push_back(std::move(sc));
  }
  return cfg;
}

}  // namespace reserveopt
