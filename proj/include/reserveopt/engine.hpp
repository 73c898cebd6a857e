#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reserveopt/calib.hpp"
#include "reserveopt/config.hpp"
#include "reserveopt/fst.hpp"
#include "reserveopt/mc.hpp"

namespace reserveopt {

// Locale-independent full-precision formatting; %.17g round-trips doubles.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Scenario's technical model: calibrated from the prior unless given explicitly.
inline Calibration resolve_calibration(const ScenarioConfig& sc) {
  if (sc.technical) {
    Calibration cal;
    cal.tech = *sc.technical;
    const ChainPropagator prop(cal.tech.generator);
    cal.pi_target = prop.invariant();
    cal.lambdas.lambdas = Eigen::VectorXd();
    cal.invariant_residual = 0.0;
    cal.var_t0 = conditional_moments(0.0, cal.tech, cal.tech.mid()).second;
    cal.var_horizon = cal.var_t0;
    return cal;
  }
  return calibrate_technical(*sc.prior, sc.no_learning);
}

inline nlohmann::json calibration_report(const ScenarioConfig& sc, const Calibration& cal) {
  nlohmann::json j;
  j["scenario"] = sc.name;
  j["volumes"] = std::vector<double>(cal.tech.volumes.begin(), cal.tech.volumes.end());
  j["pi_target"] = std::vector<double>(cal.pi_target.begin(), cal.pi_target.end());
  j["lambdas"] =
      std::vector<double>(cal.lambdas.lambdas.begin(), cal.lambdas.lambdas.end());
  j["learn_a"] = cal.tech.learn_a;
  j["learn_b"] = cal.tech.learn_b;
  j["invariant_residual"] = cal.invariant_residual;
  j["conditional_variance_t0"] = cal.var_t0;
  j["conditional_variance_horizon"] = cal.var_horizon;
  if (sc.prior) {
    j["target_variance_t0"] = sc.prior->sigma0_sq;
    j["target_variance_horizon"] = sc.prior->sigmaTp_sq;
  }
  return j;
}

inline void write_boundary_csv(const std::string& path, const std::string& scenario,
                               const ExerciseBoundary& bound, const TechnicalModel& tech) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "scenario,t_years,regime_index,volume_estimate,boundary_spot_or_empty\n";
  // dates t_1..t_N: the t_0 entry stays in memory but is not a plotted week
  for (size_t d = 1; d < bound.times.size(); ++d)
    for (int j = 0; j < tech.size(); ++j) {
      const BoundaryPoint& bp = bound.entries[d][j];
      out << scenario << ',' << fmt_double(bound.times[d]) << ',' << j << ','
          << fmt_double(tech.volumes[j]) << ','
          << (bp.present ? fmt_double(bp.spot) : std::string()) << '\n';
    }
}

inline void write_surface_csv(const std::string& path, const std::string& scenario,
                              const ValueSurface& surf, const MarketModel& mkt,
                              const OutputSpec& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "scenario,t_years,regime_index,x,spot,value_undeflated\n";
  const int n_dates = static_cast<int>(surf.times.size());
  const int nx = static_cast<int>(surf.x_grid.size());
  for (int d = 0; d < n_dates; d += std::max(1, spec.surface_time_stride))
    for (int j = 0; j < surf.values[d].rows(); ++j)
      for (int i = 0; i < nx; i += std::max(1, spec.surface_x_stride))
        out << scenario << ',' << fmt_double(surf.times[d]) << ',' << j << ','
            << fmt_double(surf.x_grid[i]) << ','
            << fmt_double(std::exp(mkt.theta + surf.x_grid[i])) << ','
            << fmt_double(surf.undeflated(d, j, i)) << '\n';
}

// Conditional law of the eventual volume from the mid-state at the requested
// times: the learning-distribution bars.
inline void write_learning_csv(const std::string& path, const TechnicalModel& tech,
                               const std::vector<double>& times) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "t_years,state,probability\n";
  const ChainPropagator prop(tech.generator);
  for (double t : times) {
    const Eigen::VectorXd row = limit_transition(t, tech, prop).row(tech.mid());
    for (int k = 0; k < tech.size(); ++k)
      out << fmt_double(t) << ',' << k << ',' << fmt_double(row[k]) << '\n';
  }
}

struct ScenarioResult {
  Calibration calibration;
  ValueSurface surface;
  ExerciseBoundary boundary;
};

inline ScenarioResult run_scenario(const ScenarioConfig& sc) {
  sc.validate();
  ScenarioResult res;
  res.calibration = resolve_calibration(sc);
  res.surface = solve(sc.market, sc.plan, sc.costs, res.calibration.tech, sc.grid);
  res.boundary =
      extract_boundary(res.surface, sc.market, sc.plan, sc.costs, res.calibration.tech, sc.grid);
  return res;
}

inline void write_artifacts(const std::string& out_dir, const ScenarioConfig& sc,
                            const ScenarioResult& res) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string base = out_dir + "/" + sc.name;
  write_boundary_csv(base + "_boundary.csv", sc.name, res.boundary, res.calibration.tech);
  write_surface_csv(base + "_surface.csv", sc.name, res.surface, sc.market, sc.output);
  write_learning_csv(base + "_learning.csv", res.calibration.tech, sc.output.learning_times);
  std::ofstream rep(base + "_calibration.json", std::ios::binary);
  rep << calibration_report(sc, res.calibration).dump(2) << '\n';
}

// Reduced-resolution oracle checks for one scenario: DCF quadrature vs MC,
// European FST vs MC (3 SE), Bermudan FST vs dense lattice (1%).
inline nlohmann::json validate_scenario(const ScenarioConfig& sc) {
  sc.validate();
  const Calibration cal = resolve_calibration(sc);
  const TechnicalModel& tech = cal.tech;
  const int mid = tech.mid();
  nlohmann::json j;
  j["scenario"] = sc.name;
  bool all_pass = true;

  SimConfig sim{sc.validation.n_paths, 1.0, sc.validation.seed};

  {
    const double analytic = reserve_value(0.0, 0.0, mid, sc.market, sc.plan, tech, sc.grid);
    const McEstimate mc = simulate_dcf(0.0, 0.0, mid, sc.market, sc.plan, tech, sc.grid, sim);
    const double slack = std::max(3.0 * mc.std_error, 1e-9 * std::abs(analytic));
    const bool pass = std::abs(analytic - mc.mean) <= slack;
    j["dcf"] = {{"quadrature", analytic}, {"mc_mean", mc.mean},
                {"mc_std_error", mc.std_error}, {"pass", pass}};
    all_pass &= pass;
  }

  {
    GridSpec coarse = sc.grid;
    coarse.n_points = std::min(coarse.n_points, 1024);
    SolveOptions euro;
    euro.exercise_mask.assign(coarse.exercise_dates.size(), 0);
    euro.exercise_mask.back() = 1;
    const ValueSurface surf = solve(sc.market, sc.plan, sc.costs, tech, coarse, euro);
    const double fst = surf.values[0](mid, coarse.n_points / 2);
    const std::vector<McEstimate> mc =
        european_mc(sc.market, sc.plan, sc.costs, tech, coarse, sim);
    const double slack = std::max(3.0 * mc[mid].std_error, 2e-3 * std::abs(mc[mid].mean));
    const bool pass = std::abs(fst - mc[mid].mean) <= slack;
    j["european"] = {{"fst", fst}, {"mc_mean", mc[mid].mean},
                     {"mc_std_error", mc[mid].std_error}, {"pass", pass}};
    all_pass &= pass;
  }

  {
    const ValueSurface surf = solve(sc.market, sc.plan, sc.costs, tech, sc.grid);
    const double fst = surf.values[0](mid, sc.grid.n_points / 2);
    const LatticeResult lat =
        lattice_bermudan(sc.market, sc.plan, sc.costs, tech, sc.grid,
                         sc.validation.lattice_points, sc.validation.lattice_substeps);
    const double lattice = lat.values[mid];
    const bool pass =
        std::abs(fst - lattice) <= 0.01 * std::max(std::abs(lattice), 1e-12) &&
        !lat.stability_warning;
    j["bermudan"] = {{"fst", fst}, {"lattice", lattice},
                     {"stability_warning", lat.stability_warning}, {"pass", pass}};
    all_pass &= pass;
  }

  j["pass"] = all_pass;
  return j;
}

}  // namespace reserveopt
