#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reserveopt/engine.hpp"

namespace {

std::string default_out_dir(const reserveopt::RunConfig& cfg, const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("RESERVEOPT_OUT"); env && *env) return env;
  return cfg.output_dir;
}

std::vector<const reserveopt::ScenarioConfig*> select_scenarios(
    const reserveopt::RunConfig& cfg, const std::vector<std::string>& filter) {
  std::vector<const reserveopt::ScenarioConfig*> out;
  if (filter.empty()) {
    for (const auto& sc : cfg.scenarios) out.push_back(&sc);
    return out;
  }
  for (const auto& name : filter) {
    const reserveopt::ScenarioConfig* found = nullptr;
    for (const auto& sc : cfg.scenarios)
      if (sc.name == name) found = &sc;
    if (!found) {
      std::string available;
      for (const auto& sc : cfg.scenarios) available += " " + sc.name;
      throw std::runtime_error("unknown scenario '" + name + "'; available:" + available);
    }
    out.push_back(found);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reserveopt: real-option valuation of a commodity reserve under "
               "technical uncertainty"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> scenario_filter;

  CLI::App* run = app.add_subcommand("run", "calibrate, price and write CSV artifacts");
  run->add_option("--config", config_path, "config file (JSON)")->required();
  run->add_option("--scenario", scenario_filter, "scenario name(s); default: all");
  run->add_option("--out", out_dir, "output directory (default: RESERVEOPT_OUT or config)");

  CLI::App* validate = app.add_subcommand("validate", "run the Monte-Carlo/lattice oracle checks");
  validate->add_option("--config", config_path, "config file (JSON)")->required();
  validate->add_option("--scenario", scenario_filter, "scenario name(s); default: all");
  validate->add_option("--out", out_dir, "output directory for the report");

  CLI::App* calibrate = app.add_subcommand("calibrate", "print the calibration report");
  calibrate->add_option("--config", config_path, "config file (JSON)")->required();
  calibrate->add_option("--scenario", scenario_filter, "scenario name(s); default: all");

  CLI11_PARSE(app, argc, argv);

  try {
    const reserveopt::RunConfig cfg = reserveopt::load_config(config_path);
    const auto selected = select_scenarios(cfg, scenario_filter);
    const std::string out = default_out_dir(cfg, out_dir);

    if (run->parsed()) {
      for (const auto* sc : selected) {
        const reserveopt::ScenarioResult res = reserveopt::run_scenario(*sc);
        if (res.surface.grid_warning)
          std::cerr << "warning: scenario '" << sc->name
                    << "': payoff mass near the grid edge; consider a wider x grid\n";
        reserveopt::write_artifacts(out, *sc, res);
        std::cout << sc->name << ": value(t=0, x=0, mid) = "
                  << reserveopt::fmt_double(res.surface.undeflated(
                         0, res.calibration.tech.mid(), sc->grid.n_points / 2))
                  << "\n";
      }
      return 0;
    }

    if (validate->parsed()) {
      nlohmann::json report = nlohmann::json::array();
      bool all_pass = true;
      for (const auto* sc : selected) {
        nlohmann::json j = reserveopt::validate_scenario(*sc);
        all_pass &= j.at("pass").get<bool>();
        std::cout << sc->name << ": " << (j.at("pass").get<bool>() ? "pass" : "FAIL") << "\n";
        report.push_back(std::move(j));
      }
      std::filesystem::create_directories(out);
      std::ofstream f(out + "/validation_report.json", std::ios::binary);
      f << report.dump(2) << '\n';
      return all_pass ? 0 : 1;
    }

    // calibrate
    nlohmann::json report = nlohmann::json::array();
    for (const auto* sc : selected) {
      const reserveopt::Calibration cal = reserveopt::resolve_calibration(*sc);
      report.push_back(reserveopt::calibration_report(*sc, cal));
    }
    std::cout << report.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
