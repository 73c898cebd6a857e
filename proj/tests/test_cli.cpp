#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "reserveopt/engine.hpp"

using namespace reserveopt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("reserveopt_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string("\"") + RESERVEOPT_CLI + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc < 0 ? rc : WEXITSTATUS(rc);
}

// Small, fast configuration exercised through the CLI: one calibrated and one
// frozen-chain scenario on a coarse grid.
nlohmann::json tiny_config() {
  nlohmann::json market = {
      {"kappa", 0.5}, {"theta", 4.6051701859880914}, {"sigma", 0.5}, {"rho", 0.05}};
  nlohmann::json extraction = {{"alpha", 1.0}, {"beta", 0.05}, {"gamma", 0.9},
                               {"epsilon", 2.0}, {"running_cost", 20.0}};
  nlohmann::json costs = {{"c0", 578.0}, {"c1", 0.7}};
  nlohmann::json prior = {{"mu", 10.0},      {"sigma0_sq", 2.25}, {"sigmaTp_sq", 1.875},
                          {"t_prime", 2.0},  {"m", 9},            {"n_sigmas", 4.0}};
  nlohmann::json grid = {{"x_half_width", 3.0}, {"n_points", 256}, {"t_max", 2.0},
                         {"n_steps", 16},       {"quadrature_points", 32}};
  nlohmann::json output = {{"surface_time_stride", 4},
                           {"surface_x_stride", 16},
                           {"learning_times", {0.0, 2.0}}};
  nlohmann::json tiny_a = {{"name", "tiny_learning"}, {"market", market},
                           {"extraction", extraction}, {"costs", costs},
                           {"prior", prior},           {"learning", "calibrated"},
                           {"grid", grid},             {"output", output}};
  nlohmann::json tiny_b = tiny_a;
  tiny_b["name"] = "tiny_frozen";
  tiny_b["learning"] = "none";
  return {{"output_dir", "out"}, {"scenarios", {tiny_a, tiny_b}}};
}

fs::path write_tiny_config(const fs::path& dir) {
  const fs::path path = dir / "tiny.json";
  std::ofstream out(path, std::ios::binary);
  out << tiny_config().dump(2) << '\n';
  return path;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

TEST_CASE("load_config: shipped configuration parses with all six scenarios") {
  const RunConfig cfg = load_config(RESERVEOPT_CONFIG);
  REQUIRE(cfg.scenarios.size() == 6);
  const std::vector<std::string> expected = {
      "slow_learning_costs", "slow_learning_nocosts", "fast_learning_costs",
      "fast_learning_nocosts", "no_learning_costs",   "no_learning_nocosts"};
  for (size_t i = 0; i < expected.size(); ++i) CHECK(cfg.scenarios[i].name == expected[i]);

  const ScenarioConfig& sc = cfg.scenarios[0];
  CHECK(sc.market.kappa == 0.5);
  CHECK(sc.market.theta == doctest::Approx(std::log(100.0)).epsilon(1e-15));
  CHECK(sc.plan.c == 20.0);
  CHECK(sc.costs.c0 == 578.0);
  REQUIRE(sc.prior.has_value());
  CHECK(sc.prior->m == 31);
  CHECK(sc.prior->sigmaTp_sq == 1.875);
  CHECK(cfg.scenarios[2].prior->sigmaTp_sq == 0.75);
  CHECK_FALSE(sc.no_learning);
  CHECK(cfg.scenarios[4].no_learning);
  CHECK(sc.grid.n_points == 4096);
  CHECK(sc.grid.exercise_dates.size() == 256);
  CHECK(sc.grid.exercise_dates.back() == 5.0);
  CHECK(cfg.scenarios[1].plan.c == 0.0);
}

TEST_CASE("load_config: rejects malformed inputs with descriptive errors") {
  const fs::path dir = fresh_dir("badcfg");

  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), std::runtime_error);

  {
    std::ofstream out(dir / "garbage.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config((dir / "garbage.json").string()), std::runtime_error);

  nlohmann::json dup = tiny_config();
  dup["scenarios"][1]["name"] = "tiny_learning";
  {
    std::ofstream out(dir / "dup.json");
    out << dup.dump();
  }
  CHECK_THROWS_AS(load_config((dir / "dup.json").string()), std::runtime_error);

  nlohmann::json missing = tiny_config();
  missing["scenarios"][0]["market"].erase("sigma");
  {
    std::ofstream out(dir / "missing_field.json");
    out << missing.dump();
  }
  CHECK_THROWS_AS(load_config((dir / "missing_field.json").string()), std::runtime_error);

  fs::remove_all(dir);
}

TEST_CASE("cli: unknown scenario and bad usage exit nonzero") {
  const fs::path dir = fresh_dir("cliusage");
  const fs::path cfg = write_tiny_config(dir);
  CHECK(run_cli("run --config " + cfg.string() + " --scenario nonsense --out " +
                (dir / "out").string()) != 0);
  CHECK(run_cli("run") != 0);                                // missing --config
  CHECK(run_cli("--config " + cfg.string()) != 0);           // missing subcommand
  CHECK(run_cli("run --config " + (dir / "absent.json").string()) != 0);
  fs::remove_all(dir);
}

TEST_CASE("cli: run writes the full artifact set and reruns are byte-identical") {
  const fs::path dir = fresh_dir("clirun");
  const fs::path cfg = write_tiny_config(dir);
  const fs::path out1 = dir / "out1", out2 = dir / "out2";

  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out1.string()) == 0);
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out2.string()) == 0);

  size_t n_files = 0;
  for (const std::string scen : {"tiny_learning", "tiny_frozen"})
    for (const std::string suffix :
         {"_boundary.csv", "_surface.csv", "_learning.csv", "_calibration.json"}) {
      const fs::path f1 = out1 / (scen + suffix), f2 = out2 / (scen + suffix);
      REQUIRE(fs::exists(f1));
      REQUIRE(fs::exists(f2));
      CHECK(fs::file_size(f1) > 0);
      CHECK(slurp(f1) == slurp(f2));
      ++n_files;
    }
  CHECK(n_files == 8);
  fs::remove_all(dir);
}

TEST_CASE("cli: scenario filter runs only the requested scenario") {
  const fs::path dir = fresh_dir("clifilter");
  const fs::path cfg = write_tiny_config(dir);
  const fs::path out = dir / "out";
  REQUIRE(run_cli("run --config " + cfg.string() + " --scenario tiny_frozen --out " +
                  out.string()) == 0);
  CHECK(fs::exists(out / "tiny_frozen_boundary.csv"));
  CHECK_FALSE(fs::exists(out / "tiny_learning_boundary.csv"));
  fs::remove_all(dir);
}

TEST_CASE("cli: CSV artifacts round-trip against the in-process results") {
  const fs::path dir = fresh_dir("cliroundtrip");
  const fs::path cfg_path = write_tiny_config(dir);
  const fs::path out = dir / "out";
  REQUIRE(run_cli("run --config " + cfg_path.string() + " --out " + out.string()) == 0);

  const RunConfig cfg = load_config(cfg_path.string());
  const ScenarioConfig& sc = cfg.scenarios[0];
  const ScenarioResult res = run_scenario(sc);
  const int m = res.calibration.tech.size();
  const int n_dates = static_cast<int>(sc.grid.exercise_dates.size());

  const auto bound = read_csv(out / "tiny_learning_boundary.csv");
  REQUIRE(static_cast<int>(bound.size()) == 1 + (n_dates - 1) * m);
  CHECK(bound[0][0] == "scenario");
  for (size_t r = 1; r < bound.size(); ++r) {
    const auto& row = bound[r];
    REQUIRE(row.size() == 5);
    const int d = 1 + static_cast<int>(r - 1) / m;
    const int j = static_cast<int>(r - 1) % m;
    CHECK(row[0] == "tiny_learning");
    CHECK(std::strtod(row[1].c_str(), nullptr) == res.boundary.times[d]);
    CHECK(std::stoi(row[2]) == j);
    CHECK(std::strtod(row[3].c_str(), nullptr) == res.calibration.tech.volumes[j]);
    const BoundaryPoint& bp = res.boundary.entries[d][j];
    if (bp.present)
      CHECK(std::strtod(row[4].c_str(), nullptr) == bp.spot);
    else
      CHECK(row[4].empty());
  }

  const auto learn = read_csv(out / "tiny_learning_learning.csv");
  REQUIRE(learn.size() == 1 + 2 * static_cast<size_t>(m));
  const ChainPropagator prop(res.calibration.tech.generator);
  for (size_t r = 1; r < learn.size(); ++r) {
    const double t = std::strtod(learn[r][0].c_str(), nullptr);
    const int k = std::stoi(learn[r][1]);
    const Eigen::VectorXd row =
        limit_transition(t, res.calibration.tech, prop).row(res.calibration.tech.mid());
    CHECK(std::strtod(learn[r][2].c_str(), nullptr) == row[k]);
  }

  const auto surf = read_csv(out / "tiny_learning_surface.csv");
  REQUIRE(surf.size() > 1);
  CHECK(surf[0][5] == "value_undeflated");
  for (size_t r = 1; r < surf.size(); r += 97) {
    const auto& row = surf[r];
    const double t = std::strtod(row[1].c_str(), nullptr);
    const int j = std::stoi(row[2]);
    const double x = std::strtod(row[3].c_str(), nullptr);
    int d = -1, i = -1;
    for (int k = 0; k < n_dates; ++k)
      if (res.surface.times[k] == t) d = k;
    for (int k = 0; k < sc.grid.n_points; ++k)
      if (res.surface.x_grid[k] == x) i = k;
    REQUIRE(d >= 0);
    REQUIRE(i >= 0);
    CHECK(std::strtod(row[4].c_str(), nullptr) == std::exp(sc.market.theta + x));
    CHECK(std::strtod(row[5].c_str(), nullptr) == res.surface.undeflated(d, j, i));
  }
  fs::remove_all(dir);
}

TEST_CASE("cli: calibrate subcommand prints a parseable report") {
  const fs::path dir = fresh_dir("clical");
  const fs::path cfg = write_tiny_config(dir);
  const fs::path json_out = dir / "cal.json";
  const std::string cmd = std::string("\"") + RESERVEOPT_CLI + "\" calibrate --config " +
                          cfg.string() + " --scenario tiny_learning > " +
                          json_out.string() + " 2> /dev/null";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);

  std::ifstream in(json_out);
  nlohmann::json report;
  in >> report;
  REQUIRE(report.is_array());
  REQUIRE(report.size() == 1);
  CHECK(report[0].at("scenario") == "tiny_learning");
  CHECK(report[0].at("learn_b").get<double>() > 0.0);
  CHECK(report[0].at("invariant_residual").get<double>() < 1e-10);
  CHECK(report[0].at("conditional_variance_t0").get<double>() ==
        doctest::Approx(2.25).epsilon(1e-8));
  CHECK(report[0].at("conditional_variance_horizon").get<double>() ==
        doctest::Approx(1.875).epsilon(1e-8));
  fs::remove_all(dir);
}

TEST_CASE("validate_scenario: single-regime oracle checks pass end to end") {
  ScenarioConfig sc;
  sc.name = "single_regime";
  sc.market = {0.5, std::log(100.0), 0.5, 0.05};
  sc.plan = {1.0, 0.05, 0.9, 2.0, 20.0};
  sc.costs = {578.0, 0.7};
  TechnicalModel tech;
  tech.volumes = Eigen::VectorXd::Constant(1, 10.0);
  tech.generator = Eigen::MatrixXd::Zero(1, 1);
  tech.learn_a = 1.0;
  tech.learn_b = 0.0;
  sc.technical = tech;
  sc.grid.x_half_width = 3.0;
  sc.grid.n_points = 1024;
  sc.grid.exercise_dates.resize(33);
  for (int i = 0; i <= 32; ++i) sc.grid.exercise_dates[i] = i * 2.0 / 32.0;
  sc.validation.n_paths = 100000;
  sc.validation.lattice_points = 801;
  sc.validation.lattice_substeps = 4;

  const nlohmann::json j = validate_scenario(sc);
  CHECK(j.at("dcf").at("pass").get<bool>());
  CHECK(j.at("european").at("pass").get<bool>());
  CHECK(j.at("bermudan").at("pass").get<bool>());
  CHECK(j.at("pass").get<bool>());
}

TEST_CASE("negative control: a corrupted propagator exponent trips the MC oracle") {
  const RunConfig cfg = load_config(RESERVEOPT_CONFIG);
  ScenarioConfig sc = cfg.scenarios[0];
  GridSpec coarse = sc.grid;
  coarse.n_points = 512;
  coarse.exercise_dates.assign(17, 0.0);
  for (int i = 0; i <= 16; ++i) coarse.exercise_dates[i] = i * 2.0 / 16.0;

  const Calibration cal = calibrate_technical(*sc.prior, false);
  SolveOptions opt;
  opt.exercise_mask.assign(17, 0);
  opt.exercise_mask.back() = 1;
  opt.debug_negate_exponent = true;
  const ValueSurface bad = solve(sc.market, sc.plan, sc.costs, cal.tech, coarse, opt);
  const int mid = cal.tech.mid();
  const double fst_bad = bad.values[0](mid, coarse.n_points / 2);

  SimConfig sim{100000, 1.0, 20260823};
  const McEstimate mc =
      european_mc(sc.market, sc.plan, sc.costs, cal.tech, coarse, sim)[mid];
  // NaN-safe phrasing: the corrupted value must NOT sit inside the band
  CHECK_FALSE(std::abs(fst_bad - mc.mean) <= 3.0 * mc.std_error);
}
