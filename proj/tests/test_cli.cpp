// End-to-end tests of the command-line harness: each case drives the real
// binary (path in OTOC_CLI_PATH) through a config file and inspects exit
// codes and output files.

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "otoc/dynamics.hpp"
#include "otoc/exact_otoc.hpp"
#include "otoc/qlinalg.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace otoc;

namespace {

std::string cli_path() {
  const char* path = std::getenv("OTOC_CLI_PATH");
  REQUIRE(path != nullptr);
  return std::string(path);
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("otoc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

RunResult run_cli(const fs::path& dir, const std::string& args) {
  std::string command = "cd '" + dir.string() + "' && '" + cli_path() +
                        "' " + args + " > stdout.txt 2> stderr.txt";
  int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_file(dir / "stdout.txt");
  result.err = read_file(dir / "stderr.txt");
  return result;
}

void write_config(const fs::path& path, const json& cfg) {
  std::ofstream out(path);
  out << cfg.dump(2) << "\n";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find("\r\n", pos);
    REQUIRE(eol != std::string::npos);
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 2;
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(field);
        field.clear();
      } else {
        field += c;
      }
    }
    fields.push_back(field);
    rows.push_back(fields);
  }
  return rows;
}

} // namespace

TEST_CASE("exact-curve emits oracle values with the full header") {
  fs::path dir = fresh_dir("exact_curve");
  json cfg = {{"n", 4},
              {"w", "ZIII"},
              {"v", "IIIZ"},
              {"t_grid", {0.0, 1.0, 2.5}}};
  write_config(dir / "cfg.json", cfg);
  RunResult run = run_cli(dir, "exact-curve --config cfg.json --out data");
  REQUIRE(run.exit_code == 0);

  auto rows = parse_csv(read_file(dir / "data" / "exact_curve.csv"));
  REQUIRE(rows.size() == 4);
  REQUIRE(rows[0] == std::vector<std::string>{"t", "C4", "C8", "C12", "L8",
                                              "schatten_2", "schatten_4"});

  HamiltonianSpectrum spec = ising_spectrum(4, IsingParams::defaults());
  PauliString w("ZIII");
  PauliString v("IIIZ");
  std::vector<double> grid{0.0, 1.0, 2.5};
  for (size_t i = 0; i < grid.size(); ++i) {
    const auto& row = rows[i + 1];
    CHECK(std::abs(std::stod(row[0]) - grid[i]) < 1e-15);
    CHECK(std::abs(std::stod(row[1]) -
                   otoc_4k(spec, grid[i], w, v, 1).real()) < 1e-9);
    CHECK(std::abs(std::stod(row[3]) -
                   otoc_4k(spec, grid[i], w, v, 3).real()) < 1e-9);
    double c4 = std::stod(row[1]);
    double c8 = std::stod(row[2]);
    double l8 = std::stod(row[4]);
    CHECK(std::abs(c8 - (l8 - 4.0 * c4 - 3.0)) < 1e-9);
  }
  CHECK(std::abs(std::stod(rows[1][1]) - 1.0) < 1e-9);
}

TEST_CASE("shadow-run tracks the exact value within three standard errors") {
  fs::path dir = fresh_dir("shadow_run");
  json cfg = {{"protocol", "mixed"},
              {"n", 2},
              {"t_grid", {0.0, 0.6}},
              {"quantity", "l8"},
              {"w", "ZI"},
              {"num_snapshots", 150},
              {"repetitions", 25},
              {"mode", "exhaustive"},
              {"seed", 21}};
  write_config(dir / "cfg.json", cfg);
  RunResult run = run_cli(dir, "shadow-run --config cfg.json --out data");
  REQUIRE(run.exit_code == 0);

  json report = json::parse(read_file(dir / "data" / "shadow_run.json"));
  REQUIRE(report.at("rows").size() == 2);
  for (const json& row : report.at("rows")) {
    double gap = std::abs(row.at("estimator_mean").get<double>() -
                          row.at("exact").get<double>());
    CHECK(gap < 3.0 * row.at("estimator_se").get<double>() + 1e-12);
  }

  auto rows = parse_csv(read_file(dir / "data" / "shadow_run.csv"));
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[0] == std::vector<std::string>{"t", "exact", "estimator_mean",
                                              "estimator_se", "repetitions"});
}

TEST_CASE("single-bell and multi-bell runs track their exact columns") {
  for (const std::string& protocol : {std::string("single_bell"),
                                      std::string("multi_bell")}) {
    fs::path dir = fresh_dir("shadow_" + protocol);
    json cfg = {{"protocol", protocol},
                {"n", 2},
                {"t_grid", {0.0, 1.0}},
                {"quantity", "c4"},
                {"num_snapshots", 150},
                {"repetitions", 20},
                {"mode", "exhaustive"},
                {"seed", 57}};
    if (protocol == "multi_bell") {
      cfg["w"] = "ZI";
      cfg["v"] = "IX";
    }
    write_config(dir / "cfg.json", cfg);
    RunResult run = run_cli(dir, "shadow-run --config cfg.json --out data");
    REQUIRE(run.exit_code == 0);
    json report = json::parse(read_file(dir / "data" / "shadow_run.json"));
    HamiltonianSpectrum spec = ising_spectrum(2, IsingParams::defaults());
    for (const json& row : report.at("rows")) {
      double t = row.at("t").get<double>();
      // Both configurations here target the same correlator: the multi-Bell
      // probes are W = Z on site 1 and V = X on site 2, and the single-Bell
      // protocol pins exactly that W/V pair at n = 2.
      double exact =
          otoc_4k(spec, t, PauliString("ZI"), PauliString("IX"), 1).real();
      CHECK(std::abs(row.at("exact").get<double>() - exact) < 1e-9);
      double gap = std::abs(row.at("estimator_mean").get<double>() - exact);
      CHECK(gap < 3.0 * row.at("estimator_se").get<double>() + 1e-12);
    }
  }
}

TEST_CASE("shadow-run supports subsampled estimation") {
  fs::path dir = fresh_dir("shadow_sub");
  json cfg = {{"protocol", "mixed"},
              {"n", 2},
              {"t_grid", {0.8}},
              {"quantity", "c4"},
              {"w", "ZI"},
              {"num_snapshots", 60},
              {"repetitions", 6},
              {"mode", "subsampled"},
              {"num_draws", 500},
              {"seed", 33}};
  write_config(dir / "cfg.json", cfg);
  RunResult run = run_cli(dir, "shadow-run --config cfg.json --out data");
  REQUIRE(run.exit_code == 0);
  json report = json::parse(read_file(dir / "data" / "shadow_run.json"));
  CHECK(report.at("num_draws").get<int>() == 500);
  CHECK(report.at("mode").get<std::string>() == "subsampled");
  double mean = report.at("rows")[0].at("estimator_mean").get<double>();
  CHECK(std::isfinite(mean));
}

TEST_CASE("commutator shadow-run drives paired shadows") {
  fs::path dir = fresh_dir("shadow_ct");
  json cfg = {{"protocol", "commutator"},
              {"n", 2},
              {"t_grid", {0.9}},
              {"quantity", "ct"},
              {"num_snapshots", 60},
              {"repetitions", 12},
              {"mode", "exhaustive"},
              {"seed", 44}};
  write_config(dir / "cfg.json", cfg);
  RunResult run = run_cli(dir, "shadow-run --config cfg.json --out data");
  REQUIRE(run.exit_code == 0);

  json report = json::parse(read_file(dir / "data" / "shadow_run.json"));
  const json& row = report.at("rows")[0];
  HamiltonianSpectrum spec = ising_spectrum(2, IsingParams::defaults());
  double exact = commutator_type_correlator(2, spec, 0.9).real();
  CHECK(std::abs(row.at("exact").get<double>() - exact) < 1e-9);
  double gap = std::abs(row.at("estimator_mean").get<double>() - exact);
  CHECK(gap < 3.0 * row.at("estimator_se").get<double>() + 1e-12);
}

TEST_CASE("outputs are byte-identical across reruns and thread counts") {
  json cfg = {{"protocol", "multi_bell"},
              {"n", 2},
              {"t_grid", {0.0, 0.7}},
              {"quantity", "c4"},
              {"w", "ZI"},
              {"v", "IX"},
              {"num_snapshots", 40},
              {"repetitions", 5},
              {"mode", "exhaustive"},
              {"seed", 99}};
  fs::path dir_a = fresh_dir("repro_a");
  fs::path dir_b = fresh_dir("repro_b");
  write_config(dir_a / "cfg.json", cfg);
  write_config(dir_b / "cfg.json", cfg);
  RunResult a = run_cli(
      dir_a, "shadow-run --config cfg.json --out data --threads 1");
  RunResult b = run_cli(
      dir_b, "shadow-run --config cfg.json --out data --threads 4");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(read_file(dir_a / "data" / "shadow_run.csv") ==
        read_file(dir_b / "data" / "shadow_run.csv"));
  CHECK(read_file(dir_a / "data" / "shadow_run.json") ==
        read_file(dir_b / "data" / "shadow_run.json"));

  json global_cfg = {{"n", 2},
                     {"t_grid", {0.0, 2.0}},
                     {"w", "ZI"},
                     {"v", "IZ"},
                     {"num_unitaries", 400},
                     {"shots_per_expectation", 100},
                     {"seed", 7}};
  fs::path dir_c = fresh_dir("repro_c");
  fs::path dir_d = fresh_dir("repro_d");
  write_config(dir_c / "cfg.json", global_cfg);
  write_config(dir_d / "cfg.json", global_cfg);
  RunResult c = run_cli(
      dir_c, "global-run --config cfg.json --out data --threads 1");
  RunResult d = run_cli(
      dir_d, "global-run --config cfg.json --out data --threads 8");
  REQUIRE(c.exit_code == 0);
  REQUIRE(d.exit_code == 0);
  CHECK(read_file(dir_c / "data" / "global_run.csv") ==
        read_file(dir_d / "data" / "global_run.csv"));
  CHECK(read_file(dir_c / "data" / "global_records.csv") ==
        read_file(dir_d / "data" / "global_records.csv"));
}

TEST_CASE("the seed flag overrides the config seed") {
  json cfg = {{"protocol", "mixed"},
              {"n", 2},
              {"t_grid", {0.5}},
              {"quantity", "c4"},
              {"w", "ZI"},
              {"num_snapshots", 30},
              {"repetitions", 4},
              {"mode", "exhaustive"},
              {"seed", 11}};
  fs::path dir_a = fresh_dir("seed_a");
  fs::path dir_b = fresh_dir("seed_b");
  fs::path dir_c = fresh_dir("seed_c");
  write_config(dir_a / "cfg.json", cfg);
  write_config(dir_b / "cfg.json", cfg);
  write_config(dir_c / "cfg.json", cfg);
  RunResult a = run_cli(dir_a, "shadow-run --config cfg.json --out data");
  RunResult b = run_cli(
      dir_b, "shadow-run --config cfg.json --out data --seed 11");
  RunResult c = run_cli(
      dir_c, "shadow-run --config cfg.json --out data --seed 12");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  REQUIRE(c.exit_code == 0);
  std::string csv_a = read_file(dir_a / "data" / "shadow_run.csv");
  CHECK(csv_a == read_file(dir_b / "data" / "shadow_run.csv"));
  CHECK(csv_a != read_file(dir_c / "data" / "shadow_run.csv"));
}

TEST_CASE("global-run with finite shots dumps per-unitary records") {
  fs::path dir = fresh_dir("global_shots");
  json cfg = {{"n", 2},
              {"t_grid", {0.5}},
              {"w", "ZI"},
              {"v", "IZ"},
              {"num_unitaries", 50},
              {"shots_per_expectation", 200},
              {"seed", 13}};
  write_config(dir / "cfg.json", cfg);
  RunResult run = run_cli(dir, "global-run --config cfg.json --out data");
  REQUIRE(run.exit_code == 0);
  auto records = parse_csv(read_file(dir / "data" / "global_records.csv"));
  REQUIRE(records.size() == 51);
  REQUIRE(records[0] ==
          std::vector<std::string>{"t", "unitary_index", "x", "y"});
  for (size_t i = 1; i < records.size(); ++i) {
    double x = std::stod(records[i][2]);
    CHECK(x >= -1.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("identity suite passes by default and fails when perturbed") {
  fs::path dir = fresh_dir("identities");
  write_config(dir / "cfg.json", json{{"seed", 5}});
  RunResult run = run_cli(dir,
                          "verify-identities --config cfg.json --out data");
  REQUIRE(run.exit_code == 0);
  json report = json::parse(read_file(dir / "data" / "verify_identities.json"));
  CHECK(report.at("all_pass").get<bool>());
  const json& entries = report.at("identities");
  REQUIRE(entries.size() == 8);
  std::vector<std::string> names;
  for (const json& entry : entries) {
    names.push_back(entry.at("name").get<std::string>());
    CHECK(entry.at("pass").get<bool>());
    CHECK(entry.at("residual").get<double>() <
          entry.at("tolerance").get<double>());
  }
  std::vector<std::string> sorted_names = names;
  std::sort(sorted_names.begin(), sorted_names.end());
  CHECK(std::adjacent_find(sorted_names.begin(), sorted_names.end()) ==
        sorted_names.end());

  fs::path dir_bad = fresh_dir("identities_bad");
  write_config(dir_bad / "cfg.json",
               json{{"seed", 5}, {"perturb", "derangement_moment_weingarten"}});
  RunResult bad = run_cli(dir_bad,
                          "verify-identities --config cfg.json --out data");
  CHECK(bad.exit_code == 2);
  json bad_report =
      json::parse(read_file(dir_bad / "data" / "verify_identities.json"));
  CHECK_FALSE(bad_report.at("all_pass").get<bool>());
  int failed = 0;
  for (const json& entry : bad_report.at("identities")) {
    if (!entry.at("pass").get<bool>()) {
      failed += 1;
      CHECK(entry.at("name").get<std::string>() == "derangement_moment_weingarten");
    }
  }
  CHECK(failed == 1);

  fs::path dir_unknown = fresh_dir("identities_unknown");
  write_config(dir_unknown / "cfg.json",
               json{{"perturb", "no_such_identity"}});
  RunResult unknown = run_cli(
      dir_unknown, "verify-identities --config cfg.json --out data");
  CHECK(unknown.exit_code == 1);
}

TEST_CASE("variance audit passes and its report round-trips") {
  fs::path dir = fresh_dir("variance_audit");
  json cfg = {{"seed", 9},
              {"pair_variance_samples", 20000},
              {"c4_shadows", 120},
              {"l8_shadows", 60},
              {"chebyshev_trials", 40}};
  write_config(dir / "cfg.json", cfg);
  RunResult run = run_cli(dir, "variance-audit --config cfg.json --out data");
  REQUIRE(run.exit_code == 0);

  std::string raw = read_file(dir / "data" / "variance_audit.json");
  json report = json::parse(raw);
  CHECK(report.at("all_pass").get<bool>());
  REQUIRE(report.at("audits").size() == 5);
  for (const json& audit : report.at("audits")) {
    CHECK(audit.contains("bound_name"));
    CHECK(audit.contains("params"));
    CHECK(audit.at("empirical").get<double>() <=
          audit.at("bound").get<double>());
    CHECK(audit.at("pass").get<bool>());
  }
  CHECK(json::parse(report.dump()) == report);
}

TEST_CASE("config validation failures exit with code one") {
  fs::path dir = fresh_dir("bad_configs");

  write_config(dir / "unknown.json", json{{"n", 2},
                                          {"w", "ZI"},
                                          {"v", "IZ"},
                                          {"t_grid", {0.0, 1.0}},
                                          {"bogus", 1}});
  RunResult unknown = run_cli(dir,
                              "exact-curve --config unknown.json --out data");
  CHECK(unknown.exit_code == 1);
  CHECK(unknown.err.find("unknown config key") != std::string::npos);

  write_config(dir / "missing.json", json{{"n", 2}, {"w", "ZI"}});
  CHECK(run_cli(dir, "exact-curve --config missing.json --out data")
            .exit_code == 1);

  write_config(dir / "grid.json", json{{"n", 2},
                                       {"w", "ZI"},
                                       {"v", "IZ"},
                                       {"t_grid", {1.0, 0.5}}});
  CHECK(run_cli(dir, "exact-curve --config grid.json --out data").exit_code ==
        1);

  json mixed_v = {{"protocol", "mixed"},  {"n", 2},
                  {"t_grid", {0.5}},      {"quantity", "c4"},
                  {"w", "ZI"},            {"v", "IZ"},
                  {"num_snapshots", 30},  {"repetitions", 4},
                  {"mode", "exhaustive"}};
  write_config(dir / "mixed_v.json", mixed_v);
  CHECK(run_cli(dir, "shadow-run --config mixed_v.json --out data")
            .exit_code == 1);

  json no_draws = mixed_v;
  no_draws.erase("v");
  no_draws["mode"] = "subsampled";
  write_config(dir / "no_draws.json", no_draws);
  CHECK(run_cli(dir, "shadow-run --config no_draws.json --out data")
            .exit_code == 1);

  write_config(dir / "shots.json", json{{"n", 2},
                                        {"t_grid", {0.5}},
                                        {"w", "ZI"},
                                        {"v", "IZ"},
                                        {"num_unitaries", 10},
                                        {"shots_per_expectation", "nope"}});
  CHECK(run_cli(dir, "global-run --config shots.json --out data").exit_code ==
        1);

  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run_cli(dir, "exact-curve --config broken.json --out data")
            .exit_code == 1);

  CHECK(run_cli(dir, "exact-curve --config does_not_exist.json --out data")
            .exit_code == 1);
}

TEST_CASE("top-level usage errors are reported") {
  fs::path dir = fresh_dir("usage");
  CHECK(run_cli(dir, "--help").exit_code == 0);
  CHECK(run_cli(dir, "").exit_code == 1);
  CHECK(run_cli(dir, "frobnicate --config x.json").exit_code == 1);
  CHECK(run_cli(dir, "exact-curve").exit_code == 1);
}
