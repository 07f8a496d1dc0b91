// Command-line front end: reads a JSON experiment config, runs the requested
// command with fully seeded determinism, and writes CSV/JSON outputs.  Every
// command is a pure function of (config, seed); outputs are byte-identical
// across repeated runs and thread settings.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "otoc/dynamics.hpp"
#include "otoc/estimators.hpp"
#include "otoc/exact_otoc.hpp"
#include "otoc/global_protocol.hpp"
#include "otoc/qlinalg.hpp"
#include "otoc/rng.hpp"
#include "otoc/shadows.hpp"
#include "otoc/variance.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace otoc;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config parsing

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!cfg.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }
  return cfg;
}

void check_keys(const json& cfg, const std::set<std::string>& allowed,
                const std::vector<std::string>& required) {
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw ConfigError("unknown config key: " + it.key());
    }
  }
  for (const std::string& key : required) {
    if (!cfg.contains(key)) {
      throw ConfigError("missing config key: " + key);
    }
  }
}

int get_int(const json& cfg, const std::string& key, int fallback,
            int lo, int hi) {
  if (!cfg.contains(key)) {
    return fallback;
  }
  const json& v = cfg.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError("config key " + key + " must be an integer");
  }
  int64_t value = v.get<int64_t>();
  if (value < lo || value > hi) {
    throw ConfigError("config key " + key + " out of range");
  }
  return static_cast<int>(value);
}

uint64_t get_u64(const json& cfg, const std::string& key, uint64_t fallback) {
  if (!cfg.contains(key)) {
    return fallback;
  }
  const json& v = cfg.at(key);
  if (!(v.is_number_unsigned() || (v.is_number_integer() &&
                                   v.get<int64_t>() >= 0))) {
    throw ConfigError("config key " + key + " must be a nonnegative integer");
  }
  return v.get<uint64_t>();
}

std::string get_string(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (!v.is_string()) {
    throw ConfigError("config key " + key + " must be a string");
  }
  return v.get<std::string>();
}

std::vector<double> get_grid(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (!v.is_array() || v.empty()) {
    throw ConfigError("config key " + key + " must be a nonempty array");
  }
  std::vector<double> grid;
  for (const json& entry : v) {
    if (!entry.is_number()) {
      throw ConfigError("config key " + key + " must contain numbers only");
    }
    grid.push_back(entry.get<double>());
  }
  for (size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw ConfigError("config key " + key + " must be strictly increasing");
    }
  }
  return grid;
}

PauliString get_pauli(const json& cfg, const std::string& key, int n) {
  std::string letters = get_string(cfg, key);
  if (static_cast<int>(letters.size()) != n) {
    throw ConfigError("config key " + key + " must have exactly " +
                      std::to_string(n) + " letters");
  }
  try {
    return PauliString(letters);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key " + key + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Output helpers

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::string csv_field(const std::string& raw) {
  if (raw.find_first_of(",\"\r\n") == std::string::npos) {
    return raw;
  }
  std::string quoted = "\"";
  for (char c : raw) {
    quoted += c;
    if (c == '"') {
      quoted += '"';
    }
  }
  quoted += '"';
  return quoted;
}

void append_csv_row(std::string& out, const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) {
      out += ',';
    }
    out += csv_field(fields[i]);
  }
  out += "\r\n";
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write output file: " + path.string());
  }
  out << content;
  std::cout << "wrote " << path.string() << "\n";
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& values) {
  double n = static_cast<double>(values.size());
  MeanSe out;
  for (double v : values) {
    out.mean += v;
  }
  out.mean /= n;
  double acc = 0.0;
  for (double v : values) {
    acc += (v - out.mean) * (v - out.mean);
  }
  out.se = std::sqrt(acc / (n - 1.0) / n);
  return out;
}

uint64_t shadow_seed(uint64_t seed, size_t t_index, int rep, int member) {
  return seed + uint64_t(t_index) * 1000000007ull +
         uint64_t(rep) * 2654435761ull + uint64_t(member);
}

// ---------------------------------------------------------------------------
// exact-curve

int cmd_exact_curve(const json& cfg, const fs::path& out_dir, uint64_t seed) {
  (void)seed;
  check_keys(cfg,
             {"n", "w", "v", "t_grid", "seed", "output_path", "threads"},
             {"n", "w", "v", "t_grid"});
  int n = get_int(cfg, "n", 0, 2, 10);
  PauliString w = get_pauli(cfg, "w", n);
  PauliString v = get_pauli(cfg, "v", n);
  std::vector<double> grid = get_grid(cfg, "t_grid");

  HamiltonianSpectrum spec = ising_spectrum(n, IsingParams::defaults());
  std::string csv;
  append_csv_row(csv, {"t", "C4", "C8", "C12", "L8", "schatten_2",
                       "schatten_4"});
  for (double t : grid) {
    double c4 = otoc_4k(spec, t, w, v, 1).real();
    double c8 = otoc_4k(spec, t, w, v, 2).real();
    double c12 = otoc_4k(spec, t, w, v, 3).real();
    double l8 = leading_term_L8(n, spec, t);
    double s2 = commutator_schatten_norm(spec, t, w, v, 1);
    double s4 = commutator_schatten_norm(spec, t, w, v, 2);
    append_csv_row(csv, {format_double(t), format_double(c4),
                         format_double(c8), format_double(c12),
                         format_double(l8), format_double(s2),
                         format_double(s4)});
  }
  write_file(out_dir / "exact_curve.csv", csv);
  return 0;
}

// ---------------------------------------------------------------------------
// shadow-run

double exact_l8_mixed(int n, const HamiltonianSpectrum& spec, double t,
                      const PauliString& w) {
  cmat rw = prepare_mixed_protocol_state(n, spec, t) * pauli_matrix(w);
  cmat rw2 = rw * rw;
  double d = static_cast<double>(int64_t(1) << n);
  return (d * d * d * (rw2 * rw2).trace()).real();
}

int cmd_shadow_run(const json& cfg, const fs::path& out_dir, uint64_t seed) {
  check_keys(cfg,
             {"protocol", "n", "t_grid", "quantity", "num_snapshots",
              "repetitions", "mode", "w", "v", "num_draws", "seed",
              "output_path", "threads"},
             {"protocol", "n", "t_grid", "quantity", "num_snapshots",
              "repetitions", "mode"});
  std::string protocol = get_string(cfg, "protocol");
  if (protocol != "multi_bell" && protocol != "mixed" &&
      protocol != "single_bell" && protocol != "commutator") {
    throw ConfigError("protocol must be one of multi_bell, mixed, "
                      "single_bell, commutator");
  }
  int n = get_int(cfg, "n", 0, 2, 6);
  std::vector<double> grid = get_grid(cfg, "t_grid");
  std::string quantity = get_string(cfg, "quantity");
  int num_snapshots = get_int(cfg, "num_snapshots", 0, 2, 1000000);
  int repetitions = get_int(cfg, "repetitions", 0, 2, 1000000);
  std::string mode_name = get_string(cfg, "mode");
  if (mode_name != "exhaustive" && mode_name != "subsampled") {
    throw ConfigError("mode must be exhaustive or subsampled");
  }
  bool subsampled = mode_name == "subsampled";
  uint64_t num_draws = 0;
  if (subsampled) {
    if (!cfg.contains("num_draws")) {
      throw ConfigError("missing config key: num_draws");
    }
    num_draws = get_u64(cfg, "num_draws", 0);
    if (num_draws == 0) {
      throw ConfigError("num_draws must be positive");
    }
  } else if (cfg.contains("num_draws")) {
    throw ConfigError("num_draws only applies to subsampled mode");
  }

  // Per-protocol probe requirements.
  PauliString w;
  PauliString v;
  if (protocol == "multi_bell") {
    if (!cfg.contains("w") || !cfg.contains("v")) {
      throw ConfigError("multi_bell needs both w and v");
    }
    w = get_pauli(cfg, "w", n);
    v = get_pauli(cfg, "v", n);
  } else if (protocol == "mixed") {
    if (!cfg.contains("w")) {
      throw ConfigError("mixed needs w");
    }
    if (cfg.contains("v")) {
      throw ConfigError("mixed pins v to the state; drop the v key");
    }
    w = get_pauli(cfg, "w", n);
  } else {
    if (cfg.contains("w") || cfg.contains("v")) {
      throw ConfigError(protocol + " pins its probes; drop the w/v keys");
    }
  }

  int k = 0;
  if (protocol == "multi_bell") {
    if (quantity == "c4") {
      k = 1;
    } else if (quantity == "c8") {
      k = 2;
    } else if (quantity == "c12") {
      k = 3;
    } else {
      throw ConfigError("multi_bell quantity must be c4, c8, or c12");
    }
  } else if (protocol == "mixed") {
    if (quantity != "c4" && quantity != "c8" && quantity != "l8") {
      throw ConfigError("mixed quantity must be c4, c8, or l8");
    }
  } else if (protocol == "single_bell") {
    if (quantity == "c4") {
      k = 1;
    } else if (quantity == "c8") {
      k = 2;
    } else {
      throw ConfigError("single_bell quantity must be c4 or c8");
    }
  } else {
    if (quantity != "ct") {
      throw ConfigError("commutator quantity must be ct");
    }
    if (subsampled) {
      throw ConfigError("commutator estimation is always exhaustive");
    }
  }

  HamiltonianSpectrum spec = ising_spectrum(n, IsingParams::defaults());
  json rows = json::array();
  std::string csv;
  append_csv_row(csv, {"t", "exact", "estimator_mean", "estimator_se",
                       "repetitions"});
  for (size_t ti = 0; ti < grid.size(); ++ti) {
    double t = grid[ti];

    double exact = 0.0;
    if (protocol == "multi_bell") {
      exact = otoc_4k(spec, t, w, v, k).real();
    } else if (protocol == "mixed") {
      if (quantity == "l8") {
        exact = exact_l8_mixed(n, spec, t, w);
      } else {
        exact = otoc_4k(spec, t, w, PauliString::single(n, n, 'Z'),
                        quantity == "c4" ? 1 : 2)
                    .real();
      }
    } else if (protocol == "single_bell") {
      exact = otoc_4k(spec, t, PauliString::single(n, 1, 'Z'),
                      PauliString::single(n, n, 'X'), k)
                  .real();
    } else {
      exact = commutator_type_correlator(n, spec, t).real();
    }

    std::vector<StateVector> ensemble;
    std::vector<StateVector> ensemble_b;
    if (protocol == "multi_bell") {
      ensemble = {bell_dual_vector(n, spec, t)};
    } else if (protocol == "mixed") {
      ensemble = mixed_protocol_ensemble(n, spec, t);
    } else if (protocol == "single_bell") {
      ensemble = single_bell_ensemble(n, spec, t, n);
    } else {
      ensemble = single_bell_ensemble(n, spec, t, 1);
      ensemble_b = single_bell_ensemble(n, spec, t, n);
    }

    std::vector<double> estimates;
    estimates.reserve(static_cast<size_t>(repetitions));
    for (int rep = 0; rep < repetitions; ++rep) {
      uint64_t rep_seed = shadow_seed(seed, ti, rep, 0);
      EstimatorMode mode = subsampled
                               ? EstimatorMode::subsampled(num_draws, rep_seed)
                               : EstimatorMode::exhaustive_mode();
      if (protocol == "commutator") {
        Shadow a = build_shadow(ensemble, num_snapshots, rep_seed,
                                "single_bell", n, t);
        Shadow b = build_shadow(ensemble_b, num_snapshots,
                                shadow_seed(seed, ti, rep, 1), "single_bell",
                                n, t);
        estimates.push_back(estimate_commutator_type(a, b).value.real());
      } else if (protocol == "multi_bell") {
        Shadow shadow = build_shadow(ensemble, num_snapshots, rep_seed,
                                     protocol, n, t);
        estimates.push_back(
            estimate_c4k_multibell(shadow, w, v, k, mode).value.real());
      } else if (protocol == "mixed") {
        Shadow shadow = build_shadow(ensemble, num_snapshots, rep_seed,
                                     protocol, n, t);
        EstimatorResult result =
            quantity == "c4"   ? estimate_c4_mixed(shadow, w, mode)
            : quantity == "l8" ? estimate_L8_mixed(shadow, w, mode)
                               : estimate_c8_mixed(shadow, w, mode);
        estimates.push_back(result.value.real());
      } else {
        Shadow shadow = build_shadow(ensemble, num_snapshots, rep_seed,
                                     protocol, n, t);
        estimates.push_back(
            estimate_c4k_single_bell(shadow, k, mode).value.real());
      }
    }

    MeanSe stats = mean_se(estimates);
    rows.push_back({{"t", t},
                    {"exact", exact},
                    {"estimator_mean", stats.mean},
                    {"estimator_se", stats.se},
                    {"repetitions", repetitions}});
    append_csv_row(csv, {format_double(t), format_double(exact),
                         format_double(stats.mean), format_double(stats.se),
                         std::to_string(repetitions)});
  }

  json report = {{"protocol", protocol}, {"n", n},     {"quantity", quantity},
                 {"num_snapshots", num_snapshots},     {"repetitions",
                                                        repetitions},
                 {"mode", mode_name},   {"seed", seed}, {"rows", rows}};
  if (subsampled) {
    report["num_draws"] = num_draws;
  }
  write_file(out_dir / "shadow_run.csv", csv);
  write_file(out_dir / "shadow_run.json", report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// global-run

int cmd_global_run(const json& cfg, const fs::path& out_dir, uint64_t seed) {
  check_keys(cfg,
             {"n", "t_grid", "w", "v", "num_unitaries",
              "shots_per_expectation", "seed", "output_path", "threads"},
             {"n", "t_grid", "w", "v", "num_unitaries",
              "shots_per_expectation"});
  int n = get_int(cfg, "n", 0, 1, 8);
  std::vector<double> grid = get_grid(cfg, "t_grid");
  PauliString w = get_pauli(cfg, "w", n);
  PauliString v = get_pauli(cfg, "v", n);
  uint64_t num_unitaries = get_u64(cfg, "num_unitaries", 0);
  if (num_unitaries < 2) {
    throw ConfigError("num_unitaries must be at least 2");
  }
  uint64_t shots = 0;
  const json& shots_cfg = cfg.at("shots_per_expectation");
  if (shots_cfg.is_string()) {
    if (shots_cfg.get<std::string>() != "exact") {
      throw ConfigError("shots_per_expectation must be \"exact\" or a "
                        "positive integer");
    }
  } else {
    shots = get_u64(cfg, "shots_per_expectation", 0);
    if (shots == 0) {
      throw ConfigError("shots_per_expectation must be \"exact\" or a "
                        "positive integer");
    }
  }

  std::string summary;
  append_csv_row(summary, {"t", "c4_estimate", "c4_se", "c8_estimate",
                           "c8_se", "num_unitaries"});
  std::string records;
  append_csv_row(records, {"t", "unitary_index", "x", "y"});
  double d = static_cast<double>(int64_t(1) << n);
  for (size_t ti = 0; ti < grid.size(); ++ti) {
    GlobalRunConfig run;
    run.n_qubits = n;
    run.t = grid[ti];
    run.w = w;
    run.v = v;
    run.num_unitaries = num_unitaries;
    run.shots_per_expectation = shots;
    run.seed = seed + ti;
    GlobalRunResult result = run_global_protocol(run);

    std::vector<double> xy;
    std::vector<double> x2y2;
    xy.reserve(result.records.size());
    x2y2.reserve(result.records.size());
    for (size_t m = 0; m < result.records.size(); ++m) {
      const GlobalUnitaryRecord& r = result.records[m];
      xy.push_back(r.x * r.y);
      x2y2.push_back(r.x * r.x * r.y * r.y);
      append_csv_row(records, {format_double(grid[ti]), std::to_string(m),
                               format_double(r.x), format_double(r.y)});
    }
    double se_c4 = (d + 1.0) * mean_se(xy).se;
    double se_c8 = 0.5 * (d + 1.0) * (d + 2.0) * (d + 3.0) *
                       mean_se(x2y2).se +
                   2.0 * d * std::abs(result.c4_estimate) * se_c4;
    append_csv_row(summary,
                   {format_double(grid[ti]),
                    format_double(result.c4_estimate), format_double(se_c4),
                    format_double(result.c8_estimate), format_double(se_c8),
                    std::to_string(num_unitaries)});
  }
  write_file(out_dir / "global_run.csv", summary);
  write_file(out_dir / "global_records.csv", records);
  return 0;
}

// ---------------------------------------------------------------------------
// verify-identities

struct IdentityCheck {
  std::string name;
  double residual = 0.0;
  double tolerance = 1e-8;
};

int cmd_verify_identities(const json& cfg, const fs::path& out_dir,
                          uint64_t seed) {
  check_keys(cfg, {"seed", "output_path", "threads", "perturb"}, {});
  std::string perturb =
      cfg.contains("perturb") ? get_string(cfg, "perturb") : "";

  std::vector<IdentityCheck> checks;
  std::vector<double> t_probe{0.35, 1.2, 2.9};

  // Composition of the eight-point correlator from the mixed-protocol
  // leading term, C8 = L8 - 4 C4 - 3.
  {
    double residual = 0.0;
    for (int n : {2, 3}) {
      HamiltonianSpectrum spec = ising_spectrum(n, IsingParams::defaults());
      PauliString w = PauliString::single(n, 1, 'Z');
      PauliString v = PauliString::single(n, n, 'Z');
      for (double t : t_probe) {
        double c4 = otoc_4k(spec, t, w, v, 1).real();
        double c8 = otoc_4k(spec, t, w, v, 2).real();
        double l8 = leading_term_L8(n, spec, t);
        residual = std::max(residual, std::abs(c8 - (l8 - 4.0 * c4 - 3.0)));
      }
    }
    checks.push_back({"eight_point_composition", residual, 1e-8});
  }

  // The mixed-protocol state is proportional to a projector.
  {
    double residual = 0.0;
    for (int n : {2, 3}) {
      HamiltonianSpectrum spec = ising_spectrum(n, IsingParams::defaults());
      double d = static_cast<double>(int64_t(1) << n);
      for (double t : t_probe) {
        cmat rho = prepare_mixed_protocol_state(n, spec, t);
        residual = std::max(residual,
                            (rho * rho - (2.0 / d) * rho).norm());
      }
    }
    checks.push_back({"mixed_state_idempotence", residual, 1e-8});
  }

  // Permutation-operator traces equal cycle products.
  {
    RandomStream rng(seed, 101);
    double residual = 0.0;
    for (int k : {2, 3, 4}) {
      std::vector<cmat> ops;
      cmat blended = cmat::Identity(1, 1);
      for (int i = 0; i < k; ++i) {
        cmat g(2, 2);
        for (int r = 0; r < 2; ++r) {
          for (int c = 0; c < 2; ++c) {
            g(r, c) = cplx(rng.normal(), rng.normal());
          }
        }
        ops.push_back(g);
        blended = kron(blended, g);
      }
      for (const Permutation& sigma : all_permutations(k)) {
        cplx dense = (permutation_operator(sigma, 2) * blended).trace();
        cplx cyclic = trace_with_permutation(sigma, ops);
        residual = std::max(residual, std::abs(dense - cyclic));
      }
    }
    checks.push_back({"permutation_trace_cycles", residual, 1e-8});
  }

  // Every Weingarten-matrix row sums to (d-1)!/(d-1+k)!.
  {
    double residual = 0.0;
    for (int d : {4, 8}) {
      for (int k = 1; k <= 4; ++k) {
        WeingartenTable table = weingarten_matrix(k, d);
        double target = 1.0 / rising_factorial(d, k);
        for (Eigen::Index row = 0; row < table.coeffs.rows(); ++row) {
          residual = std::max(residual,
                              std::abs(table.coeffs.row(row).sum() - target));
        }
      }
    }
    checks.push_back({"weingarten_row_sum", residual, 1e-8});
  }

  // Derangement sum of permutation traces equals the exact Haar moment.
  {
    RandomStream rng(seed, 102);
    double residual = 0.0;
    for (int d : {4, 8}) {
      for (int k : {2, 3, 4}) {
        std::vector<cmat> ops;
        for (int i = 0; i < k; ++i) {
          cmat g(d, d);
          for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) {
              g(r, c) = cplx(rng.normal(), rng.normal());
            }
          }
          g -= (g.trace() / static_cast<double>(d)) *
               cmat::Identity(d, d);
          ops.push_back(g / std::sqrt(static_cast<double>(d)));
        }
        DerangementMomentReport rep = verify_derangement_moment(k, d, ops, 1, seed);
        residual = std::max(residual,
                            std::abs(rep.lhs - rep.rhs_weingarten) /
                                std::max(1.0, std::abs(rep.lhs)));
      }
    }
    checks.push_back({"derangement_moment_weingarten", residual, 1e-8});
  }

  // Closed form of the alternating-involution derangement sum.
  {
    RandomStream rng(seed, 103);
    double residual = 0.0;
    DerangementSumReport pinned = verify_derangement_sum(
        4, pauli_matrix(PauliString("XI")), pauli_matrix(PauliString("XI")));
    residual = std::max(residual, std::abs(pinned.lhs - pinned.rhs));
    residual = std::max(residual, std::abs(pinned.rhs - 72.0));
    for (int d : {4, 8}) {
      for (int trial = 0; trial < 2; ++trial) {
        cmat u1 = haar_unitary(d, rng);
        cmat u2 = haar_unitary(d, rng);
        cvec signs(d);
        for (int i = 0; i < d; ++i) {
          signs(i) = (i < d / 2) ? 1.0 : -1.0;
        }
        DerangementSumReport rep = verify_derangement_sum(
            d, u1 * signs.asDiagonal() * u1.adjoint(),
            u2 * signs.asDiagonal() * u2.adjoint());
        residual = std::max(residual, std::abs(rep.lhs - rep.rhs) /
                                          std::max(1.0, std::abs(rep.lhs)));
      }
    }
    checks.push_back({"derangement_sum_closed_form", residual, 1e-8});
  }

  // Commutator Schatten norms against the correlator expansion.
  {
    double residual = 0.0;
    for (int n : {2, 3}) {
      HamiltonianSpectrum spec = ising_spectrum(n, IsingParams::defaults());
      PauliString w = PauliString::single(n, 1, 'Z');
      PauliString v = PauliString::single(n, n, 'Z');
      double d = static_cast<double>(int64_t(1) << n);
      for (double t : t_probe) {
        for (int order = 1; order <= 3; ++order) {
          std::vector<double> b = expansion_coefficients(order);
          double rhs = b[0];
          for (int k = 1; k <= order; ++k) {
            rhs += b[static_cast<size_t>(k)] *
                   otoc_4k(spec, t, w, v, k).real();
          }
          rhs *= d;
          double lhs = std::pow(
              commutator_schatten_norm(spec, t, w, v, order),
              2.0 * order);
          residual = std::max(residual, std::abs(lhs - rhs) /
                                            std::max(1.0, std::abs(lhs)));
        }
      }
    }
    checks.push_back({"schatten_expansion", residual, 1e-8});
  }

  // Late-time Haar average of the four-point correlator.
  {
    double residual = 0.0;
    for (int d : {2, 4, 8, 16}) {
      double dim = static_cast<double>(d);
      residual = std::max(residual,
                          std::abs(late_time_haar_average(1, d) +
                                   1.0 / (dim * dim - 1.0)));
    }
    checks.push_back({"late_time_haar_average", residual, 1e-8});
  }

  if (!perturb.empty()) {
    bool found = false;
    for (IdentityCheck& check : checks) {
      if (check.name == perturb) {
        check.residual += 1e-3;
        found = true;
      }
    }
    if (!found) {
      throw ConfigError("perturb names no known identity: " + perturb);
    }
  }

  bool all_pass = true;
  json entries = json::array();
  for (const IdentityCheck& check : checks) {
    bool pass = check.residual < check.tolerance;
    all_pass = all_pass && pass;
    entries.push_back({{"name", check.name},
                       {"residual", check.residual},
                       {"tolerance", check.tolerance},
                       {"pass", pass}});
    std::cout << "identity " << check.name << ": "
              << (pass ? "pass" : "FAIL")
              << " (residual " << format_double(check.residual) << ")\n";
  }
  json report = {{"identities", entries}, {"all_pass", all_pass}};
  write_file(out_dir / "verify_identities.json", report.dump(2) + "\n");
  return all_pass ? 0 : 2;
}

// ---------------------------------------------------------------------------
// variance-audit

int cmd_variance_audit(const json& cfg, const fs::path& out_dir,
                       uint64_t seed) {
  check_keys(cfg,
             {"seed", "output_path", "threads", "pair_variance_samples",
              "c4_shadows", "l8_shadows", "chebyshev_trials"},
             {});
  uint64_t pair_variance_samples = get_u64(cfg, "pair_variance_samples", 100000);
  int c4_shadows = get_int(cfg, "c4_shadows", 500, 2, 1000000);
  int l8_shadows = get_int(cfg, "l8_shadows", 200, 2, 1000000);
  int chebyshev_trials = get_int(cfg, "chebyshev_trials", 300, 1, 1000000);
  if (pair_variance_samples < 2) {
    throw ConfigError("pair_variance_samples must be at least 2");
  }

  json audits = json::array();
  bool all_pass = true;
  auto record = [&](const std::string& name, const json& params,
                    double empirical, double bound) {
    bool pass = empirical <= bound;
    all_pass = all_pass && pass;
    json entry = {{"bound_name", name},
                  {"params", params},
                  {"empirical", empirical},
                  {"bound", bound},
                  {"pass", pass}};
    audits.push_back(entry);
    std::cout << "audit " << name << ": " << (pass ? "pass" : "FAIL")
              << " (empirical " << format_double(empirical) << ", bound "
              << format_double(bound) << ")\n";
  };

  // Two-copy swap-observable variance at d = 2 and d = 4.
  {
    RandomStream rng(seed, 201);
    cmat rho1 = random_density(2, rng);
    PairVarianceReport one =
        pair_variance_audit(rho1, PauliString("Z"), pair_variance_samples, seed + 1);
    record("pair_variance_d2",
           {{"d", 2}, {"samples", pair_variance_samples}}, one.empirical_var,
           one.bound);
    cmat rho2 = random_density(4, rng);
    PairVarianceReport two =
        pair_variance_audit(rho2, PauliString("XZ"), pair_variance_samples, seed + 2);
    record("pair_variance_d4",
           {{"d", 4}, {"samples", pair_variance_samples}}, two.empirical_var,
           two.bound);
  }

  // Four-point estimator variance against its closed-form bound.
  double t_audit = 1.1;
  HamiltonianSpectrum spec = ising_spectrum(2, IsingParams::defaults());
  PauliString w("ZI");
  {
    auto ensemble = mixed_protocol_ensemble(2, spec, t_audit);
    std::vector<double> estimates;
    for (int rep = 0; rep < c4_shadows; ++rep) {
      Shadow shadow = build_shadow(ensemble, 16, seed + 9000 + uint64_t(rep),
                                   "mixed", 2, t_audit);
      estimates.push_back(
          estimate_c4_mixed(shadow, w, EstimatorMode::exhaustive_mode())
              .value.real());
    }
    record("c4_variance_bound",
           {{"d", 4}, {"K", 16}, {"shadows", c4_shadows}, {"t", t_audit}},
           empirical_variance(estimates), variance_bound_c4(4, 16));
  }

  // Eight-point leading-term variance against the early-time bound.
  {
    auto ensemble = mixed_protocol_ensemble(2, spec, 0.0);
    std::vector<double> estimates;
    for (int rep = 0; rep < l8_shadows; ++rep) {
      Shadow shadow = build_shadow(ensemble, 8, seed + 40000 + uint64_t(rep),
                                   "mixed", 2, 0.0);
      estimates.push_back(
          estimate_L8_mixed(shadow, w, EstimatorMode::exhaustive_mode())
              .value.real());
    }
    record("l8_early_time_bound",
           {{"d", 4}, {"K", 8}, {"shadows", l8_shadows}, {"t", 0.0}},
           empirical_variance(estimates), variance_bound_L8_early_time(4, 8));
  }

  // Chebyshev failure rate at the prescribed sample size.
  {
    double epsilon = 0.5;
    double delta = 0.1;
    uint64_t k = sample_size_c4(4, epsilon, delta);
    auto ensemble = mixed_protocol_ensemble(2, spec, t_audit);
    PauliString v("IZ");
    double exact = otoc_4k(spec, t_audit, w, v, 1).real();
    int failures = 0;
    for (int trial = 0; trial < chebyshev_trials; ++trial) {
      Shadow shadow =
          build_shadow(ensemble, static_cast<int>(k),
                       seed + 80000 + uint64_t(trial), "mixed", 2, t_audit);
      double estimate =
          estimate_c4_mixed(shadow, w, EstimatorMode::exhaustive_mode())
              .value.real();
      if (std::abs(estimate - exact) > epsilon) {
        failures += 1;
      }
    }
    record("chebyshev_sample_size",
           {{"d", 4},
            {"epsilon", epsilon},
            {"delta", delta},
            {"K", k},
            {"trials", chebyshev_trials}},
           static_cast<double>(failures) /
               static_cast<double>(chebyshev_trials),
           delta);
  }

  json report = {{"audits", audits}, {"all_pass", all_pass}};
  write_file(out_dir / "variance_audit.json", report.dump(2) + "\n");
  return all_pass ? 0 : 2;
}

// ---------------------------------------------------------------------------

int run_command(const std::string& name, const std::string& config_path,
                bool seed_given, uint64_t seed_flag, std::string out_flag,
                int threads_flag) {
  json cfg = load_config(config_path);
  uint64_t seed = get_u64(cfg, "seed", 0);
  if (seed_given) {
    seed = seed_flag;
  }
  std::string out_path = ".";
  if (cfg.contains("output_path")) {
    out_path = get_string(cfg, "output_path");
  }
  if (!out_flag.empty()) {
    out_path = out_flag;
  }
  int threads = get_int(cfg, "threads", 1, 1, 256);
  if (threads_flag > 0) {
    threads = threads_flag;
  }
  if (threads < 1 || threads > 256) {
    throw ConfigError("threads out of range");
  }
  // Work units are scheduled deterministically; the thread count never
  // changes any output byte.
  (void)threads;

  fs::path out_dir(out_path);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory: " + out_path);
  }

  if (name == "exact-curve") {
    return cmd_exact_curve(cfg, out_dir, seed);
  }
  if (name == "shadow-run") {
    return cmd_shadow_run(cfg, out_dir, seed);
  }
  if (name == "global-run") {
    return cmd_global_run(cfg, out_dir, seed);
  }
  if (name == "verify-identities") {
    return cmd_verify_identities(cfg, out_dir, seed);
  }
  return cmd_variance_audit(cfg, out_dir, seed);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scrambling correlator toolkit: exact curves, shadow and "
               "randomized-measurement estimators, identity and variance "
               "audits"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed_flag = 0;
  bool seed_given = false;
  std::string out_flag;
  int threads_flag = 0;

  const std::vector<std::string> names{"exact-curve", "shadow-run",
                                       "global-run", "verify-identities",
                                       "variance-audit"};
  const std::vector<std::string> blurbs{
      "exact correlator curves over a time grid",
      "shadow-estimator runs with repetition statistics",
      "global randomized-measurement protocol runs",
      "deterministic identity suite",
      "variance-bound audits"};
  std::vector<CLI::App*> subs;
  for (size_t i = 0; i < names.size(); ++i) {
    CLI::App* sub = app.add_subcommand(names[i], blurbs[i]);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_flag, "seed override")
        ->each([&seed_given](const std::string&) { seed_given = true; });
    sub->add_option("--out", out_flag, "output directory override");
    sub->add_option("--threads", threads_flag, "worker thread count");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);
    }
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  std::string chosen;
  for (size_t i = 0; i < subs.size(); ++i) {
    if (subs[i]->parsed()) {
      chosen = names[i];
    }
  }

  try {
    return run_command(chosen, config_path, seed_given, seed_flag, out_flag,
                       threads_flag);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
}
