#pragma once

// Random-Clifford classical shadows: the 24-element single-qubit Clifford
// group, snapshot sampling from pure-state ensembles, the six-state
// stabilizer labelling that snapshots collapse to, dense reconstruction for
// small registers, and a text serialization that round-trips bit exactly.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otoc/qlinalg.hpp"
#include "otoc/rng.hpp"

namespace otoc {

// The single-qubit Clifford group mod global phase, generated by H and S.
// Built once by breadth-first closure with a fixed generator order, so the
// index assigned to each element is stable across runs and platforms:
// index 0 is the identity, 1 is H, 2 is S, and so on in discovery order.
inline const std::vector<cmat>& clifford_table() {
  static const std::vector<cmat> table = [] {
    // Two unitaries are the same group element iff |Tr(a^dagger b)| = 2.
    auto same_mod_phase = [](const cmat& a, const cmat& b) {
      return std::abs((a.adjoint() * b).trace()) > 2.0 - 1e-6;
    };
    cmat h(2, 2);
    h << 1, 1, 1, -1;
    h /= std::sqrt(2.0);
    cmat s(2, 2);
    s << 1, 0, 0, cplx(0, 1);
    std::vector<cmat> elems{cmat::Identity(2, 2)};
    for (size_t head = 0; head < elems.size(); ++head) {
      for (const cmat* g : {&h, &s}) {
        cmat cand = (*g) * elems[head];
        bool known = false;
        for (const cmat& e : elems) {
          if (same_mod_phase(e, cand)) {
            known = true;
            break;
          }
        }
        if (!known) {
          elems.push_back(cand);
        }
      }
    }
    if (elems.size() != 24) {
      throw std::logic_error("clifford_table: closure size is not 24");
    }
    return elems;
  }();
  return table;
}

inline const cmat& clifford_matrix(int index) {
  if (index < 0 || index >= 24) {
    throw std::invalid_argument("clifford_matrix: index out of range");
  }
  return clifford_table()[static_cast<size_t>(index)];
}

// The six states a snapshot qubit can collapse to, indexed 0..5 in the
// order |0>, |1>, |+>, |->, |+i>, |-i>.
inline const std::array<cvec, 6>& stabilizer_states() {
  static const std::array<cvec, 6> states = [] {
    std::array<cvec, 6> s;
    double r = 1.0 / std::sqrt(2.0);
    s[0] = cvec(2);
    s[0] << 1, 0;
    s[1] = cvec(2);
    s[1] << 0, 1;
    s[2] = cvec(2);
    s[2] << r, r;
    s[3] = cvec(2);
    s[3] << r, -r;
    s[4] = cvec(2);
    s[4] << r, cplx(0, r);
    s[5] = cvec(2);
    s[5] << r, cplx(0, -r);
    return s;
  }();
  return states;
}

// 3|s><s| - I for stabilizer label s: the single-qubit factor of the
// inverted-channel snapshot.
inline cmat snapshot_factor(int label) {
  if (label < 0 || label >= 6) {
    throw std::invalid_argument("snapshot_factor: label out of range");
  }
  const cvec& s = stabilizer_states()[static_cast<size_t>(label)];
  return 3.0 * (s * s.adjoint()) - cmat::Identity(2, 2);
}

// Which stabilizer state u^dagger |b> is, for every (clifford, outcome)
// pair.  Every such state matches one of the six up to phase.
inline int label_of(int clifford_index, int outcome_bit) {
  static const std::array<std::array<int, 2>, 24> table = [] {
    std::array<std::array<int, 2>, 24> t{};
    for (int c = 0; c < 24; ++c) {
      for (int b = 0; b < 2; ++b) {
        cvec v = clifford_matrix(c).adjoint().col(b);
        int found = -1;
        for (int s = 0; s < 6; ++s) {
          cplx overlap = stabilizer_states()[static_cast<size_t>(s)].dot(v);
          if (std::abs(std::abs(overlap) - 1.0) < 1e-9) {
            found = s;
            break;
          }
        }
        if (found < 0) {
          throw std::logic_error("label_of: state outside the six-state set");
        }
        t[static_cast<size_t>(c)][static_cast<size_t>(b)] = found;
      }
    }
    return t;
  }();
  if (clifford_index < 0 || clifford_index >= 24 || outcome_bit < 0 ||
      outcome_bit > 1) {
    throw std::invalid_argument("label_of: argument out of range");
  }
  return table[static_cast<size_t>(clifford_index)]
              [static_cast<size_t>(outcome_bit)];
}

struct ShadowSnapshot {
  std::vector<uint8_t> clifford_indices; // one per qubit, values 0..23
  std::vector<uint8_t> outcomes;         // one per qubit, values 0..1

  bool operator==(const ShadowSnapshot& other) const = default;
};

struct Shadow {
  std::string protocol;
  int n = 0;          // chain length of the simulated system
  int num_qubits = 0; // qubits per snapshot (may exceed n for dual registers)
  double t = 0.0;
  uint64_t seed = 0;
  std::vector<ShadowSnapshot> snapshots;

  bool operator==(const Shadow& other) const = default;
};

// One randomized measurement of a state drawn uniformly from the ensemble:
// an independent uniform Clifford per qubit, then a computational-basis
// sample of the rotated state.
inline ShadowSnapshot sample_snapshot(const std::vector<StateVector>& ensemble,
                                      RandomStream& rng) {
  if (ensemble.empty()) {
    throw std::invalid_argument("sample_snapshot: empty ensemble");
  }
  size_t member = 0;
  if (ensemble.size() > 1) {
    member = static_cast<size_t>(
        rng.uniform_below(static_cast<uint64_t>(ensemble.size())));
  }
  const StateVector& state = ensemble[member];
  int q = state.num_qubits;
  ShadowSnapshot snap;
  snap.clifford_indices.resize(static_cast<size_t>(q));
  snap.outcomes.resize(static_cast<size_t>(q));
  cvec amps = state.amplitudes;
  for (int qubit = 0; qubit < q; ++qubit) {
    int idx = static_cast<int>(rng.uniform_below(24));
    snap.clifford_indices[static_cast<size_t>(qubit)] =
        static_cast<uint8_t>(idx);
    const cmat& u = clifford_matrix(idx);
    // Qubit 0 of the snapshot register is the most significant bit.
    int64_t stride = int64_t(1) << (q - 1 - qubit);
    for (int64_t base = 0; base < amps.size(); ++base) {
      if ((base & stride) == 0) {
        cplx a0 = amps[base];
        cplx a1 = amps[base | stride];
        amps[base] = u(0, 0) * a0 + u(0, 1) * a1;
        amps[base | stride] = u(1, 0) * a0 + u(1, 1) * a1;
      }
    }
  }
  double target = rng.uniform();
  double cum = 0.0;
  int64_t outcome = amps.size() - 1;
  for (int64_t i = 0; i < amps.size(); ++i) {
    cum += std::norm(amps[i]);
    if (target < cum) {
      outcome = i;
      break;
    }
  }
  for (int qubit = 0; qubit < q; ++qubit) {
    snap.outcomes[static_cast<size_t>(qubit)] = static_cast<uint8_t>(
        (outcome >> (q - 1 - qubit)) & 1);
  }
  return snap;
}

// K snapshots, each drawn from its own counter substream of the seed, so
// the shadow is identical however the work is scheduled.
inline Shadow build_shadow(const std::vector<StateVector>& ensemble,
                           int num_snapshots, uint64_t seed,
                           const std::string& protocol, int n, double t) {
  if (num_snapshots < 1) {
    throw std::invalid_argument("build_shadow: need at least one snapshot");
  }
  Shadow shadow;
  shadow.protocol = protocol;
  shadow.n = n;
  shadow.num_qubits = ensemble.empty() ? 0 : ensemble[0].num_qubits;
  shadow.t = t;
  shadow.seed = seed;
  shadow.snapshots.reserve(static_cast<size_t>(num_snapshots));
  for (int i = 0; i < num_snapshots; ++i) {
    RandomStream rng(seed, substream_id(1, static_cast<uint64_t>(i)));
    shadow.snapshots.push_back(sample_snapshot(ensemble, rng));
  }
  return shadow;
}

// Dense inverted-channel snapshot, the tensor product of per-qubit factors.
inline cmat snapshot_to_dense(const ShadowSnapshot& snap) {
  size_t q = snap.clifford_indices.size();
  if (q == 0 || q > 6) {
    throw std::invalid_argument("snapshot_to_dense: supports 1 to 6 qubits");
  }
  cmat acc = snapshot_factor(
      label_of(snap.clifford_indices[0], snap.outcomes[0]));
  for (size_t i = 1; i < q; ++i) {
    acc = kron(acc, snapshot_factor(
                        label_of(snap.clifford_indices[i], snap.outcomes[i])));
  }
  return acc;
}

// Per-qubit stabilizer labels of a snapshot, the only data the estimators
// actually consume.
inline std::vector<uint8_t> snapshot_labels(const ShadowSnapshot& snap) {
  std::vector<uint8_t> labels(snap.clifford_indices.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<uint8_t>(
        label_of(snap.clifford_indices[i], snap.outcomes[i]));
  }
  return labels;
}

// Serialized form: a one-line JSON header, then CSV rows with one line per
// (snapshot, qubit) pair.  JSON doubles print in shortest exact form, so
// the time value round-trips bit for bit.
inline void save_shadow(const Shadow& shadow, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_shadow: cannot open " + path);
  }
  nlohmann::json header;
  header["protocol"] = shadow.protocol;
  header["n"] = shadow.n;
  header["num_qubits"] = shadow.num_qubits;
  header["t"] = shadow.t;
  header["K"] = shadow.snapshots.size();
  header["seed"] = shadow.seed;
  out << header.dump() << "\r\n";
  out << "snapshot_index,qubit_index,clifford_index,outcome_bit\r\n";
  for (size_t i = 0; i < shadow.snapshots.size(); ++i) {
    const ShadowSnapshot& snap = shadow.snapshots[i];
    for (size_t qubit = 0; qubit < snap.clifford_indices.size(); ++qubit) {
      out << i << ',' << qubit << ','
          << static_cast<int>(snap.clifford_indices[qubit]) << ','
          << static_cast<int>(snap.outcomes[qubit]) << "\r\n";
    }
  }
  if (!out) {
    throw std::runtime_error("save_shadow: write failed for " + path);
  }
}

inline Shadow load_shadow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_shadow: cannot open " + path);
  }
  auto next_line = [&in, &path](std::string& line) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("load_shadow: truncated file " + path);
    }
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
  };
  std::string line;
  next_line(line);
  nlohmann::json header = nlohmann::json::parse(line);
  Shadow shadow;
  shadow.protocol = header.at("protocol").get<std::string>();
  shadow.n = header.at("n").get<int>();
  shadow.num_qubits = header.at("num_qubits").get<int>();
  shadow.t = header.at("t").get<double>();
  shadow.seed = header.at("seed").get<uint64_t>();
  size_t num_snapshots = header.at("K").get<size_t>();
  next_line(line);
  if (line != "snapshot_index,qubit_index,clifford_index,outcome_bit") {
    throw std::runtime_error("load_shadow: unexpected column header");
  }
  shadow.snapshots.assign(num_snapshots, ShadowSnapshot{});
  size_t expected_rows =
      num_snapshots * static_cast<size_t>(shadow.num_qubits);
  for (size_t row = 0; row < expected_rows; ++row) {
    next_line(line);
    size_t snap_idx = 0, qubit_idx = 0;
    int cliff = 0, bit = 0;
    if (std::sscanf(line.c_str(), "%zu,%zu,%d,%d", &snap_idx, &qubit_idx,
                    &cliff, &bit) != 4) {
      throw std::runtime_error("load_shadow: malformed row: " + line);
    }
    if (snap_idx >= num_snapshots ||
        qubit_idx >= static_cast<size_t>(shadow.num_qubits) || cliff < 0 ||
        cliff >= 24 || (bit != 0 && bit != 1)) {
      throw std::runtime_error("load_shadow: row out of range: " + line);
    }
    ShadowSnapshot& snap = shadow.snapshots[snap_idx];
    if (snap.clifford_indices.empty()) {
      snap.clifford_indices.resize(static_cast<size_t>(shadow.num_qubits));
      snap.outcomes.resize(static_cast<size_t>(shadow.num_qubits));
    }
    snap.clifford_indices[qubit_idx] = static_cast<uint8_t>(cliff);
    snap.outcomes[qubit_idx] = static_cast<uint8_t>(bit);
  }
  return shadow;
}

} // namespace otoc
