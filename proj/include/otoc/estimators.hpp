#pragma once

// U-statistic estimators over classical shadows.  Every estimator reduces to
// the same kernel: a trace of per-copy Pauli factors and snapshot factors
// tied together by per-wire copy permutations, evaluated wire by wire as
// cycle traces of 2x2 chains.  Exhaustive sums run over label histograms
// (snapshots collapse to one of 6 stabilizer labels per qubit), which turns
// O(K^{2k}) tuple sums into sums over the label combinations present.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otoc/qlinalg.hpp"
#include "otoc/rng.hpp"
#include "otoc/shadows.hpp"

namespace otoc {

struct EstimatorMode {
  bool exhaustive = true;
  uint64_t num_draws = 0; // subsampled mode: tuples drawn
  uint64_t seed = 0;

  static EstimatorMode exhaustive_mode() { return EstimatorMode{}; }
  static EstimatorMode subsampled(uint64_t draws, uint64_t seed) {
    if (draws == 0) {
      throw std::invalid_argument("subsampled mode needs at least one draw");
    }
    return EstimatorMode{false, draws, seed};
  }
};

struct EstimatorResult {
  std::string protocol;
  int k = 0;
  double t = 0.0;
  cplx value{0.0, 0.0};
  uint64_t num_terms = 0; // kernel evaluations the sum comprises
  bool subsampled = false;
  uint64_t seed = 0;
};

inline nlohmann::json estimator_result_json(const EstimatorResult& r) {
  nlohmann::json j;
  j["protocol"] = r.protocol;
  j["k"] = r.k;
  j["t"] = r.t;
  j["value_re"] = r.value.real();
  j["value_im"] = r.value.imag();
  j["num_terms"] = r.num_terms;
  j["mode"] = r.subsampled ? "subsampled" : "exhaustive";
  j["seed"] = r.seed;
  return j;
}

namespace detail {

// Bare 2x2 complex matrices for the inner loops; Eigen's generality costs
// too much at this size.
struct m22 {
  cplx e00, e01, e10, e11;
};

inline m22 mul(const m22& a, const m22& b) {
  return m22{a.e00 * b.e00 + a.e01 * b.e10, a.e00 * b.e01 + a.e01 * b.e11,
             a.e10 * b.e00 + a.e11 * b.e10, a.e10 * b.e01 + a.e11 * b.e11};
}

inline cplx tr(const m22& a) { return a.e00 + a.e11; }

inline m22 from_dense(const cmat& m) {
  return m22{m(0, 0), m(0, 1), m(1, 0), m(1, 1)};
}

inline const std::array<m22, 6>& factor_table() {
  static const std::array<m22, 6> table = [] {
    std::array<m22, 6> t;
    for (int s = 0; s < 6; ++s) {
      t[static_cast<size_t>(s)] = from_dense(snapshot_factor(s));
    }
    return t;
  }();
  return table;
}

inline m22 letter_matrix(char letter) {
  switch (letter) {
    case 'I': return m22{1, 0, 0, 1};
    case 'X': return m22{0, 1, 1, 0};
    case 'Y': return m22{0, cplx(0, -1), cplx(0, 1), 0};
    case 'Z': return m22{1, 0, 0, -1};
    default: throw std::invalid_argument("letter_matrix: unknown Pauli");
  }
}

inline uint64_t falling_factorial(uint64_t n, int m) {
  uint64_t acc = 1;
  for (int i = 0; i < m; ++i) {
    if (n < static_cast<uint64_t>(i) + 1) {
      return 0;
    }
    acc *= n - static_cast<uint64_t>(i);
  }
  return acc;
}

} // namespace detail

// The tuple observable: per-copy Pauli factors plus one copy-permutation per
// wire.  snapshots_first picks the operator order inside each cycle chain —
// false for observables of the form T (tensor of factors), true for traces
// written as (tensor of snapshots)(tensor of factors)(permutations).
struct ObservableSpec {
  int copies = 0;
  int num_wires = 0;
  std::vector<PauliString> copy_factors;
  std::vector<Permutation> wire_perms;
  bool snapshots_first = false;
  double prefactor = 1.0;

  // Single copy-permutation applied to every wire.
  static ObservableSpec uniform(int copies, int num_wires,
                                std::vector<PauliString> factors,
                                const Permutation& copy_perm,
                                bool snapshots_first, double prefactor) {
    ObservableSpec obs;
    obs.copies = copies;
    obs.num_wires = num_wires;
    obs.copy_factors = std::move(factors);
    obs.wire_perms.assign(static_cast<size_t>(num_wires), copy_perm);
    obs.snapshots_first = snapshots_first;
    obs.prefactor = prefactor;
    obs.validate();
    return obs;
  }

  void validate() const {
    if (copies < 1 || num_wires < 1) {
      throw std::invalid_argument("ObservableSpec: empty copies or wires");
    }
    if (copy_factors.size() != static_cast<size_t>(copies)) {
      throw std::invalid_argument("ObservableSpec: factor count != copies");
    }
    for (const PauliString& p : copy_factors) {
      if (p.num_qubits != num_wires) {
        throw std::invalid_argument("ObservableSpec: factor width != wires");
      }
    }
    if (wire_perms.size() != static_cast<size_t>(num_wires)) {
      throw std::invalid_argument("ObservableSpec: need one perm per wire");
    }
    for (const Permutation& p : wire_perms) {
      if (p.size() != copies) {
        throw std::invalid_argument("ObservableSpec: perm size != copies");
      }
    }
  }
};

namespace detail {

// Observable preprocessed for the label-based kernel: letter matrices laid
// out copy-major, wire cycles unpacked, scalar phases folded into one scale.
struct CompiledObservable {
  int copies = 0;
  int num_wires = 0;
  std::vector<m22> letters;                    // copies * num_wires
  std::vector<std::vector<std::vector<int>>> wire_cycles;
  bool snapshots_first = false;
  cplx scale{1.0, 0.0};
};

inline CompiledObservable compile(const ObservableSpec& obs) {
  obs.validate();
  CompiledObservable c;
  c.copies = obs.copies;
  c.num_wires = obs.num_wires;
  c.snapshots_first = obs.snapshots_first;
  c.scale = obs.prefactor;
  c.letters.resize(static_cast<size_t>(obs.copies * obs.num_wires));
  for (int j = 0; j < obs.copies; ++j) {
    const PauliString& p = obs.copy_factors[static_cast<size_t>(j)];
    c.scale *= p.phase;
    for (int w = 0; w < obs.num_wires; ++w) {
      c.letters[static_cast<size_t>(j * obs.num_wires + w)] =
          letter_matrix(p.letters[static_cast<size_t>(w)]);
    }
  }
  c.wire_cycles.reserve(static_cast<size_t>(obs.num_wires));
  for (const Permutation& p : obs.wire_perms) {
    c.wire_cycles.push_back(p.cycles());
  }
  return c;
}

// Kernel value for one tuple of snapshots given as per-qubit label arrays:
// product over wires and cycles of 2x2 chain traces.
inline cplx kernel_from_labels(const CompiledObservable& c,
                               const uint8_t* const* labels) {
  const std::array<m22, 6>& factors = factor_table();
  cplx value = c.scale;
  for (int w = 0; w < c.num_wires; ++w) {
    for (const std::vector<int>& cycle : c.wire_cycles[static_cast<size_t>(w)]) {
      bool first = true;
      m22 acc{1, 0, 0, 1};
      for (int copy : cycle) {
        const m22& a = c.letters[static_cast<size_t>(copy * c.num_wires + w)];
        const m22& f = factors[labels[copy][w]];
        m22 link = c.snapshots_first ? mul(f, a) : mul(a, f);
        acc = first ? link : mul(acc, link);
        first = false;
      }
      value *= tr(acc);
    }
  }
  return value;
}

} // namespace detail

// Engine entry point on raw snapshots; no exponential blowup in qubit count.
inline cplx factorized_tuple_trace(
    const std::vector<const ShadowSnapshot*>& snapshots,
    const ObservableSpec& obs) {
  if (snapshots.size() != static_cast<size_t>(obs.copies)) {
    throw std::invalid_argument("factorized_tuple_trace: arity mismatch");
  }
  std::vector<std::vector<uint8_t>> label_store;
  label_store.reserve(snapshots.size());
  std::vector<const uint8_t*> labels;
  for (const ShadowSnapshot* s : snapshots) {
    if (s == nullptr ||
        s->clifford_indices.size() != static_cast<size_t>(obs.num_wires)) {
      throw std::invalid_argument("factorized_tuple_trace: qubit mismatch");
    }
    label_store.push_back(snapshot_labels(*s));
    labels.push_back(label_store.back().data());
  }
  return detail::kernel_from_labels(detail::compile(obs), labels.data());
}

// Dense reference: builds the permutation operator and the full tensor
// products outright.  Deliberately naive; only for small registers.
inline cplx dense_tuple_trace(const std::vector<cmat>& copy_states,
                              const ObservableSpec& obs) {
  obs.validate();
  if (copy_states.size() != static_cast<size_t>(obs.copies)) {
    throw std::invalid_argument("dense_tuple_trace: arity mismatch");
  }
  int total_qubits = obs.copies * obs.num_wires;
  if (total_qubits > 8) {
    throw std::invalid_argument("dense_tuple_trace: register too large");
  }
  int64_t wire_dim = int64_t(1) << obs.num_wires;
  cmat blended;
  for (int j = 0; j < obs.copies; ++j) {
    const cmat& rho = copy_states[static_cast<size_t>(j)];
    if (rho.rows() != wire_dim || rho.cols() != wire_dim) {
      throw std::invalid_argument("dense_tuple_trace: state dim mismatch");
    }
    cmat a = pauli_matrix(obs.copy_factors[static_cast<size_t>(j)]);
    cmat m = obs.snapshots_first ? cmat(rho * a) : cmat(a * rho);
    blended = (j == 0) ? m : kron(blended, m);
  }
  int64_t dim = int64_t(1) << total_qubits;
  cmat perm_op = cmat::Zero(dim, dim);
  for (int64_t in = 0; in < dim; ++in) {
    int64_t out = 0;
    for (int j = 0; j < obs.copies; ++j) {
      for (int w = 0; w < obs.num_wires; ++w) {
        int src = obs.wire_perms[static_cast<size_t>(w)](j);
        int64_t bit =
            (in >> (total_qubits - 1 - (src * obs.num_wires + w))) & 1;
        out |= bit << (total_qubits - 1 - (j * obs.num_wires + w));
      }
    }
    perm_op(out, in) = 1.0;
  }
  return obs.prefactor * (perm_op * blended).trace();
}

// Dense reference without materializing the big matrices: the permutation
// operator has one entry per column, so the trace is a single sum of
// products of per-copy matrix entries.  Handles registers up to 14 qubits.
inline cplx dense_tuple_trace_lazy(const std::vector<cmat>& copy_states,
                                   const ObservableSpec& obs) {
  obs.validate();
  if (copy_states.size() != static_cast<size_t>(obs.copies)) {
    throw std::invalid_argument("dense_tuple_trace_lazy: arity mismatch");
  }
  int total_qubits = obs.copies * obs.num_wires;
  if (total_qubits > 14) {
    throw std::invalid_argument("dense_tuple_trace_lazy: register too large");
  }
  int64_t wire_dim = int64_t(1) << obs.num_wires;
  std::vector<cmat> blended(static_cast<size_t>(obs.copies));
  for (int j = 0; j < obs.copies; ++j) {
    const cmat& rho = copy_states[static_cast<size_t>(j)];
    if (rho.rows() != wire_dim || rho.cols() != wire_dim) {
      throw std::invalid_argument("dense_tuple_trace_lazy: state dim mismatch");
    }
    cmat a = pauli_matrix(obs.copy_factors[static_cast<size_t>(j)]);
    blended[static_cast<size_t>(j)] =
        obs.snapshots_first ? cmat(rho * a) : cmat(a * rho);
  }
  int64_t dim = int64_t(1) << total_qubits;
  cplx sum(0.0, 0.0);
  for (int64_t in = 0; in < dim; ++in) {
    cplx prod(1.0, 0.0);
    for (int j = 0; j < obs.copies; ++j) {
      int64_t row = (in >> ((obs.copies - 1 - j) * obs.num_wires)) &
                    (wire_dim - 1);
      int64_t col = 0;
      for (int w = 0; w < obs.num_wires; ++w) {
        int src = obs.wire_perms[static_cast<size_t>(w)](j);
        int64_t bit =
            (in >> (total_qubits - 1 - (src * obs.num_wires + w))) & 1;
        col |= bit << (obs.num_wires - 1 - w);
      }
      prod *= blended[static_cast<size_t>(j)](row, col);
    }
    sum += prod;
  }
  return obs.prefactor * sum;
}

namespace detail {

// Snapshots grouped by their per-qubit label vector, sorted by label code
// so sums run in an input-order-independent sequence.
struct LabelHistogram {
  std::vector<std::vector<uint8_t>> labels;
  std::vector<uint64_t> counts;
  uint64_t total = 0;
};

inline LabelHistogram histogram_of(const Shadow& shadow) {
  std::map<uint64_t, uint64_t> buckets;
  std::map<uint64_t, std::vector<uint8_t>> reps;
  for (const ShadowSnapshot& snap : shadow.snapshots) {
    std::vector<uint8_t> labels = snapshot_labels(snap);
    uint64_t code = 0;
    for (uint8_t l : labels) {
      code = code * 6 + l;
    }
    buckets[code] += 1;
    if (buckets[code] == 1) {
      reps[code] = std::move(labels);
    }
  }
  LabelHistogram hist;
  hist.labels.reserve(buckets.size());
  hist.counts.reserve(buckets.size());
  for (const auto& [code, count] : buckets) {
    hist.labels.push_back(reps[code]);
    hist.counts.push_back(count);
    hist.total += count;
  }
  return hist;
}

// Sum of the kernel over all ordered pairs of distinct snapshots, via the
// label histogram with falling-factorial index counts.
inline cplx pair_sum_hist(const CompiledObservable& c,
                          const LabelHistogram& hist) {
  cplx sum(0.0, 0.0);
  std::array<const uint8_t*, 2> labels{};
  for (size_t p = 0; p < hist.labels.size(); ++p) {
    labels[0] = hist.labels[p].data();
    for (size_t q = 0; q < hist.labels.size(); ++q) {
      uint64_t weight = (p == q) ? hist.counts[p] * (hist.counts[p] - 1)
                                 : hist.counts[p] * hist.counts[q];
      if (weight == 0) {
        continue;
      }
      labels[1] = hist.labels[q].data();
      sum += static_cast<double>(weight) * kernel_from_labels(c, labels.data());
    }
  }
  return sum;
}

// Sum of the kernel over all ordered 4-tuples of distinct snapshots for
// kernels invariant under cyclic rotation of the four slots (uniform
// factors, every nontrivial wire permutation the same 4-cycle).  Sorted
// 4-multisets of label classes stand in for index tuples: each multiset
// carries weight (product of falling factorials) / (product of repeat
// factorials), and the 24 slot assignments reduce to 4 x the 6 assignments
// that keep the first slot fixed.
inline cplx quad_sum_hist_cyclic(const CompiledObservable& c,
                                 const LabelHistogram& hist) {
  const int perms3[6][3] = {{1, 2, 3}, {1, 3, 2}, {2, 1, 3},
                            {2, 3, 1}, {3, 1, 2}, {3, 2, 1}};
  size_t m = hist.labels.size();
  cplx sum(0.0, 0.0);
  std::array<const uint8_t*, 4> labels{};
  std::array<size_t, 4> pick{};
  for (size_t a = 0; a < m; ++a) {
    pick[0] = a;
    for (size_t b = a; b < m; ++b) {
      pick[1] = b;
      for (size_t e = b; e < m; ++e) {
        pick[2] = e;
        for (size_t f = e; f < m; ++f) {
          pick[3] = f;
          double weight = 1.0;
          double repeat_factorial = 1.0;
          size_t run_start = 0;
          for (size_t i = 1; i <= 4; ++i) {
            if (i == 4 || pick[i] != pick[run_start]) {
              int mult = static_cast<int>(i - run_start);
              weight *= static_cast<double>(
                  falling_factorial(hist.counts[pick[run_start]], mult));
              for (int r = 2; r <= mult; ++r) {
                repeat_factorial *= r;
              }
              run_start = i;
            }
          }
          if (weight == 0.0) {
            continue;
          }
          cplx inner(0.0, 0.0);
          labels[0] = hist.labels[pick[0]].data();
          for (const auto& p : perms3) {
            labels[1] = hist.labels[pick[static_cast<size_t>(p[0])]].data();
            labels[2] = hist.labels[pick[static_cast<size_t>(p[1])]].data();
            labels[3] = hist.labels[pick[static_cast<size_t>(p[2])]].data();
            inner += kernel_from_labels(c, labels.data());
          }
          sum += (weight / repeat_factorial) * 4.0 * inner;
        }
      }
    }
  }
  return sum;
}

// Sum of the kernel over ordered m-tuples of distinct snapshots by direct
// subset enumeration with all m! slot assignments.  Only for small K.
inline cplx tuple_sum_direct(const CompiledObservable& c,
                             const std::vector<std::vector<uint8_t>>& labels,
                             int copies) {
  size_t count = labels.size();
  std::vector<int> subset(static_cast<size_t>(copies));
  std::iota(subset.begin(), subset.end(), 0);
  cplx sum(0.0, 0.0);
  std::vector<const uint8_t*> ptrs(static_cast<size_t>(copies));
  while (true) {
    std::vector<int> order = subset;
    do {
      for (int i = 0; i < copies; ++i) {
        ptrs[static_cast<size_t>(i)] =
            labels[static_cast<size_t>(order[static_cast<size_t>(i)])].data();
      }
      sum += kernel_from_labels(c, ptrs.data());
    } while (std::next_permutation(order.begin(), order.end()));
    // Advance the sorted subset odometer.
    int pos = copies - 1;
    while (pos >= 0 &&
           subset[static_cast<size_t>(pos)] ==
               static_cast<int>(count) - (copies - pos)) {
      --pos;
    }
    if (pos < 0) {
      break;
    }
    subset[static_cast<size_t>(pos)] += 1;
    for (int i = pos + 1; i < copies; ++i) {
      subset[static_cast<size_t>(i)] = subset[static_cast<size_t>(i - 1)] + 1;
    }
  }
  return sum;
}

inline std::vector<std::vector<uint8_t>> all_labels(const Shadow& shadow) {
  std::vector<std::vector<uint8_t>> out;
  out.reserve(shadow.snapshots.size());
  for (const ShadowSnapshot& snap : shadow.snapshots) {
    out.push_back(snapshot_labels(snap));
  }
  return out;
}

// Mean of the per-subset symmetrized kernel over subsampled distinct-index
// draws; each draw gets its own counter substream.
inline cplx tuple_mean_subsampled(const CompiledObservable& c,
                                  const std::vector<std::vector<uint8_t>>& labels,
                                  int copies, uint64_t draws, uint64_t seed,
                                  bool cyclic_reduction) {
  const int perms3[6][3] = {{1, 2, 3}, {1, 3, 2}, {2, 1, 3},
                            {2, 3, 1}, {3, 1, 2}, {3, 2, 1}};
  uint64_t count = labels.size();
  std::vector<const uint8_t*> ptrs(static_cast<size_t>(copies));
  cplx acc(0.0, 0.0);
  for (uint64_t draw = 0; draw < draws; ++draw) {
    RandomStream rng(seed, substream_id(2, draw));
    std::vector<int> pick;
    while (pick.size() < static_cast<size_t>(copies)) {
      int cand = static_cast<int>(rng.uniform_below(count));
      if (std::find(pick.begin(), pick.end(), cand) == pick.end()) {
        pick.push_back(cand);
      }
    }
    cplx inner(0.0, 0.0);
    if (cyclic_reduction && copies == 4) {
      ptrs[0] = labels[static_cast<size_t>(pick[0])].data();
      for (const auto& p : perms3) {
        ptrs[1] = labels[static_cast<size_t>(pick[static_cast<size_t>(p[0])])].data();
        ptrs[2] = labels[static_cast<size_t>(pick[static_cast<size_t>(p[1])])].data();
        ptrs[3] = labels[static_cast<size_t>(pick[static_cast<size_t>(p[2])])].data();
        inner += kernel_from_labels(c, ptrs.data());
      }
      inner /= 6.0;
    } else {
      std::sort(pick.begin(), pick.end());
      uint64_t orderings = 0;
      do {
        for (int i = 0; i < copies; ++i) {
          ptrs[static_cast<size_t>(i)] =
              labels[static_cast<size_t>(pick[static_cast<size_t>(i)])].data();
        }
        inner += kernel_from_labels(c, ptrs.data());
        orderings += 1;
      } while (std::next_permutation(pick.begin(), pick.end()));
      inner /= static_cast<double>(orderings);
    }
    acc += inner;
  }
  return acc / static_cast<double>(draws);
}

inline double falling_dbl(uint64_t n, int m) {
  double acc = 1.0;
  for (int i = 0; i < m; ++i) {
    acc *= static_cast<double>(n - static_cast<uint64_t>(i));
  }
  return acc;
}

inline void require_disjoint(const PauliString& w, const PauliString& v) {
  for (int q = 0; q < w.num_qubits; ++q) {
    if (w.letters[static_cast<size_t>(q)] != 'I' &&
        v.letters[static_cast<size_t>(q)] != 'I') {
      throw std::invalid_argument("W and V must act on disjoint sites");
    }
  }
}

inline void require_hermitian_probe(const PauliString& w, const char* who) {
  if (w.is_identity_letters() ||
      std::abs(w.phase - cplx(1.0, 0.0)) > 1e-12) {
    throw std::invalid_argument(std::string(who) +
                                ": probe must be a plain non-identity Pauli");
  }
}

} // namespace detail

// --- Protocol observable builders ------------------------------------------

// Dual-register protocol: 2k snapshot copies of the 2N-qubit evolution
// state.  Odd copies carry (W^dagger on the system half, V^* on the mirror
// half), even copies carry (W, V^T); mirror wires cycle copy j -> j-1 and
// system wires stay put.
inline ObservableSpec multibell_observable(const PauliString& w,
                                           const PauliString& v, int k) {
  if (k < 1) {
    throw std::invalid_argument("multibell_observable: k must be >= 1");
  }
  if (w.num_qubits != v.num_qubits) {
    throw std::invalid_argument("multibell_observable: W/V width mismatch");
  }
  int n = w.num_qubits;
  int copies = 2 * k;
  ObservableSpec obs;
  obs.copies = copies;
  obs.num_wires = 2 * n;
  PauliString v_conj = v.conjugated();
  PauliString v_trans = v.transposed();
  for (int j = 1; j <= copies; ++j) {
    bool odd = (j % 2 == 1);
    std::string letters = w.letters + v.letters;
    cplx phase = odd ? std::conj(w.phase) * v_conj.phase
                     : w.phase * v_trans.phase;
    obs.copy_factors.emplace_back(letters, phase);
  }
  Permutation backward = Permutation::identity(copies);
  for (int i = 0; i < copies; ++i) {
    backward.images[static_cast<size_t>(i)] = (i + copies - 1) % copies;
  }
  obs.wire_perms.assign(static_cast<size_t>(n), Permutation::identity(copies));
  obs.wire_perms.insert(obs.wire_perms.end(), static_cast<size_t>(n), backward);
  obs.snapshots_first = false;
  obs.prefactor = 1.0;
  obs.validate();
  return obs;
}

// Mixed-input protocol pair and quadruple observables: W on every copy,
// every wire cycled by the same full cycle.
inline ObservableSpec mixed_cycle_observable(const PauliString& w, int copies) {
  std::vector<int> cyc(static_cast<size_t>(copies));
  std::iota(cyc.begin(), cyc.end(), 1);
  Permutation cycle = Permutation::from_cycles(copies, {cyc});
  std::vector<PauliString> factors(static_cast<size_t>(copies), w);
  return ObservableSpec::uniform(copies, w.num_qubits, std::move(factors),
                                 cycle, true, 1.0);
}

// Single-ancilla protocol: 2k copies of N system wires plus one ancilla
// wire; Z on system wire 1 and X on the ancilla per copy; system wires
// carry the copy cycle 1 -> 2 -> ... -> 2k, the ancilla wire none.
inline ObservableSpec single_bell_observable(int n, int k) {
  if (n < 2 || k < 1) {
    throw std::invalid_argument("single_bell_observable: need n >= 2, k >= 1");
  }
  int copies = 2 * k;
  ObservableSpec obs;
  obs.copies = copies;
  obs.num_wires = n + 1;
  std::string letters(static_cast<size_t>(n + 1), 'I');
  letters[0] = 'Z';
  letters[static_cast<size_t>(n)] = 'X';
  obs.copy_factors.assign(static_cast<size_t>(copies),
                          PauliString(letters, 1.0));
  Permutation forward = Permutation::identity(copies);
  for (int i = 0; i < copies; ++i) {
    forward.images[static_cast<size_t>(i)] = (i + 1) % copies;
  }
  obs.wire_perms.assign(static_cast<size_t>(n), forward);
  obs.wire_perms.push_back(Permutation::identity(copies));
  obs.snapshots_first = true;
  obs.prefactor = 1.0;
  obs.validate();
  return obs;
}

// Commutator-type correlator observable: four copies of N system wires plus
// an ancilla wire, per-copy factors (X_N Z_a, Z_1 X_a, X_N X_a, Z_1 Z_a),
// system wires cycled 1 -> 2 -> 3 -> 4.  Copies 1 and 4 take snapshots of
// the site-1 preparation, copies 2 and 3 of the site-N preparation.
inline ObservableSpec commutator_type_observable(int n) {
  if (n < 2) {
    throw std::invalid_argument("commutator_type_observable: need n >= 2");
  }
  ObservableSpec obs;
  obs.copies = 4;
  obs.num_wires = n + 1;
  auto make = [n](char system_letter, int system_site, char ancilla_letter) {
    std::string letters(static_cast<size_t>(n + 1), 'I');
    letters[static_cast<size_t>(system_site - 1)] = system_letter;
    letters[static_cast<size_t>(n)] = ancilla_letter;
    return PauliString(letters, 1.0);
  };
  obs.copy_factors = {make('X', n, 'Z'), make('Z', 1, 'X'), make('X', n, 'X'),
                      make('Z', 1, 'Z')};
  Permutation forward = Permutation::identity(4);
  for (int i = 0; i < 4; ++i) {
    forward.images[static_cast<size_t>(i)] = (i + 1) % 4;
  }
  obs.wire_perms.assign(static_cast<size_t>(n), forward);
  obs.wire_perms.push_back(Permutation::identity(4));
  obs.snapshots_first = true;
  obs.prefactor = 1.0;
  obs.validate();
  return obs;
}

// --- Estimators -------------------------------------------------------------

inline EstimatorResult estimate_c4k_multibell(const Shadow& shadow,
                                              const PauliString& w,
                                              const PauliString& v, int k,
                                              const EstimatorMode& mode) {
  int n = w.num_qubits;
  if (v.num_qubits != n || shadow.num_qubits != 2 * n || shadow.n != n) {
    throw std::invalid_argument("estimate_c4k_multibell: shadow/W/V mismatch");
  }
  detail::require_disjoint(w, v);
  uint64_t count = shadow.snapshots.size();
  int copies = 2 * k;
  if (count < static_cast<uint64_t>(copies)) {
    throw std::invalid_argument("estimate_c4k_multibell: K < 2k");
  }
  ObservableSpec obs = multibell_observable(w, v, k);
  detail::CompiledObservable compiled = detail::compile(obs);
  double dim = static_cast<double>(int64_t(1) << n);
  double scale = std::pow(dim, 2 * k - 1);

  EstimatorResult result;
  result.protocol = "multi_bell";
  result.k = k;
  result.t = shadow.t;
  result.subsampled = !mode.exhaustive;
  result.seed = mode.seed;
  if (mode.exhaustive) {
    cplx mean;
    if (k == 1) {
      detail::LabelHistogram hist = detail::histogram_of(shadow);
      mean = detail::pair_sum_hist(compiled, hist) /
             detail::falling_dbl(count, 2);
    } else {
      std::vector<std::vector<uint8_t>> labels = detail::all_labels(shadow);
      mean = detail::tuple_sum_direct(compiled, labels, copies) /
             detail::falling_dbl(count, copies);
    }
    result.value = scale * mean;
    result.num_terms = binomial_u64(count, static_cast<uint64_t>(copies)) *
                       factorial_u64(copies);
  } else {
    std::vector<std::vector<uint8_t>> labels = detail::all_labels(shadow);
    cplx mean = detail::tuple_mean_subsampled(compiled, labels, copies,
                                              mode.num_draws, mode.seed, false);
    result.value = scale * mean;
    result.num_terms = mode.num_draws;
  }
  return result;
}

inline EstimatorResult estimate_c4_mixed(const Shadow& shadow,
                                         const PauliString& w,
                                         const EstimatorMode& mode) {
  int n = shadow.num_qubits;
  if (w.num_qubits != n || shadow.n != n) {
    throw std::invalid_argument("estimate_c4_mixed: shadow/W mismatch");
  }
  detail::require_hermitian_probe(w, "estimate_c4_mixed");
  if (w.letters[static_cast<size_t>(n - 1)] != 'I') {
    throw std::invalid_argument(
        "estimate_c4_mixed: W must avoid the input-state site");
  }
  uint64_t count = shadow.snapshots.size();
  if (count < 2) {
    throw std::invalid_argument("estimate_c4_mixed: K < 2");
  }
  ObservableSpec obs = mixed_cycle_observable(w, 2);
  detail::CompiledObservable compiled = detail::compile(obs);
  double dim = static_cast<double>(int64_t(1) << n);

  EstimatorResult result;
  result.protocol = "mixed";
  result.k = 1;
  result.t = shadow.t;
  result.subsampled = !mode.exhaustive;
  result.seed = mode.seed;
  cplx mean;
  if (mode.exhaustive) {
    detail::LabelHistogram hist = detail::histogram_of(shadow);
    mean =
        detail::pair_sum_hist(compiled, hist) / detail::falling_dbl(count, 2);
    result.num_terms = binomial_u64(count, 2);
  } else {
    std::vector<std::vector<uint8_t>> labels = detail::all_labels(shadow);
    mean = detail::tuple_mean_subsampled(compiled, labels, 2, mode.num_draws,
                                         mode.seed, false);
    result.num_terms = mode.num_draws;
  }
  result.value = dim * mean - 1.0;
  return result;
}

inline EstimatorResult estimate_L8_mixed(const Shadow& shadow,
                                         const PauliString& w,
                                         const EstimatorMode& mode) {
  int n = shadow.num_qubits;
  if (w.num_qubits != n || shadow.n != n) {
    throw std::invalid_argument("estimate_L8_mixed: shadow/W mismatch");
  }
  detail::require_hermitian_probe(w, "estimate_L8_mixed");
  if (w.letters[static_cast<size_t>(n - 1)] != 'I') {
    throw std::invalid_argument(
        "estimate_L8_mixed: W must avoid the input-state site");
  }
  uint64_t count = shadow.snapshots.size();
  if (count < 4) {
    throw std::invalid_argument("estimate_L8_mixed: K < 4");
  }
  ObservableSpec obs = mixed_cycle_observable(w, 4);
  detail::CompiledObservable compiled = detail::compile(obs);
  double dim = static_cast<double>(int64_t(1) << n);

  EstimatorResult result;
  result.protocol = "mixed_l8";
  result.k = 2;
  result.t = shadow.t;
  result.subsampled = !mode.exhaustive;
  result.seed = mode.seed;
  cplx mean;
  if (mode.exhaustive) {
    detail::LabelHistogram hist = detail::histogram_of(shadow);
    uint64_t classes = hist.labels.size();
    // Both paths are exact; pick whichever enumerates fewer tuples.
    double hist_work = detail::falling_dbl(classes + 3, 4) / 24.0;
    double direct_work = static_cast<double>(binomial_u64(count, 4));
    if (hist_work <= direct_work) {
      mean = detail::quad_sum_hist_cyclic(compiled, hist) /
             detail::falling_dbl(count, 4);
    } else {
      std::vector<std::vector<uint8_t>> labels = detail::all_labels(shadow);
      mean = detail::tuple_sum_direct(compiled, labels, 4) /
             detail::falling_dbl(count, 4);
    }
    result.num_terms = binomial_u64(count, 4) * 6;
  } else {
    std::vector<std::vector<uint8_t>> labels = detail::all_labels(shadow);
    mean = detail::tuple_mean_subsampled(compiled, labels, 4, mode.num_draws,
                                         mode.seed, true);
    result.num_terms = mode.num_draws;
  }
  result.value = dim * dim * dim * mean;
  return result;
}

inline EstimatorResult estimate_c8_mixed(const Shadow& shadow,
                                         const PauliString& w,
                                         const EstimatorMode& mode) {
  EstimatorResult l8 = estimate_L8_mixed(shadow, w, mode);
  EstimatorResult c4 = estimate_c4_mixed(shadow, w, mode);
  EstimatorResult result;
  result.protocol = "mixed";
  result.k = 2;
  result.t = shadow.t;
  result.value = l8.value - 4.0 * c4.value - 3.0;
  result.num_terms = l8.num_terms + c4.num_terms;
  result.subsampled = !mode.exhaustive;
  result.seed = mode.seed;
  return result;
}

inline EstimatorResult estimate_c4k_single_bell(const Shadow& shadow, int k,
                                                const EstimatorMode& mode) {
  int n = shadow.n;
  if (shadow.num_qubits != n + 1) {
    throw std::invalid_argument(
        "estimate_c4k_single_bell: shadow must hold n+1 qubits");
  }
  uint64_t count = shadow.snapshots.size();
  int copies = 2 * k;
  if (count < static_cast<uint64_t>(copies)) {
    throw std::invalid_argument("estimate_c4k_single_bell: K < 2k");
  }
  ObservableSpec obs = single_bell_observable(n, k);
  detail::CompiledObservable compiled = detail::compile(obs);
  double dim = static_cast<double>(int64_t(1) << n);
  double scale = std::pow(dim, 2 * k - 1);

  EstimatorResult result;
  result.protocol = "single_bell";
  result.k = k;
  result.t = shadow.t;
  result.subsampled = !mode.exhaustive;
  result.seed = mode.seed;
  cplx mean;
  if (mode.exhaustive) {
    if (k == 1) {
      detail::LabelHistogram hist = detail::histogram_of(shadow);
      mean = detail::pair_sum_hist(compiled, hist) /
             detail::falling_dbl(count, 2);
      result.num_terms = binomial_u64(count, 2);
    } else if (k == 2) {
      detail::LabelHistogram hist = detail::histogram_of(shadow);
      uint64_t classes = hist.labels.size();
      double hist_work = detail::falling_dbl(classes + 3, 4) / 24.0;
      double direct_work = static_cast<double>(binomial_u64(count, 4));
      if (hist_work <= direct_work) {
        mean = detail::quad_sum_hist_cyclic(compiled, hist) /
               detail::falling_dbl(count, 4);
      } else {
        std::vector<std::vector<uint8_t>> labels = detail::all_labels(shadow);
        mean = detail::tuple_sum_direct(compiled, labels, 4) /
               detail::falling_dbl(count, 4);
      }
      result.num_terms = binomial_u64(count, 4) * 6;
    } else {
      std::vector<std::vector<uint8_t>> labels = detail::all_labels(shadow);
      mean = detail::tuple_sum_direct(compiled, labels, copies) /
             detail::falling_dbl(count, copies);
      result.num_terms = binomial_u64(count, static_cast<uint64_t>(copies)) *
                         factorial_u64(copies);
    }
  } else {
    std::vector<std::vector<uint8_t>> labels = detail::all_labels(shadow);
    mean = detail::tuple_mean_subsampled(compiled, labels, copies,
                                         mode.num_draws, mode.seed, k == 2);
    result.num_terms = mode.num_draws;
  }
  result.value = scale * mean;
  return result;
}

// Estimator for the commutator-type correlator from two shadows: copies
// (1,4) range over ordered snapshot pairs of shadow_a, copies (2,3) over
// ordered pairs of shadow_b.  The per-wire 4-cycle chain splits between the
// two pair sums, Tr{f1 A1 f2 A2 f3 A3 f4 A4} = Tr{(f4 A4 f1 A1)(f2 A2 f3 A3)},
// so each shadow contributes an independent wire-tensor and the double pair
// sum collapses to one inner product of those tensors.
inline EstimatorResult estimate_commutator_type(const Shadow& shadow_a,
                                                const Shadow& shadow_b,
                                                bool swap_pair_roles = false) {
  int n = shadow_a.n;
  if (shadow_b.n != n || shadow_a.num_qubits != n + 1 ||
      shadow_b.num_qubits != n + 1 || shadow_a.t != shadow_b.t) {
    throw std::invalid_argument("estimate_commutator_type: shadow mismatch");
  }
  uint64_t count_a = shadow_a.snapshots.size();
  uint64_t count_b = shadow_b.snapshots.size();
  if (count_a < 2 || count_b < 2) {
    throw std::invalid_argument("estimate_commutator_type: K < 2");
  }
  if (n > 7) {
    throw std::invalid_argument("estimate_commutator_type: n too large");
  }
  ObservableSpec obs = commutator_type_observable(n);
  detail::CompiledObservable compiled = detail::compile(obs);
  const std::array<detail::m22, 6>& factors = detail::factor_table();
  int wires = n + 1;

  // Per wire, the half-chain matrix of two adjacent links of the 4-cycle
  // chain Tr{(f1 A1)(f2 A2)(f3 A3)(f4 A4)}: side A owns (f4 A4)(f1 A1),
  // side B owns (f2 A2)(f3 A3).  The ancilla wire has no cycle and
  // contributes scalar factors Tr{f A} per slot instead.
  auto link = [&](int wire, int slot, int label) {
    return detail::mul(
        factors[static_cast<size_t>(label)],
        compiled.letters[static_cast<size_t>(slot * wires + wire)]);
  };

  // Sum over ordered snapshot pairs of weight * (tensor over system wires
  // of the flattened half-chain) * (product of ancilla scalars).  The pair
  // element enumerated first fills early_slot, the other late_slot; for
  // side A {early, late} = {slot 0, slot 3}, for side B {slot 1, slot 2}.
  auto side_tensor = [&](const Shadow& shadow, bool side_a, int early_slot,
                         int late_slot, bool transpose_pairing) {
    detail::LabelHistogram hist = detail::histogram_of(shadow);
    size_t tensor_size = size_t(1) << (2 * n); // 4^n
    std::vector<cplx> acc(tensor_size, cplx(0.0, 0.0));
    std::vector<cplx> term(tensor_size);
    for (size_t p = 0; p < hist.labels.size(); ++p) {
      for (size_t q = 0; q < hist.labels.size(); ++q) {
        uint64_t weight = (p == q) ? hist.counts[p] * (hist.counts[p] - 1)
                                   : hist.counts[p] * hist.counts[q];
        if (weight == 0) {
          continue;
        }
        const std::vector<uint8_t>& early = hist.labels[p];
        const std::vector<uint8_t>& late = hist.labels[q];
        auto label_in_slot = [&](int slot, int wire) -> int {
          const std::vector<uint8_t>& src = (slot == early_slot) ? early : late;
          return src[static_cast<size_t>(wire)];
        };
        cplx ancilla_scale =
            detail::tr(link(n, early_slot, label_in_slot(early_slot, n))) *
            detail::tr(link(n, late_slot, label_in_slot(late_slot, n)));
        size_t filled = 1;
        term[0] = static_cast<double>(weight) * ancilla_scale;
        for (int wire = 0; wire < n; ++wire) {
          detail::m22 half =
              side_a ? detail::mul(link(wire, 3, label_in_slot(3, wire)),
                                   link(wire, 0, label_in_slot(0, wire)))
                     : detail::mul(link(wire, 1, label_in_slot(1, wire)),
                                   link(wire, 2, label_in_slot(2, wire)));
          std::array<cplx, 4> flat =
              transpose_pairing
                  ? std::array<cplx, 4>{half.e00, half.e10, half.e01, half.e11}
                  : std::array<cplx, 4>{half.e00, half.e01, half.e10,
                                        half.e11};
          for (size_t i = filled; i-- > 0;) {
            cplx base = term[i];
            for (size_t digit = 0; digit < 4; ++digit) {
              term[i * 4 + digit] = base * flat[digit];
            }
          }
          filled *= 4;
        }
        for (size_t i = 0; i < tensor_size; ++i) {
          acc[i] += term[i];
        }
      }
    }
    return acc;
  };

  // swap_pair_roles reverses which element of each ordered pair feeds which
  // slot; the summed value is unchanged because the sum runs over all
  // ordered pairs either way.
  std::vector<cplx> va =
      side_tensor(shadow_a, true, swap_pair_roles ? 3 : 0,
                  swap_pair_roles ? 0 : 3, false);
  std::vector<cplx> vb =
      side_tensor(shadow_b, false, swap_pair_roles ? 2 : 1,
                  swap_pair_roles ? 1 : 2, true);
  cplx total(0.0, 0.0);
  for (size_t i = 0; i < va.size(); ++i) {
    total += va[i] * vb[i];
  }
  total *= compiled.scale;

  double dim = static_cast<double>(int64_t(1) << n);
  double pairs_a = detail::falling_dbl(count_a, 2);
  double pairs_b = detail::falling_dbl(count_b, 2);
  EstimatorResult result;
  result.protocol = "commutator_type";
  result.k = 2;
  result.t = shadow_a.t;
  result.value = dim * dim * dim * total / (pairs_a * pairs_b);
  result.num_terms = binomial_u64(count_a, 2) * binomial_u64(count_b, 2) * 4;
  result.subsampled = false;
  result.seed = 0;
  return result;
}

} // namespace otoc
