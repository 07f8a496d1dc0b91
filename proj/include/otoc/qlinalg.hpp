#pragma once

// Dense complex linear algebra on few-qubit registers: Pauli strings,
// permutation operators with cycle-factorized traces, derangements, the
// Weingarten matrix, and Haar-random unitaries.
//
// Conventions pinned here and relied on everywhere else:
//   * qubit 1 is the leftmost (most significant) tensor factor;
//   * the permutation operator acts as T_pi |a_1 ... a_k> = |a_pi(1) ... a_pi(k)>;
//   * composition (p o q)(i) = p(q(i)), i.e. q acts first.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "otoc/rng.hpp"

namespace otoc {

using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using rmat = Eigen::MatrixXd;

inline constexpr cplx ci{0.0, 1.0};

inline cmat pauli_i2() { return cmat::Identity(2, 2); }

inline cmat pauli_x() {
  cmat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline cmat pauli_y() {
  cmat m(2, 2);
  m << cplx(0, 0), cplx(0, -1), cplx(0, 1), cplx(0, 0);
  return m;
}

inline cmat pauli_z() {
  cmat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

inline cmat pauli_letter(char c) {
  switch (c) {
  case 'I':
    return pauli_i2();
  case 'X':
    return pauli_x();
  case 'Y':
    return pauli_y();
  case 'Z':
    return pauli_z();
  default:
    throw std::invalid_argument(std::string("unknown Pauli letter: ") + c);
  }
}

inline cmat kron(const cmat& a, const cmat& b) {
  cmat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// StateVector

struct StateVector {
  int num_qubits = 0;
  cvec amplitudes;

  static StateVector basis_state(int n, uint64_t bits) {
    if (n < 1 || n > 30) {
      throw std::invalid_argument("basis_state: qubit count out of range");
    }
    StateVector s;
    s.num_qubits = n;
    s.amplitudes = cvec::Zero(int64_t(1) << n);
    s.amplitudes[static_cast<Eigen::Index>(bits)] = 1.0;
    return s;
  }

  Eigen::Index dim() const { return amplitudes.size(); }

  bool is_normalized(double tol = 1e-10) const {
    return std::abs(amplitudes.squaredNorm() - 1.0) <= tol;
  }
};

// ---------------------------------------------------------------------------
// PauliString

struct PauliString {
  int num_qubits = 0;
  std::string letters; // over {I, X, Y, Z}, letters[0] = qubit 1
  cplx phase{1.0, 0.0};

  PauliString() = default;

  PauliString(std::string ls, cplx ph = cplx(1.0, 0.0))
      : num_qubits(static_cast<int>(ls.size())), letters(std::move(ls)),
        phase(ph) {
    for (char c : letters) {
      if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z') {
        throw std::invalid_argument("PauliString: invalid letter");
      }
    }
  }

  // Single non-identity letter at the given site (site labels are 1-based).
  static PauliString single(int n, int site, char letter) {
    if (site < 1 || site > n) {
      throw std::invalid_argument("PauliString::single: site out of range");
    }
    std::string ls(static_cast<size_t>(n), 'I');
    ls[static_cast<size_t>(site - 1)] = letter;
    return PauliString(std::move(ls));
  }

  bool is_identity_letters() const {
    return letters.find_first_not_of('I') == std::string::npos;
  }

  int count_y() const {
    return static_cast<int>(std::count(letters.begin(), letters.end(), 'Y'));
  }

  // Entrywise complex conjugate: Y* = -Y, the rest are real.
  PauliString conjugated() const {
    PauliString p = *this;
    p.phase = std::conj(p.phase) * ((count_y() % 2 == 0) ? 1.0 : -1.0);
    return p;
  }

  // Transpose: Y^T = -Y, the rest are symmetric.
  PauliString transposed() const {
    PauliString p = *this;
    p.phase *= (count_y() % 2 == 0) ? 1.0 : -1.0;
    return p;
  }
};

inline cmat pauli_matrix(const PauliString& p) {
  cmat m = cmat::Identity(1, 1);
  for (char c : p.letters) {
    m = kron(m, pauli_letter(c));
  }
  return p.phase * m;
}

// ---------------------------------------------------------------------------
// Permutation

struct Permutation {
  // images[i] = pi(i), zero-based.
  std::vector<int> images;

  Permutation() = default;

  explicit Permutation(std::vector<int> img) : images(std::move(img)) {
    std::vector<bool> seen(images.size(), false);
    for (int v : images) {
      if (v < 0 || v >= static_cast<int>(images.size()) || seen[v]) {
        throw std::invalid_argument("Permutation: images must be a bijection");
      }
      seen[v] = true;
    }
  }

  static Permutation identity(int k) {
    std::vector<int> img(static_cast<size_t>(k));
    std::iota(img.begin(), img.end(), 0);
    return Permutation(std::move(img));
  }

  // Cycles given with 1-based labels: (c1, c2, ...) maps
  // c1 -> c2 -> ... -> c1.
  static Permutation from_cycles(int k, const std::vector<std::vector<int>>& cycles) {
    std::vector<int> img(static_cast<size_t>(k));
    std::iota(img.begin(), img.end(), 0);
    for (const auto& cyc : cycles) {
      for (size_t i = 0; i < cyc.size(); ++i) {
        int from = cyc[i] - 1;
        int to = cyc[(i + 1) % cyc.size()] - 1;
        if (from < 0 || from >= k || to < 0 || to >= k) {
          throw std::invalid_argument("from_cycles: label out of range");
        }
        img[static_cast<size_t>(from)] = to;
      }
    }
    return Permutation(std::move(img));
  }

  int size() const { return static_cast<int>(images.size()); }

  int operator()(int i) const { return images[static_cast<size_t>(i)]; }

  Permutation inverse() const {
    std::vector<int> img(images.size());
    for (size_t i = 0; i < images.size(); ++i) {
      img[static_cast<size_t>(images[i])] = static_cast<int>(i);
    }
    return Permutation(std::move(img));
  }

  // Cycles in canonical order: each starts at its smallest member, cycles
  // sorted by that member.
  std::vector<std::vector<int>> cycles() const {
    std::vector<std::vector<int>> out;
    std::vector<bool> seen(images.size(), false);
    for (int start = 0; start < size(); ++start) {
      if (seen[static_cast<size_t>(start)]) {
        continue;
      }
      std::vector<int> cyc;
      int j = start;
      while (!seen[static_cast<size_t>(j)]) {
        seen[static_cast<size_t>(j)] = true;
        cyc.push_back(j);
        j = images[static_cast<size_t>(j)];
      }
      out.push_back(std::move(cyc));
    }
    return out;
  }

  int num_cycles() const { return static_cast<int>(cycles().size()); }

  bool has_fixed_point() const {
    for (int i = 0; i < size(); ++i) {
      if (images[static_cast<size_t>(i)] == i) {
        return true;
      }
    }
    return false;
  }

  bool has_odd_cycle() const {
    for (const auto& c : cycles()) {
      if (c.size() % 2 == 1) {
        return true;
      }
    }
    return false;
  }

  bool operator==(const Permutation& o) const { return images == o.images; }
};

// (p o q)(i) = p(q(i)): q acts first.
inline Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("compose: size mismatch");
  }
  std::vector<int> img(static_cast<size_t>(p.size()));
  for (int i = 0; i < p.size(); ++i) {
    img[static_cast<size_t>(i)] = p(q(i));
  }
  return Permutation(std::move(img));
}

// All of S_k in lexicographic order of the image sequence.
inline std::vector<Permutation> all_permutations(int k) {
  if (k < 1 || k > 8) {
    throw std::invalid_argument("all_permutations: k out of supported range");
  }
  std::vector<int> img(static_cast<size_t>(k));
  std::iota(img.begin(), img.end(), 0);
  std::vector<Permutation> out;
  do {
    out.push_back(Permutation(img));
  } while (std::next_permutation(img.begin(), img.end()));
  return out;
}

inline std::vector<Permutation> derangements(int k) {
  if (k < 1 || k > 6) {
    throw std::invalid_argument("derangements: k out of supported range");
  }
  std::vector<Permutation> out;
  for (const auto& p : all_permutations(k)) {
    if (!p.has_fixed_point()) {
      out.push_back(p);
    }
  }
  return out;
}

// Dense T_pi on k registers of dimension local_dim; register 1 is the most
// significant digit.  T_pi |a_1 ... a_k> = |a_pi(1) ... a_pi(k)>.
inline cmat permutation_operator(const Permutation& perm, int local_dim) {
  if (local_dim < 2) {
    throw std::invalid_argument("permutation_operator: local_dim must be >= 2");
  }
  int k = perm.size();
  int64_t dim = 1;
  for (int i = 0; i < k; ++i) {
    dim *= local_dim;
  }
  cmat out = cmat::Zero(dim, dim);
  std::vector<int> digits(static_cast<size_t>(k));
  for (int64_t col = 0; col < dim; ++col) {
    int64_t rest = col;
    for (int j = k - 1; j >= 0; --j) {
      digits[static_cast<size_t>(j)] = static_cast<int>(rest % local_dim);
      rest /= local_dim;
    }
    int64_t row = 0;
    for (int j = 0; j < k; ++j) {
      row = row * local_dim + digits[static_cast<size_t>(perm(j))];
    }
    out(row, col) = 1.0;
  }
  return out;
}

// Tr{T_pi A_1 x ... x A_k} as a product of cycle traces, never building T_pi.
// Writing the trace out gives sum_b prod_j (A_j)_{b_j, b_pi(j)}, so the cycle
// (c1 -> c2 -> ... -> cm) under pi contributes Tr{A_c1 A_c2 ... A_cm}: the
// chain follows pi forward.  Pinned against the dense operator in tests.
inline cplx trace_with_permutation(const Permutation& perm,
                                   const std::vector<cmat>& ops) {
  if (static_cast<int>(ops.size()) != perm.size()) {
    throw std::invalid_argument("trace_with_permutation: arity mismatch");
  }
  for (const auto& m : ops) {
    if (m.rows() != ops[0].rows() || m.cols() != ops[0].cols() ||
        m.rows() != m.cols()) {
      throw std::invalid_argument("trace_with_permutation: dimension mismatch");
    }
  }
  cplx result = 1.0;
  for (const auto& cyc : perm.cycles()) {
    int start = cyc[0];
    cmat prod = ops[static_cast<size_t>(start)];
    for (int j = perm(start); j != start; j = perm(j)) {
      prod = prod * ops[static_cast<size_t>(j)];
    }
    result *= prod.trace();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Weingarten matrix

struct WeingartenTable {
  int k = 0;
  int d = 0;
  std::vector<Permutation> perms; // lexicographic order, indexes rows/cols
  rmat gram;                      // gram(i, j) = d^{f(p_i o p_j)}
  rmat coeffs;                    // inverse of gram
};

inline WeingartenTable weingarten_matrix(int k, int d) {
  if (k < 1 || k > 4) {
    throw std::invalid_argument("weingarten_matrix: k out of supported range");
  }
  if (d < k) {
    throw std::invalid_argument("weingarten_matrix: need d >= k (singular Gram)");
  }
  WeingartenTable t;
  t.k = k;
  t.d = d;
  t.perms = all_permutations(k);
  int m = static_cast<int>(t.perms.size());
  t.gram.resize(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      int f = compose(t.perms[static_cast<size_t>(i)],
                      t.perms[static_cast<size_t>(j)])
                  .num_cycles();
      t.gram(i, j) = std::pow(static_cast<double>(d), f);
    }
  }
  t.coeffs = t.gram.inverse();
  return t;
}

// ---------------------------------------------------------------------------
// Haar sampling and generic dense helpers

// Ginibre matrix -> QR -> fix the phases of R's diagonal (Mezzadri's recipe),
// which makes the distribution exactly Haar.
inline cmat haar_unitary(int d, RandomStream& rng) {
  if (d < 2) {
    throw std::invalid_argument("haar_unitary: d must be >= 2");
  }
  cmat a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      a(i, j) = cplx(rng.normal(), rng.normal()) / std::sqrt(2.0);
    }
  }
  Eigen::HouseholderQR<cmat> qr(a);
  cmat q = qr.householderQ();
  cmat r = qr.matrixQR();
  for (int i = 0; i < d; ++i) {
    cplx rii = r(i, i);
    double mag = std::abs(rii);
    cplx ph = (mag > 0.0) ? rii / mag : cplx(1.0, 0.0);
    q.col(i) *= ph;
  }
  return q;
}

// Random density matrix GG^dagger / Tr (test and audit plumbing).
inline cmat random_density(int d, RandomStream& rng) {
  cmat g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      g(i, j) = cplx(rng.normal(), rng.normal());
    }
  }
  cmat rho = g * g.adjoint();
  return rho / rho.trace();
}

// Partial trace keeping the listed 1-based qubits (in their original order).
inline cmat partial_trace_keep(const cmat& rho, int num_qubits,
                               const std::vector<int>& keep) {
  if (rho.rows() != rho.cols() ||
      rho.rows() != (int64_t(1) << num_qubits)) {
    throw std::invalid_argument("partial_trace_keep: dimension mismatch");
  }
  std::vector<int> keep0;
  for (int q : keep) {
    if (q < 1 || q > num_qubits) {
      throw std::invalid_argument("partial_trace_keep: qubit out of range");
    }
    keep0.push_back(q - 1);
  }
  std::vector<int> drop0;
  for (int q = 0; q < num_qubits; ++q) {
    if (std::find(keep0.begin(), keep0.end(), q) == keep0.end()) {
      drop0.push_back(q);
    }
  }
  int nk = static_cast<int>(keep0.size());
  int nd = static_cast<int>(drop0.size());
  cmat out = cmat::Zero(int64_t(1) << nk, int64_t(1) << nk);
  for (int64_t r = 0; r < out.rows(); ++r) {
    for (int64_t c = 0; c < out.cols(); ++c) {
      cplx sum = 0.0;
      for (int64_t e = 0; e < (int64_t(1) << nd); ++e) {
        int64_t row = 0, col = 0;
        for (int b = 0; b < nk; ++b) {
          int64_t rb = (r >> (nk - 1 - b)) & 1;
          int64_t cb = (c >> (nk - 1 - b)) & 1;
          row |= rb << (num_qubits - 1 - keep0[static_cast<size_t>(b)]);
          col |= cb << (num_qubits - 1 - keep0[static_cast<size_t>(b)]);
        }
        for (int b = 0; b < nd; ++b) {
          int64_t eb = (e >> (nd - 1 - b)) & 1;
          row |= eb << (num_qubits - 1 - drop0[static_cast<size_t>(b)]);
          col |= eb << (num_qubits - 1 - drop0[static_cast<size_t>(b)]);
        }
        sum += rho(row, col);
      }
      out(r, c) = sum;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small combinatorics helpers

inline uint64_t binomial_u64(uint64_t n, uint64_t k) {
  if (k > n) {
    return 0;
  }
  k = std::min(k, n - k);
  uint64_t r = 1;
  for (uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
  }
  return r;
}

inline double binomial_dbl(uint64_t n, uint64_t k) {
  if (k > n) {
    return 0.0;
  }
  k = std::min(k, n - k);
  double r = 1.0;
  for (uint64_t i = 1; i <= k; ++i) {
    r *= static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

inline uint64_t factorial_u64(int n) {
  uint64_t r = 1;
  for (int i = 2; i <= n; ++i) {
    r *= static_cast<uint64_t>(i);
  }
  return r;
}

} // namespace otoc
