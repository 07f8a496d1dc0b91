#pragma once

// Brute-force oracles for every correlator the estimators target: the
// 4k-point OTOC over the maximally mixed state and over arbitrary states,
// commutator Schatten norms, the mixed-protocol leading term L_8, late-time
// Haar averages via Weingarten sums, and the commutator-type correlator.
// Everything here is straightforward dense algebra, deliberately sharing no
// code with the estimator engine it validates.

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "otoc/dynamics.hpp"
#include "otoc/qlinalg.hpp"

namespace otoc {

inline void require_disjoint_supports(const PauliString& w,
                                      const PauliString& v) {
  if (w.num_qubits != v.num_qubits) {
    throw std::invalid_argument("pauli supports: qubit count mismatch");
  }
  for (int i = 0; i < w.num_qubits; ++i) {
    if (w.letters[static_cast<size_t>(i)] != 'I' &&
        v.letters[static_cast<size_t>(i)] != 'I') {
      throw std::invalid_argument(
          "otoc: W and V must act on disjoint qubit sets");
    }
  }
}

// (1/d) Tr{(W_u^dagger V^dagger W_u V)^k} with W_u = u^dagger W u.  Generic
// over the conjugating unitary so Haar benchmarks can reuse it.
inline cplx otoc_4k_from_unitary(const cmat& u, const PauliString& w,
                                 const PauliString& v, int k) {
  if (k < 1) {
    throw std::invalid_argument("otoc_4k: k must be >= 1");
  }
  cmat wt = u.adjoint() * pauli_matrix(w) * u;
  cmat vm = pauli_matrix(v);
  cmat block = wt.adjoint() * vm.adjoint() * wt * vm;
  cmat acc = block;
  for (int i = 1; i < k; ++i) {
    acc = acc * block;
  }
  return acc.trace() / static_cast<double>(u.rows());
}

inline cplx otoc_4k(const HamiltonianSpectrum& spec, double t,
                    const PauliString& w, const PauliString& v, int k) {
  require_disjoint_supports(w, v);
  return otoc_4k_from_unitary(evolution_operator(spec, t).matrix, w, v, k);
}

// Tr{rho (W(t)^dagger V^dagger W(t) V)^k} for an arbitrary state rho.
inline cplx general_otoc(const HamiltonianSpectrum& spec, double t,
                         const PauliString& w, const PauliString& v, int k,
                         const cmat& rho) {
  if (k < 1) {
    throw std::invalid_argument("general_otoc: k must be >= 1");
  }
  if (std::abs(rho.trace() - 1.0) > 1e-8 ||
      (rho - rho.adjoint()).norm() > 1e-8) {
    throw std::invalid_argument("general_otoc: rho is not a state");
  }
  Eigen::SelfAdjointEigenSolver<cmat> es(rho);
  if (es.eigenvalues().minCoeff() < -1e-8) {
    throw std::invalid_argument("general_otoc: rho is not positive semidefinite");
  }
  cmat u = evolution_operator(spec, t).matrix;
  cmat wt = u.adjoint() * pauli_matrix(w) * u;
  cmat vm = pauli_matrix(v);
  cmat block = wt.adjoint() * vm.adjoint() * wt * vm;
  cmat acc = block;
  for (int i = 1; i < k; ++i) {
    acc = acc * block;
  }
  return (rho * acc).trace();
}

// Schatten 2n-norm of [W(t), V] from the eigenvalues of |[W(t),V]|^2.
inline double commutator_schatten_norm(const HamiltonianSpectrum& spec,
                                       double t, const PauliString& w,
                                       const PauliString& v, int n) {
  if (n < 1) {
    throw std::invalid_argument("commutator_schatten_norm: n must be >= 1");
  }
  cmat u = evolution_operator(spec, t).matrix;
  cmat wt = u.adjoint() * pauli_matrix(w) * u;
  cmat vm = pauli_matrix(v);
  cmat comm = wt * vm - vm * wt;
  Eigen::SelfAdjointEigenSolver<cmat> es(comm.adjoint() * comm);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double lam = std::max(0.0, es.eigenvalues()[i]);
    sum += std::pow(lam, n);
  }
  return std::pow(sum, 1.0 / (2.0 * n));
}

// Coefficients b_k(n) of Tr{|[W(t),V]|^{2n}} = d sum_k b_k(n) Re C_4k(t).
// Derived from |[W,V]|^2 = 2I - B - B^{-1} with B = (W(t)V)^2 and
// (1/d)Tr{B^m} = C_4m(t): expanding (2 - z - 1/z)^n = sum_m (-1)^m C(2n, n-m) z^m
// gives b_0 = C(2n, n) and b_k = 2 (-1)^k C(2n, n-k).  The eigenvalue-based
// Schatten norm above cross-checks this in tests before anything trusts it.
inline std::vector<double> expansion_coefficients(int n) {
  if (n < 1 || n > 6) {
    throw std::invalid_argument("expansion_coefficients: n out of range");
  }
  std::vector<double> b(static_cast<size_t>(n) + 1);
  b[0] = binomial_dbl(static_cast<uint64_t>(2 * n), static_cast<uint64_t>(n));
  for (int k = 1; k <= n; ++k) {
    double sign = (k % 2 == 0) ? 2.0 : -2.0;
    b[static_cast<size_t>(k)] =
        sign * binomial_dbl(static_cast<uint64_t>(2 * n),
                            static_cast<uint64_t>(n - k));
  }
  return b;
}

// L_8(t) = d^3 Tr{(rho_V W)^4} with the mixed-protocol conventions W = Z_1.
inline double leading_term_L8(int n, const HamiltonianSpectrum& spec, double t) {
  cmat rho_v = prepare_mixed_protocol_state(n, spec, t);
  cmat w = pauli_matrix(PauliString::single(n, 1, 'Z'));
  cmat rw = rho_v * w;
  double d = static_cast<double>(int64_t(1) << n);
  cplx val = (rw * rw * rw * rw).trace() * d * d * d;
  if (std::abs(val.imag()) > 1e-9) {
    throw std::runtime_error("leading_term_L8: non-real trace");
  }
  return val.real();
}

// Average OTOC under Haar evolution: the Weingarten sum over permutation
// pairs whose cycles are all even,
//   avg C_4k = (1/d) sum_{pi, sigma} C_{pi,sigma} d^{f(pi) + f(sigma')},
// with sigma' = sigma0 o sigma, sigma0 = (1, 2, ..., 2k).
inline double late_time_haar_average(int k, int d) {
  if (k != 1 && k != 2) {
    throw std::invalid_argument("late_time_haar_average: k must be 1 or 2");
  }
  if (d < 2 * k) {
    throw std::invalid_argument("late_time_haar_average: need d >= 2k");
  }
  int copies = 2 * k;
  WeingartenTable wg = weingarten_matrix(copies, d);
  std::vector<int> cyc(static_cast<size_t>(copies));
  std::iota(cyc.begin(), cyc.end(), 1);
  Permutation sigma0 = Permutation::from_cycles(copies, {cyc});
  double sum = 0.0;
  for (size_t i = 0; i < wg.perms.size(); ++i) {
    if (wg.perms[i].has_odd_cycle()) {
      continue;
    }
    for (size_t j = 0; j < wg.perms.size(); ++j) {
      Permutation sigma_prime = compose(sigma0, wg.perms[j]);
      if (sigma_prime.has_odd_cycle()) {
        continue;
      }
      int f = wg.perms[i].num_cycles() + sigma_prime.num_cycles();
      sum += wg.coeffs(static_cast<Eigen::Index>(i),
                       static_cast<Eigen::Index>(j)) *
             std::pow(static_cast<double>(d), f);
    }
  }
  return sum / static_cast<double>(d);
}

// C_ct(t) = <W(t) W V(t) V W(t) V V(t) W> over the maximally mixed state,
// with W = Z_1 and V = X_N.  Generic over the conjugating unitary.
inline cplx commutator_type_from_unitary(const cmat& u, int n) {
  cmat w = pauli_matrix(PauliString::single(n, 1, 'Z'));
  cmat v = pauli_matrix(PauliString::single(n, n, 'X'));
  cmat wt = u.adjoint() * w * u;
  cmat vt = u.adjoint() * v * u;
  cplx tr = (wt * w * vt * v * wt * v * vt * w).trace();
  return tr / static_cast<double>(u.rows());
}

inline cplx commutator_type_correlator(int n, const HamiltonianSpectrum& spec,
                                       double t) {
  if (n < 2) {
    throw std::invalid_argument("commutator_type_correlator: need n >= 2");
  }
  return commutator_type_from_unitary(evolution_operator(spec, t).matrix, n);
}

} // namespace otoc
