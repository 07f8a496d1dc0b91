#pragma once

// Mixed-field Ising chain on n qubits with open boundary, its exact
// eigendecomposition, evolution and Heisenberg operators, and the input
// states used by the measurement protocols.
//
//   H = -(1/E0) ( J sum_{i=1}^{n-1} Z_i Z_{i+1} + hx sum_i X_i + hz sum_i Z_i )
//
// The E0 normalization makes t dimensionless.  Qubit 1 is the most
// significant bit; ancillas are appended as the least significant factor.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "otoc/qlinalg.hpp"

namespace otoc {

struct IsingParams {
  double J = 1.0;
  double hx = 1.05;
  double hz = 0.5;
  double E0 = 1.0;

  static IsingParams defaults() {
    IsingParams p;
    p.E0 = std::sqrt(4.0 * p.J * p.J + 2.0 * p.hx * p.hx + 2.0 * p.hz * p.hz);
    return p;
  }
};

struct HamiltonianSpectrum {
  int num_qubits = 0;
  Eigen::VectorXd eigenvalues; // ascending
  cmat eigenvectors;           // columns

  Eigen::Index dim() const { return eigenvalues.size(); }
};

struct EvolutionOperator {
  double time = 0.0;
  cmat matrix;
};

inline cmat build_ising_hamiltonian(int n, const IsingParams& params) {
  if (n < 1 || n > 12) {
    throw std::invalid_argument("build_ising_hamiltonian: n out of range");
  }
  int64_t d = int64_t(1) << n;
  cmat h = cmat::Zero(d, d);
  // Sign of Z on 1-based qubit q for basis state s: bit 0 -> +1, bit 1 -> -1.
  auto zsign = [n](int64_t s, int q) -> double {
    return ((s >> (n - q)) & 1) ? -1.0 : 1.0;
  };
  for (int64_t s = 0; s < d; ++s) {
    double diag = 0.0;
    for (int q = 1; q < n; ++q) {
      diag += params.J * zsign(s, q) * zsign(s, q + 1);
    }
    for (int q = 1; q <= n; ++q) {
      diag += params.hz * zsign(s, q);
    }
    h(s, s) = diag;
    for (int q = 1; q <= n; ++q) {
      int64_t flipped = s ^ (int64_t(1) << (n - q));
      h(flipped, s) += params.hx;
    }
  }
  return -h / params.E0;
}

inline HamiltonianSpectrum diagonalize(const cmat& h, int num_qubits) {
  Eigen::SelfAdjointEigenSolver<cmat> solver(h);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("diagonalize: eigensolver failed");
  }
  HamiltonianSpectrum s;
  s.num_qubits = num_qubits;
  s.eigenvalues = solver.eigenvalues();
  s.eigenvectors = solver.eigenvectors();
  return s;
}

inline HamiltonianSpectrum ising_spectrum(int n, const IsingParams& params) {
  return diagonalize(build_ising_hamiltonian(n, params), n);
}

inline EvolutionOperator evolution_operator(const HamiltonianSpectrum& spec,
                                            double t) {
  cvec phases(spec.dim());
  for (Eigen::Index i = 0; i < spec.dim(); ++i) {
    phases[i] = std::exp(cplx(0.0, -spec.eigenvalues[i] * t));
  }
  EvolutionOperator u;
  u.time = t;
  u.matrix = spec.eigenvectors * phases.asDiagonal() *
             spec.eigenvectors.adjoint();
  return u;
}

// W(t) = U^dagger W U.
inline cmat heisenberg_operator(const PauliString& w,
                                const EvolutionOperator& u) {
  cmat wm = pauli_matrix(w);
  if (wm.rows() != u.matrix.rows()) {
    throw std::invalid_argument("heisenberg_operator: dimension mismatch");
  }
  return u.matrix.adjoint() * wm * u.matrix;
}

// ---------------------------------------------------------------------------
// Protocol input states.  Each state has a dense form (oracle computations)
// and, where the protocol samples it, a pure-state ensemble form; tests prove
// the two agree.

// rho_in = (1/2^{n-1}) I^{(n-1)} x |0><0| on the last qubit.
inline cmat mixed_protocol_input(int n) {
  if (n < 2) {
    throw std::invalid_argument("mixed_protocol_input: need n >= 2");
  }
  int64_t d = int64_t(1) << n;
  cmat rho = cmat::Zero(d, d);
  for (int64_t b = 0; b < (d >> 1); ++b) {
    rho(b << 1, b << 1) = 1.0 / static_cast<double>(d >> 1);
  }
  return rho;
}

// rho_V = U(t) rho_in U(t)^dagger.
inline cmat prepare_mixed_protocol_state(int n, const HamiltonianSpectrum& spec,
                                         double t) {
  EvolutionOperator u = evolution_operator(spec, t);
  return u.matrix * mixed_protocol_input(n) * u.matrix.adjoint();
}

// Uniform pure-state ensemble equivalent to rho_V: U(t)(|b> x |0>).
inline std::vector<StateVector>
mixed_protocol_ensemble(int n, const HamiltonianSpectrum& spec, double t) {
  EvolutionOperator u = evolution_operator(spec, t);
  std::vector<StateVector> out;
  int64_t half = int64_t(1) << (n - 1);
  for (int64_t b = 0; b < half; ++b) {
    StateVector s;
    s.num_qubits = n;
    s.amplitudes = u.matrix.col(b << 1);
    out.push_back(std::move(s));
  }
  return out;
}

// |Phi> on 2n qubits with U(t) on the first register:
// amplitudes[(j : i)] = U(j, i) / sqrt(d).
inline StateVector bell_dual_vector(int n, const HamiltonianSpectrum& spec,
                                    double t) {
  EvolutionOperator u = evolution_operator(spec, t);
  int64_t d = int64_t(1) << n;
  StateVector s;
  s.num_qubits = 2 * n;
  s.amplitudes = cvec::Zero(d * d);
  double norm = 1.0 / std::sqrt(static_cast<double>(d));
  for (int64_t j = 0; j < d; ++j) {
    for (int64_t i = 0; i < d; ++i) {
      s.amplitudes[(j << n) | i] = u.matrix(j, i) * norm;
    }
  }
  return s;
}

inline cmat prepare_bell_dual_state(int n, const HamiltonianSpectrum& spec,
                                    double t) {
  if (2 * n > 12) {
    throw std::invalid_argument("prepare_bell_dual_state: dense form needs 2n <= 12");
  }
  StateVector s = bell_dual_vector(n, spec, t);
  return s.amplitudes * s.amplitudes.adjoint();
}

// Single-Bell input: the designated system qubit shares a Bell pair with one
// ancilla (appended as qubit n+1), the remaining n-1 system qubits are
// maximally mixed.  Ensemble member for system bits b:
//   (1/sqrt2) sum_s |sys(b, bell_qubit = s)> x |s>.
inline std::vector<StateVector>
single_bell_ensemble(int n, const HamiltonianSpectrum& spec, double t,
                     int bell_qubit) {
  if (bell_qubit != 1 && bell_qubit != n) {
    throw std::invalid_argument("single_bell_ensemble: bell_qubit must be 1 or n");
  }
  EvolutionOperator u = evolution_operator(spec, t);
  int64_t d = int64_t(1) << n;
  std::vector<StateVector> out;
  // b runs over the n-1 non-designated system qubits, packed in qubit order.
  int64_t nb = int64_t(1) << (n - 1);
  for (int64_t b = 0; b < nb; ++b) {
    cvec sys0 = cvec::Zero(d);
    cvec sys1 = cvec::Zero(d);
    // Scatter b's bits around the designated qubit.
    int64_t base = 0;
    int pos = 0;
    for (int q = 1; q <= n; ++q) {
      if (q == bell_qubit) {
        continue;
      }
      int64_t bit = (b >> (n - 2 - pos)) & 1;
      base |= bit << (n - q);
      ++pos;
    }
    int64_t mask = int64_t(1) << (n - bell_qubit);
    sys0[base] = 1.0;
    sys1[base | mask] = 1.0;
    cvec ev0 = u.matrix * sys0;
    cvec ev1 = u.matrix * sys1;
    StateVector s;
    s.num_qubits = n + 1;
    s.amplitudes = cvec::Zero(d * 2);
    double norm = 1.0 / std::sqrt(2.0);
    for (int64_t i = 0; i < d; ++i) {
      s.amplitudes[(i << 1) | 0] = ev0[i] * norm;
      s.amplitudes[(i << 1) | 1] = ev1[i] * norm;
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline cmat prepare_single_bell_state(int n, const HamiltonianSpectrum& spec,
                                      double t, int bell_qubit) {
  if (n + 1 > 12) {
    throw std::invalid_argument("prepare_single_bell_state: dense form needs n+1 <= 12");
  }
  auto ensemble = single_bell_ensemble(n, spec, t, bell_qubit);
  int64_t dim = int64_t(1) << (n + 1);
  cmat rho = cmat::Zero(dim, dim);
  double w = 1.0 / static_cast<double>(ensemble.size());
  for (const auto& s : ensemble) {
    rho += w * (s.amplitudes * s.amplitudes.adjoint());
  }
  return rho;
}

} // namespace otoc
