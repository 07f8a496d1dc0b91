#pragma once

// Sample-complexity machinery for the shadow estimators: closed-form variance
// bounds, the Chebyshev sample-size rule they imply, and empirical audits
// that draw real snapshots and check the measured variance against the bound.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "otoc/qlinalg.hpp"
#include "otoc/rng.hpp"
#include "otoc/shadows.hpp"

namespace otoc {

// Upper bound on Var(C4 estimate) from a shadow of K snapshot pairs.
inline double variance_bound_c4(int d, uint64_t num_snapshots) {
  if (d < 2) {
    throw std::invalid_argument("variance_bound_c4: need d >= 2");
  }
  if (num_snapshots < 2) {
    throw std::invalid_argument("variance_bound_c4: need K >= 2");
  }
  double dim = static_cast<double>(d);
  double k = static_cast<double>(num_snapshots);
  return 8.0 * dim * dim / k + 3.0 * std::pow(dim, 5) / (k * k);
}

// Smallest K with K >= 2 max{8d^2/(eps^2 delta), sqrt(3) d^2.5/(eps sqrt(delta))},
// the Chebyshev sample size for |C4 error| <= eps with failure rate delta.
inline uint64_t sample_size_c4(int d, double epsilon, double delta) {
  if (d < 2) {
    throw std::invalid_argument("sample_size_c4: need d >= 2");
  }
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw std::invalid_argument("sample_size_c4: epsilon outside (0, 1)");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("sample_size_c4: delta outside (0, 1)");
  }
  double dim = static_cast<double>(d);
  double first = 8.0 * dim * dim / (epsilon * epsilon * delta);
  double second = std::sqrt(3.0) * std::pow(dim, 2.5) /
                  (epsilon * std::sqrt(delta));
  double target = 2.0 * std::max(first, second);
  // Nudge below the target before taking the ceiling so that targets that
  // are integers up to roundoff do not get bumped one past the minimum.
  double nudged = target - 1e-9 * std::max(1.0, std::abs(target));
  auto k = static_cast<uint64_t>(std::ceil(nudged));
  while (static_cast<double>(k) < target) {
    k += 1;
  }
  while (k > 1 && static_cast<double>(k - 1) >= target) {
    k -= 1;
  }
  return k;
}

// Full four-term bound on Var(L8 estimate); the K^-3 and K^-4 terms carry no
// moment dependence and are shared with the early-time variant below.
inline double variance_bound_L8(int d, uint64_t num_snapshots, double D2,
                                double D4, double D8) {
  if (d < 2) {
    throw std::invalid_argument("variance_bound_L8: need d >= 2");
  }
  if (num_snapshots < 4) {
    throw std::invalid_argument("variance_bound_L8: need K >= 4");
  }
  double dim = static_cast<double>(d);
  double k = static_cast<double>(num_snapshots);
  double k2 = k * k;
  double k3 = k2 * k;
  double k4 = k3 * k;
  return 64.0 * std::pow(dim, 5) * D8 / k +
         16.0 * (4.0 * dim * D4 + dim * dim * D4 * D4 + 8.0 * D2 * D2 + 2.0) /
             k2 +
         32.0 * (2.0 * std::pow(dim, 10) + 3.0 * std::pow(dim, 8)) / k3 +
         4.0 * (std::pow(dim, 14) + 5.0 * std::pow(dim, 6)) / k4;
}

// Early-time specialization: the moments pinned at D2 = 1, D4 = 2/d,
// D8 = 8/d^3 collapse the leading terms to 512 d^2 / K + 352 / K^2.
inline double variance_bound_L8_early_time(int d, uint64_t num_snapshots) {
  if (d < 2) {
    throw std::invalid_argument("variance_bound_L8_early_time: need d >= 2");
  }
  if (num_snapshots < 4) {
    throw std::invalid_argument("variance_bound_L8_early_time: need K >= 4");
  }
  double dim = static_cast<double>(d);
  double k = static_cast<double>(num_snapshots);
  double k2 = k * k;
  double k3 = k2 * k;
  double k4 = k3 * k;
  return 512.0 * dim * dim / k + 352.0 / k2 +
         32.0 * (2.0 * std::pow(dim, 10) + 3.0 * std::pow(dim, 8)) / k3 +
         4.0 * (std::pow(dim, 14) + 5.0 * std::pow(dim, 6)) / k4;
}

// Unbiased two-pass sample variance.
inline double empirical_variance(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw std::invalid_argument("empirical_variance: need at least two values");
  }
  double mean = 0.0;
  for (double v : values) {
    mean += v;
  }
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) {
    acc += (v - mean) * (v - mean);
  }
  return acc / static_cast<double>(values.size() - 1);
}

namespace detail {

// One randomized single-qubit-Clifford measurement of a density matrix,
// mirroring the pure-state sampler's conventions (qubit 0 = most significant
// bit of the basis index).
inline ShadowSnapshot sample_mixed_snapshot(const cmat& rho, int num_qubits,
                                            RandomStream& rng) {
  ShadowSnapshot snap;
  snap.clifford_indices.resize(static_cast<size_t>(num_qubits));
  snap.outcomes.resize(static_cast<size_t>(num_qubits));
  cmat rotation = cmat::Identity(1, 1);
  for (int qubit = 0; qubit < num_qubits; ++qubit) {
    int idx = static_cast<int>(rng.uniform_below(24));
    snap.clifford_indices[static_cast<size_t>(qubit)] =
        static_cast<uint8_t>(idx);
    rotation = kron(rotation, clifford_matrix(idx));
  }
  cvec probs = (rotation * rho * rotation.adjoint()).diagonal();
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    total += std::max(0.0, probs[i].real());
  }
  double target = rng.uniform() * total;
  double cum = 0.0;
  Eigen::Index outcome = probs.size() - 1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    cum += std::max(0.0, probs[i].real());
    if (target < cum) {
      outcome = i;
      break;
    }
  }
  for (int qubit = 0; qubit < num_qubits; ++qubit) {
    snap.outcomes[static_cast<size_t>(qubit)] = static_cast<uint8_t>(
        (outcome >> (num_qubits - 1 - qubit)) & 1);
  }
  return snap;
}

} // namespace detail

struct PairVarianceReport {
  double empirical_var = 0.0;
  double bound = 0.0; // d^3
};

// Audit of the two-copy swap-observable variance bound: draw independent
// snapshot pairs of rho, evaluate Tr{W rhohat W rhohat'} per pair, and
// compare the sample variance against d^3.
inline PairVarianceReport pair_variance_audit(const cmat& rho, const PauliString& w,
                                 uint64_t samples, uint64_t seed) {
  if (rho.rows() != rho.cols() || rho.rows() < 2) {
    throw std::invalid_argument("pair_variance_audit: state must be a square matrix");
  }
  int num_qubits = 0;
  while ((int64_t(1) << (num_qubits + 1)) <= rho.rows()) {
    num_qubits += 1;
  }
  int64_t d = int64_t(1) << num_qubits;
  if (d != rho.rows() || num_qubits > 3) {
    throw std::invalid_argument("pair_variance_audit: need a 1 to 3 qubit state");
  }
  if ((rho - rho.adjoint()).norm() > 1e-9 ||
      std::abs(rho.trace().real() - 1.0) > 1e-9 ||
      std::abs(rho.trace().imag()) > 1e-9) {
    throw std::invalid_argument("pair_variance_audit: invalid state");
  }
  Eigen::SelfAdjointEigenSolver<cmat> eig(rho);
  if (eig.eigenvalues().minCoeff() < -1e-9) {
    throw std::invalid_argument("pair_variance_audit: state is not positive");
  }
  if (w.num_qubits != num_qubits) {
    throw std::invalid_argument("pair_variance_audit: probe width mismatch");
  }
  if (std::abs(w.phase - cplx(1.0, 0.0)) > 1e-12) {
    throw std::invalid_argument("pair_variance_audit: probe must carry unit phase");
  }
  if (samples < 2) {
    throw std::invalid_argument("pair_variance_audit: need at least two samples");
  }

  cmat wm = pauli_matrix(w);
  std::vector<double> values;
  values.reserve(static_cast<size_t>(samples));
  for (uint64_t s = 0; s < samples; ++s) {
    RandomStream rng(seed, substream_id(5, s));
    cmat first = snapshot_to_dense(
        detail::sample_mixed_snapshot(rho, num_qubits, rng));
    cmat second = snapshot_to_dense(
        detail::sample_mixed_snapshot(rho, num_qubits, rng));
    values.push_back((wm * first * wm * second).trace().real());
  }
  double dim = static_cast<double>(d);
  return PairVarianceReport{empirical_variance(values), dim * dim * dim};
}

} // namespace otoc
