#pragma once

// Global randomized-measurement protocol: sample Haar unitaries, record the
// pair of probe expectations per unitary, and combine their moments into
// C_4 and C_8 estimates.  Also houses the random-matrix identities the
// protocol rests on: the derangement form of the Haar moment
// and the closed-form derangement sum for alternating operator pairs.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "otoc/dynamics.hpp"
#include "otoc/qlinalg.hpp"
#include "otoc/rng.hpp"

namespace otoc {

struct GlobalRunConfig {
  int n_qubits = 2;
  double t = 0.0;
  PauliString w;
  PauliString v;
  uint64_t num_unitaries = 1;
  uint64_t shots_per_expectation = 0; // 0 = exact expectation values
  uint64_t seed = 0;
  StateVector probe_state; // empty = |0...0>
};

struct GlobalUnitaryRecord {
  double x = 0.0; // <U^dag W(t) U> on the probe state
  double y = 0.0; // <U^dag V^dag W(t) V U> on the probe state
};

struct GlobalRunResult {
  double c4_estimate = 0.0;
  double c8_estimate = 0.0;
  std::vector<GlobalUnitaryRecord> records;
};

// Ratio (d-1+k)!/(d-1)! = d (d+1) ... (d+k-1), the number of Haar samples'
// normalization in the derangement identity.
inline double rising_factorial(int d, int k) {
  double acc = 1.0;
  for (int i = 0; i < k; ++i) {
    acc *= static_cast<double>(d + i);
  }
  return acc;
}

inline GlobalRunResult run_global_protocol(const GlobalRunConfig& cfg) {
  if (cfg.n_qubits < 1 || cfg.n_qubits > 8) {
    throw std::invalid_argument("run_global_protocol: need 1 <= n <= 8");
  }
  if (cfg.num_unitaries < 1) {
    throw std::invalid_argument("run_global_protocol: need at least one unitary");
  }
  if (cfg.w.num_qubits != cfg.n_qubits || cfg.v.num_qubits != cfg.n_qubits) {
    throw std::invalid_argument("run_global_protocol: probe width mismatch");
  }
  int64_t d = int64_t(1) << cfg.n_qubits;
  cvec probe;
  if (cfg.probe_state.amplitudes.size() == 0) {
    probe = cvec::Zero(d);
    probe(0) = 1.0;
  } else {
    if (cfg.probe_state.amplitudes.size() != d ||
        !cfg.probe_state.is_normalized()) {
      throw std::invalid_argument("run_global_protocol: probe state invalid");
    }
    probe = cfg.probe_state.amplitudes;
  }

  HamiltonianSpectrum spec =
      ising_spectrum(cfg.n_qubits, IsingParams::defaults());
  cmat w_t = heisenberg_operator(cfg.w, evolution_operator(spec, cfg.t));
  cmat vm = pauli_matrix(cfg.v);
  cmat a_plain = w_t;
  cmat a_conj = vm.adjoint() * w_t * vm;

  GlobalRunResult out;
  out.records.resize(cfg.num_unitaries);
  double sum_xy = 0.0;
  double sum_x2y2 = 0.0;
  for (uint64_t m = 0; m < cfg.num_unitaries; ++m) {
    RandomStream rng(cfg.seed, substream_id(3, m));
    cmat u = haar_unitary(static_cast<int>(d), rng);
    cvec rotated = u * probe;
    double x = (rotated.adjoint() * a_plain * rotated)(0, 0).real();
    double y = (rotated.adjoint() * a_conj * rotated)(0, 0).real();
    if (cfg.shots_per_expectation > 0) {
      // The probe observables square to one, so each shot is a +-1 draw.
      auto shot_average = [&](double mean) {
        double p = std::min(1.0, std::max(0.0, 0.5 * (1.0 + mean)));
        uint64_t ups = 0;
        for (uint64_t s = 0; s < cfg.shots_per_expectation; ++s) {
          if (rng.uniform() < p) {
            ups += 1;
          }
        }
        return 2.0 * static_cast<double>(ups) /
                   static_cast<double>(cfg.shots_per_expectation) -
               1.0;
      };
      x = shot_average(x);
      y = shot_average(y);
    }
    out.records[m] = GlobalUnitaryRecord{x, y};
    sum_xy += x * y;
    sum_x2y2 += x * x * y * y;
  }
  double count = static_cast<double>(cfg.num_unitaries);
  double dim = static_cast<double>(d);
  out.c4_estimate = (dim + 1.0) * sum_xy / count;
  out.c8_estimate = 0.5 * (dim + 1.0) * (dim + 2.0) * (dim + 3.0) *
                        (sum_x2y2 / count) -
                    dim * out.c4_estimate * out.c4_estimate -
                    0.5 * (dim + 4.0);
  return out;
}

struct DerangementMomentReport {
  cplx lhs{0.0, 0.0};             // derangement sum of permutation traces
  cplx rhs_weingarten{0.0, 0.0};  // exact Haar moment via the inverse Gram
  cplx rhs_montecarlo{0.0, 0.0};  // sampled Haar moment
  double montecarlo_se = 0.0;
};

// Derangement identity for traceless operators: the fixed-point-free
// permutation sum equals the scaled Haar moment of the product of probe
// expectations.  The Weingarten route evaluates that moment exactly by
// projecting the k-fold probe state onto the permutation span with the
// inverse Gram matrix; the Monte Carlo route samples it.
inline DerangementMomentReport verify_derangement_moment(int k, int d, const std::vector<cmat>& ops,
                                uint64_t mc_samples = 2000,
                                uint64_t seed = 0) {
  if (k < 2 || k > 4) {
    throw std::invalid_argument("verify_derangement_moment: k must be in {2, 3, 4}");
  }
  if (static_cast<int>(ops.size()) != k) {
    throw std::invalid_argument("verify_derangement_moment: need exactly k operators");
  }
  for (const cmat& a : ops) {
    if (a.rows() != d || a.cols() != d) {
      throw std::invalid_argument("verify_derangement_moment: operator dimension mismatch");
    }
    if (std::abs(a.trace()) > 1e-10) {
      throw std::invalid_argument("verify_derangement_moment: operators must be traceless");
    }
  }

  DerangementMomentReport report;
  for (const Permutation& sigma : derangements(k)) {
    report.lhs += trace_with_permutation(sigma, ops);
  }

  double scale = rising_factorial(d, k);
  WeingartenTable table = weingarten_matrix(k, d);
  // E[prod_i <psi|U^dag A_i U|psi>] = sum_pi c_pi Tr{T_pi tensor(A)}, where
  // the coefficients c = coeffs * 1 because every permutation overlaps the
  // k-fold pure product state with weight exactly 1.
  for (size_t i = 0; i < table.perms.size(); ++i) {
    double c_i = table.coeffs.row(static_cast<Eigen::Index>(i)).sum();
    report.rhs_weingarten +=
        scale * c_i * trace_with_permutation(table.perms[i], ops);
  }

  cplx mc_sum(0.0, 0.0);
  double mc_sum_sq = 0.0;
  for (uint64_t s = 0; s < mc_samples; ++s) {
    RandomStream rng(seed, substream_id(4, s));
    cmat u = haar_unitary(d, rng);
    cvec probe = u.col(0); // U acting on the first basis vector
    cplx prod(1.0, 0.0);
    for (const cmat& a : ops) {
      prod *= (probe.adjoint() * a * probe)(0, 0);
    }
    mc_sum += prod;
    mc_sum_sq += std::norm(prod);
  }
  double count = static_cast<double>(mc_samples);
  cplx mc_mean = mc_sum / count;
  report.rhs_montecarlo = scale * mc_mean;
  double var = mc_sum_sq / count - std::norm(mc_mean);
  report.montecarlo_se = scale * std::sqrt(std::max(0.0, var) / count);
  return report;
}

struct DerangementSumReport {
  double lhs = 0.0;
  double rhs = 0.0;
};

// Closed form of the derangement sum over four alternating copies of a
// traceless Hermitian involution pair:
//   sum_{sigma in D_4} Tr{T_sigma A1 (x) A2 (x) A1 (x) A2}
//     = 2 Tr{A1 A2 A1 A2} + 2 d^2 <A1 A2>^2 + d (d + 4).
inline DerangementSumReport verify_derangement_sum(int d, const cmat& a1,
                                                   const cmat& a2) {
  auto check = [d](const cmat& a, const char* name) {
    if (a.rows() != d || a.cols() != d) {
      throw std::invalid_argument(std::string("verify_derangement_sum: ") +
                                  name + " has wrong dimension");
    }
    if (std::abs(a.trace()) > 1e-10) {
      throw std::invalid_argument(std::string("verify_derangement_sum: ") +
                                  name + " must be traceless");
    }
    if ((a - a.adjoint()).norm() > 1e-10) {
      throw std::invalid_argument(std::string("verify_derangement_sum: ") +
                                  name + " must be Hermitian");
    }
    if ((a * a - cmat::Identity(d, d)).norm() > 1e-10) {
      throw std::invalid_argument(std::string("verify_derangement_sum: ") +
                                  name + " must square to the identity");
    }
  };
  check(a1, "a1");
  check(a2, "a2");

  std::vector<cmat> ops{a1, a2, a1, a2};
  cplx lhs(0.0, 0.0);
  for (const Permutation& sigma : derangements(4)) {
    lhs += trace_with_permutation(sigma, ops);
  }
  if (std::abs(lhs.imag()) > 1e-9) {
    throw std::runtime_error("verify_derangement_sum: non-real sum");
  }

  double dim = static_cast<double>(d);
  double avg = (a1 * a2).trace().real() / dim;
  double rhs = 2.0 * (a1 * a2 * a1 * a2).trace().real() +
               2.0 * dim * dim * avg * avg + dim * (dim + 4.0);
  return DerangementSumReport{lhs.real(), rhs};
}

} // namespace otoc
