// Tests for the variance bounds, the Chebyshev sample-size rule, and the
// empirical audits that check real estimator spread against those bounds.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "otoc/dynamics.hpp"
#include "otoc/estimators.hpp"
#include "otoc/exact_otoc.hpp"
#include "otoc/qlinalg.hpp"
#include "otoc/rng.hpp"
#include "otoc/shadows.hpp"
#include "otoc/variance.hpp"

using namespace otoc;

TEST_CASE("four-point variance bound arithmetic") {
  CHECK(std::abs(variance_bound_c4(4, 100) - 1.5872) < 1e-12);

  double previous = variance_bound_c4(4, 2);
  for (uint64_t k : {4, 8, 16, 64, 256, 4096}) {
    double current = variance_bound_c4(4, k);
    CHECK(current < previous);
    previous = current;
  }

  CHECK_THROWS_AS(variance_bound_c4(4, 1), std::invalid_argument);
  CHECK_THROWS_AS(variance_bound_c4(1, 100), std::invalid_argument);
}

TEST_CASE("Chebyshev sample size rule") {
  CHECK(sample_size_c4(4, 0.5, 0.1) == 10240);

  // In the regime where the first branch dominates, halving epsilon
  // quadruples the sample size exactly.
  CHECK(sample_size_c4(4, 0.1, 0.5) == 4 * sample_size_c4(4, 0.2, 0.5));

  for (int d : {2, 4, 8}) {
    for (double eps : {0.1, 0.37, 0.8}) {
      for (double delta : {0.05, 0.3, 0.9}) {
        uint64_t k = sample_size_c4(d, eps, delta);
        double dim = d;
        double target =
            2.0 * std::max(8.0 * dim * dim / (eps * eps * delta),
                           std::sqrt(3.0) * std::pow(dim, 2.5) /
                               (eps * std::sqrt(delta)));
        CHECK(static_cast<double>(k) >= target);
        CHECK(static_cast<double>(k - 1) < target);
      }
    }
  }

  CHECK_THROWS_AS(sample_size_c4(4, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(sample_size_c4(4, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(sample_size_c4(4, 0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_size_c4(4, 0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_size_c4(1, 0.5, 0.1), std::invalid_argument);
}

TEST_CASE("eight-point variance bound arithmetic") {
  double expected = 20.48 + 0.0352 + 0.090112 + 0.00066816;
  CHECK(std::abs(variance_bound_L8_early_time(2, 100) - expected) < 1e-12);

  // With all moments zeroed only the moment-free skeleton remains.
  for (int d : {2, 4}) {
    for (uint64_t k : {uint64_t(8), uint64_t(100)}) {
      double dim = d;
      double skeleton =
          32.0 / (double(k) * double(k)) +
          32.0 * (2.0 * std::pow(dim, 10) + 3.0 * std::pow(dim, 8)) /
              std::pow(double(k), 3) +
          4.0 * (std::pow(dim, 14) + 5.0 * std::pow(dim, 6)) /
              std::pow(double(k), 4);
      CHECK(std::abs(variance_bound_L8(d, k, 0.0, 0.0, 0.0) - skeleton) <
            1e-9 * skeleton);

      // The early-time variant is the general bound at the pinned moments.
      double pinned = variance_bound_L8(d, k, 1.0, 2.0 / dim,
                                        8.0 / (dim * dim * dim));
      CHECK(std::abs(variance_bound_L8_early_time(d, k) - pinned) <
            1e-9 * pinned);
    }
  }

  CHECK_THROWS_AS(variance_bound_L8(4, 3, 0.1, 0.1, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(variance_bound_L8_early_time(4, 3), std::invalid_argument);
}

TEST_CASE("unbiased sample variance") {
  CHECK(empirical_variance({3.5, 3.5, 3.5, 3.5}) == 0.0);
  CHECK(empirical_variance({0.0, 2.0}) == 2.0);
  CHECK_THROWS_AS(empirical_variance({1.0}), std::invalid_argument);

  // Two-pass result against a streaming single-pass recurrence.
  RandomStream rng(99, 1);
  std::vector<double> values;
  values.reserve(1000000);
  double mean = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    double v = 3.0 * rng.normal() + 1.0;
    values.push_back(v);
    double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  double streaming = m2 / static_cast<double>(values.size() - 1);
  double two_pass = empirical_variance(values);
  CHECK(std::abs(two_pass - streaming) < 1e-12 * std::abs(streaming));
}

TEST_CASE("four-point estimator spread sits below its bound") {
  RandomStream t_rng(2024, 3);
  double t = 4.0 * t_rng.uniform();
  HamiltonianSpectrum spec = ising_spectrum(2, IsingParams::defaults());
  auto ensemble = mixed_protocol_ensemble(2, spec, t);
  PauliString w("ZI");

  std::vector<double> estimates;
  for (int rep = 0; rep < 500; ++rep) {
    Shadow shadow =
        build_shadow(ensemble, 16, 9000 + uint64_t(rep), "mixed", 2, t);
    estimates.push_back(
        estimate_c4_mixed(shadow, w, EstimatorMode::exhaustive_mode())
            .value.real());
  }
  CHECK(empirical_variance(estimates) < variance_bound_c4(4, 16));
}

TEST_CASE("Chebyshev sample size achieves the requested accuracy") {
  double epsilon = 0.5;
  double delta = 0.1;
  uint64_t k = sample_size_c4(4, epsilon, delta);
  REQUIRE(k == 10240);

  double t = 1.0;
  HamiltonianSpectrum spec = ising_spectrum(2, IsingParams::defaults());
  auto ensemble = mixed_protocol_ensemble(2, spec, t);
  PauliString w("ZI");
  PauliString v("IZ");
  double exact = otoc_4k(spec, t, w, v, 1).real();

  int trials = 300;
  int failures = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Shadow shadow =
        build_shadow(ensemble, static_cast<int>(k), 40000 + uint64_t(trial),
                     "mixed", 2, t);
    double estimate =
        estimate_c4_mixed(shadow, w, EstimatorMode::exhaustive_mode())
            .value.real();
    if (std::abs(estimate - exact) > epsilon) {
      failures += 1;
    }
  }
  CHECK(static_cast<double>(failures) <=
        delta * static_cast<double>(trials));
}

TEST_CASE("eight-point estimator spread sits below the early-time bound") {
  double t = 0.0;
  HamiltonianSpectrum spec = ising_spectrum(2, IsingParams::defaults());
  auto ensemble = mixed_protocol_ensemble(2, spec, t);
  PauliString w("ZI");

  std::vector<double> estimates;
  for (int rep = 0; rep < 200; ++rep) {
    Shadow shadow =
        build_shadow(ensemble, 8, 7000 + uint64_t(rep), "mixed", 2, t);
    estimates.push_back(
        estimate_L8_mixed(shadow, w, EstimatorMode::exhaustive_mode()).value.real());
  }
  CHECK(empirical_variance(estimates) < variance_bound_L8_early_time(4, 8));
}

TEST_CASE("two-copy swap-observable variance stays below d cubed") {
  RandomStream rng(31337, 2);

  cmat rho1 = random_density(2, rng);
  PairVarianceReport one = pair_variance_audit(rho1, PauliString("Z"), 100000, 11);
  CHECK(one.bound == 8.0);
  CHECK(one.empirical_var <= one.bound);

  cmat rho2 = random_density(4, rng);
  PairVarianceReport two = pair_variance_audit(rho2, PauliString("XZ"), 100000, 12);
  CHECK(two.bound == 64.0);
  CHECK(two.empirical_var <= two.bound);

  // An identity probe turns the statistic into the purity estimator.
  PairVarianceReport purity = pair_variance_audit(rho2, PauliString("II"), 100000, 13);
  CHECK(purity.bound == 64.0);
  CHECK(purity.empirical_var <= purity.bound);
}

TEST_CASE("swap-observable audit rejects invalid inputs") {
  RandomStream rng(5, 5);
  cmat rho = random_density(4, rng);

  cmat unnormalized = 2.0 * rho;
  CHECK_THROWS_AS(pair_variance_audit(unnormalized, PauliString("XZ"), 100, 1),
                  std::invalid_argument);
  cmat skew = rho + cplx(0.0, 0.2) * pauli_matrix(PauliString("XY"));
  CHECK_THROWS_AS(pair_variance_audit(skew, PauliString("XZ"), 100, 1),
                  std::invalid_argument);
  // An explicitly indefinite unit-trace Hermitian matrix.
  cmat indefinite = cmat::Zero(4, 4);
  indefinite(0, 0) = 1.5;
  indefinite(1, 1) = -0.5;
  CHECK_THROWS_AS(pair_variance_audit(indefinite, PauliString("XZ"), 100, 1),
                  std::invalid_argument);

  RandomStream big_rng(6, 6);
  cmat too_big = random_density(16, big_rng);
  CHECK_THROWS_AS(pair_variance_audit(too_big, PauliString("XZII"), 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(pair_variance_audit(rho, PauliString("X"), 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(pair_variance_audit(rho, PauliString("XZ", cplx(-1.0, 0.0)), 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(pair_variance_audit(rho, PauliString("XZ"), 1, 1),
                  std::invalid_argument);
}

TEST_CASE("squared-moment identity links the exact correlator") {
  RandomStream t_rng(777, 4);
  for (int n : {2, 3}) {
    HamiltonianSpectrum spec = ising_spectrum(n, IsingParams::defaults());
    PauliString w = PauliString::single(n, 1, 'Z');
    PauliString v = PauliString::single(n, n, 'Z');
    cmat wm = pauli_matrix(w);
    double d = static_cast<double>(int64_t(1) << n);
    for (int rep = 0; rep < 3; ++rep) {
      double t = 4.0 * t_rng.uniform();
      cmat rho_v = prepare_mixed_protocol_state(n, spec, t);
      double d4 = (wm * rho_v * wm * rho_v).trace().real();
      double c4 = otoc_4k(spec, t, w, v, 1).real();
      CHECK(std::abs(d4 - (c4 + 1.0) / d) < 1e-10);
    }
  }
}
