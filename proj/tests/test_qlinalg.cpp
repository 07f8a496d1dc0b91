#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "otoc/qlinalg.hpp"

using namespace otoc;

namespace {

cmat random_cmat(int d, RandomStream& rng) {
  cmat m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      m(i, j) = cplx(rng.normal(), rng.normal());
    }
  }
  return m;
}

} // namespace

TEST_CASE("kron basics") {
  CHECK((kron(pauli_i2(), pauli_i2()) - cmat::Identity(4, 4)).norm() == 0.0);

  cmat zz = kron(pauli_z(), pauli_z());
  cmat expect = cmat::Zero(4, 4);
  expect(0, 0) = 1;
  expect(1, 1) = -1;
  expect(2, 2) = -1;
  expect(3, 3) = 1;
  CHECK((zz - expect).norm() == 0.0);

  RandomStream rng(1, 0);
  for (int rep = 0; rep < 10; ++rep) {
    cmat a = random_cmat(2, rng);
    cmat b = random_cmat(2, rng);
    CHECK(std::abs(kron(a, b).trace() - a.trace() * b.trace()) < 1e-12);
  }
}

TEST_CASE("pauli_matrix assembles strings with phases") {
  PauliString zi("ZI");
  CHECK((pauli_matrix(zi) - kron(pauli_z(), pauli_i2())).norm() == 0.0);

  PauliString xx("XX");
  cmat m = pauli_matrix(xx);
  CHECK((m * m - cmat::Identity(4, 4)).norm() < 1e-14);

  // Traceless whenever any letter is non-identity.
  CHECK(std::abs(pauli_matrix(PauliString("XIZ")).trace()) < 1e-14);

  // Unitary and involutory at phase +1.
  cmat y = pauli_matrix(PauliString("YZY"));
  CHECK((y * y.adjoint() - cmat::Identity(8, 8)).norm() < 1e-13);
  CHECK((y * y - cmat::Identity(8, 8)).norm() < 1e-13);

  PauliString with_phase("XY", cplx(0.0, 1.0));
  CHECK((pauli_matrix(with_phase) - ci * kron(pauli_x(), pauli_y())).norm() <
        1e-14);
}

TEST_CASE("pauli transpose and conjugate track the Y sign") {
  RandomStream rng(2, 0);
  const char* strings[] = {"Y", "XY", "YY", "ZYXY", "IYZI"};
  for (const char* s : strings) {
    PauliString p(s);
    cmat dense = pauli_matrix(p);
    CHECK((pauli_matrix(p.transposed()) - dense.transpose()).norm() < 1e-13);
    CHECK((pauli_matrix(p.conjugated()) - dense.conjugate()).norm() < 1e-13);
  }
  PauliString q("XYZ", cplx(0.0, -1.0));
  CHECK((pauli_matrix(q.transposed()) - pauli_matrix(q).transpose()).norm() <
        1e-13);
  CHECK((pauli_matrix(q.conjugated()) - pauli_matrix(q).conjugate()).norm() <
        1e-13);
}

TEST_CASE("permutation basics") {
  Permutation id = Permutation::identity(3);
  CHECK(id.num_cycles() == 3);

  Permutation swap12 = Permutation::from_cycles(2, {{1, 2}});
  CHECK(swap12(0) == 1);
  CHECK(swap12(1) == 0);
  CHECK(swap12.num_cycles() == 1);
  CHECK_FALSE(swap12.has_odd_cycle());

  Permutation c4 = Permutation::from_cycles(4, {{1, 2, 3, 4}});
  CHECK(c4.num_cycles() == 1);
  CHECK(compose(c4, c4.inverse()) == Permutation::identity(4));

  Permutation fix_and_swap = Permutation::from_cycles(3, {{2, 3}});
  CHECK(fix_and_swap.has_fixed_point());
  CHECK(fix_and_swap.has_odd_cycle());

  CHECK_THROWS_AS(Permutation({0, 0, 1}), std::invalid_argument);
}

TEST_CASE("permutation_operator matches its defining action") {
  // Swap on two qubits.
  cmat t = permutation_operator(Permutation::from_cycles(2, {{1, 2}}), 2);
  cmat expect = cmat::Zero(4, 4);
  expect(0, 0) = 1;
  expect(1, 2) = 1;
  expect(2, 1) = 1;
  expect(3, 3) = 1;
  CHECK((t - expect).norm() == 0.0);

  RandomStream rng(3, 0);
  cmat a = random_cmat(2, rng);
  cmat b = random_cmat(2, rng);
  cplx lhs = (t * kron(a, b)).trace();
  CHECK(std::abs(lhs - (a * b).trace()) < 1e-12);

  // Fixed point factorizes out of the trace.
  cmat a1 = random_cmat(2, rng);
  cmat a2 = random_cmat(2, rng);
  cmat a3 = random_cmat(2, rng);
  cmat t23 = permutation_operator(Permutation::from_cycles(3, {{2, 3}}), 2);
  cplx full = (t23 * kron(kron(a1, a2), a3)).trace();
  CHECK(std::abs(full - a1.trace() * (a2 * a3).trace()) < 1e-12);

  // Operator product realizes composition: T_pi T_sigma = T_{compose(sigma, pi)}.
  for (int rep = 0; rep < 5; ++rep) {
    auto perms = all_permutations(4);
    size_t i = static_cast<size_t>(rng.uniform_below(perms.size()));
    size_t j = static_cast<size_t>(rng.uniform_below(perms.size()));
    cmat prod = permutation_operator(perms[i], 2) * permutation_operator(perms[j], 2);
    cmat composed = permutation_operator(compose(perms[j], perms[i]), 2);
    CHECK((prod - composed).norm() < 1e-12);
  }
}

TEST_CASE("trace_with_permutation equals the dense evaluation") {
  RandomStream rng(4, 0);

  // Identity permutation factorizes into plain traces.
  {
    cmat a = random_cmat(2, rng);
    cmat b = random_cmat(2, rng);
    cplx v = trace_with_permutation(Permutation::identity(2), {a, b});
    CHECK(std::abs(v - a.trace() * b.trace()) < 1e-12);
  }

  // All of S_3 on random 2x2 and 3x3 inputs.
  for (int local_dim : {2, 3}) {
    for (const auto& p : all_permutations(3)) {
      std::vector<cmat> ops = {random_cmat(local_dim, rng),
                               random_cmat(local_dim, rng),
                               random_cmat(local_dim, rng)};
      cmat big = kron(kron(ops[0], ops[1]), ops[2]);
      cplx dense = (permutation_operator(p, local_dim) * big).trace();
      cplx fact = trace_with_permutation(p, ops);
      CHECK(std::abs(dense - fact) < 1e-10);
    }
  }

  // 20 random elements of S_4, both local dims.
  auto s4 = all_permutations(4);
  for (int rep = 0; rep < 20; ++rep) {
    const auto& p = s4[static_cast<size_t>(rng.uniform_below(s4.size()))];
    for (int local_dim : {2, 3}) {
      std::vector<cmat> ops;
      cmat big = cmat::Identity(1, 1);
      for (int i = 0; i < 4; ++i) {
        ops.push_back(random_cmat(local_dim, rng));
        big = kron(big, ops.back());
      }
      cplx dense = (permutation_operator(p, local_dim) * big).trace();
      cplx fact = trace_with_permutation(p, ops);
      CHECK(std::abs(dense - fact) < 1e-10);
    }
  }

  // The worked three-operator example: (1)(2,3).
  {
    cmat a1 = random_cmat(2, rng);
    cmat a2 = random_cmat(2, rng);
    cmat a3 = random_cmat(2, rng);
    cplx v = trace_with_permutation(Permutation::from_cycles(3, {{2, 3}}),
                                    {a1, a2, a3});
    CHECK(std::abs(v - a1.trace() * (a2 * a3).trace()) < 1e-12);
  }
}

TEST_CASE("derangement enumeration") {
  auto d2 = derangements(2);
  REQUIRE(d2.size() == 1);
  CHECK(d2[0] == Permutation::from_cycles(2, {{1, 2}}));

  CHECK(derangements(3).size() == 2);

  auto d4 = derangements(4);
  CHECK(d4.size() == 9);
  // The three double transpositions are among them.
  auto contains = [&](const Permutation& p) {
    for (const auto& q : d4) {
      if (q == p) {
        return true;
      }
    }
    return false;
  };
  CHECK(contains(Permutation::from_cycles(4, {{1, 2}, {3, 4}})));
  CHECK(contains(Permutation::from_cycles(4, {{1, 3}, {2, 4}})));
  CHECK(contains(Permutation::from_cycles(4, {{1, 4}, {2, 3}})));

  CHECK_THROWS_AS(derangements(7), std::invalid_argument);
}

TEST_CASE("weingarten matrix known forms") {
  // k = 2: C = 1/(d^2-1) [[1, -1/d], [-1/d, 1]] in order {identity, swap}.
  for (int d : {2, 4, 8}) {
    auto t = weingarten_matrix(2, d);
    REQUIRE(t.perms.size() == 2);
    CHECK(t.perms[0] == Permutation::identity(2));
    CHECK(t.perms[1] == Permutation::from_cycles(2, {{1, 2}}));
    double dd = static_cast<double>(d);
    double scale = 1.0 / (dd * dd - 1.0);
    CHECK(std::abs(t.coeffs(0, 0) - scale) < 1e-12);
    CHECK(std::abs(t.coeffs(0, 1) + scale / dd) < 1e-12);
    CHECK(std::abs(t.coeffs(1, 0) + scale / dd) < 1e-12);
    CHECK(std::abs(t.coeffs(1, 1) - scale) < 1e-12);
  }

  // Row sums equal (d-1)!/(d-1+k)!.
  for (int k : {2, 3, 4}) {
    int d = 4;
    auto t = weingarten_matrix(k, d);
    double expect = 1.0;
    for (int m = d; m <= d - 1 + k; ++m) {
      expect /= static_cast<double>(m);
    }
    for (Eigen::Index col = 0; col < t.coeffs.cols(); ++col) {
      CHECK(std::abs(t.coeffs.col(col).sum() - expect) < 1e-12);
    }
  }

  // Inverse relation at k = 3, d = 8.
  {
    auto t = weingarten_matrix(3, 8);
    CHECK((t.coeffs * t.gram - rmat::Identity(6, 6)).norm() < 1e-10);
  }

  CHECK_THROWS_AS(weingarten_matrix(3, 2), std::invalid_argument);
}

TEST_CASE("haar_unitary is unitary and twirls to the trace") {
  RandomStream rng(7, 0);
  for (int s = 0; s < 100; ++s) {
    cmat u = haar_unitary(8, rng);
    CHECK((u * u.adjoint() - cmat::Identity(8, 8)).norm() < 1e-10);
  }

  // First moment: E[U A U^dagger] = Tr{A}/d I for unit-Frobenius A.
  const int d = 4;
  const int samples = 100000;
  cmat a = random_cmat(d, rng);
  a /= a.norm();
  cmat acc = cmat::Zero(d, d);
  for (int s = 0; s < samples; ++s) {
    cmat u = haar_unitary(d, rng);
    acc += u * a * u.adjoint();
  }
  acc /= static_cast<double>(samples);
  cmat expect = a.trace() / static_cast<double>(d) * cmat::Identity(d, d);
  CHECK((acc - expect).norm() < 5.0 / std::sqrt(static_cast<double>(samples)));
}

TEST_CASE("partial trace keeps the requested qubits") {
  RandomStream rng(8, 0);
  cmat rho_a = random_density(2, rng);
  cmat rho_b = random_density(4, rng);
  cmat rho = kron(rho_a, rho_b);
  CHECK((partial_trace_keep(rho, 3, {1}) - rho_a).norm() < 1e-12);
  CHECK((partial_trace_keep(rho, 3, {2, 3}) - rho_b).norm() < 1e-12);
  CHECK(std::abs(partial_trace_keep(rho, 3, {2}).trace() - 1.0) < 1e-12);
}

TEST_CASE("basis states and combinatorics helpers") {
  StateVector s = StateVector::basis_state(3, 0b101);
  CHECK(s.is_normalized());
  CHECK(s.amplitudes[5] == cplx(1.0, 0.0));

  CHECK(binomial_u64(150, 4) == 20260275ull);
  CHECK(binomial_u64(4, 2) == 6ull);
  CHECK(binomial_u64(3, 5) == 0ull);
  CHECK(binomial_dbl(10, 5) == 252.0);
  CHECK(factorial_u64(6) == 720ull);
}
