#include <doctest.h>

#include <array>
#include <random>

#include "qdparity/errors.hpp"
#include "qdparity/hilbert.hpp"
#include "random_states.hpp"

using namespace qdparity;
using namespace qdparity::hilbert;

TEST_CASE("composite index round-trips") {
  for (int i = 0; i < kTwoDotDim; ++i) {
    const auto label = BasisLabel::from_index(i);
    CHECK(label.index() == i);
    CHECK(two_dot_index(label.a, label.b) == i);
  }
  CHECK(two_dot_index(Level::one, Level::exciton) == 5);
  CHECK_THROWS_AS(BasisLabel::from_index(9), DimensionMismatch);
  CHECK_THROWS_AS(BasisLabel::from_index(-1), DimensionMismatch);
}

TEST_CASE("tensor products") {
  CHECK(tensor(Operator::identity(3), Operator::identity(3)).matrix().isApprox(CMatrix::Identity(9, 9)));

  const auto one = StateVector::basis(3, 1);
  const auto x = StateVector::basis(3, 2);
  const auto v = tensor(one, x);
  CHECK(v.amplitudes().isApprox(StateVector::basis(9, 5).amplitudes()));

  const Operator px = tensor(dyad(x, x), Operator::identity(3));
  const auto x1 = StateVector::two_dot(Level::exciton, Level::one);
  CHECK(px.apply(x1).amplitudes().isApprox(x1.amplitudes()));
  CHECK(px.apply(StateVector::two_dot(Level::one, Level::exciton)).norm() == doctest::Approx(0.0));
}

TEST_CASE("dyads") {
  const auto zero = StateVector::basis(3, 0);
  CMatrix expect = CMatrix::Zero(3, 3);
  expect(0, 0) = 1.0;
  CHECK(dyad(zero, zero).matrix() == expect);

  const auto one_x = StateVector::two_dot(Level::one, Level::exciton);
  const auto x_one = StateVector::two_dot(Level::exciton, Level::one);
  const Operator swap = dyad(one_x, x_one) + dyad(x_one, one_x);
  CHECK(swap.apply(x_one).amplitudes().isApprox(one_x.amplitudes()));
  CHECK(swap.apply(one_x).amplitudes().isApprox(x_one.amplitudes()));
  for (int h1 : {1, 2, 3, 6}) CHECK(swap.apply(StateVector::basis(9, h1)).norm() == 0.0);

  const auto plus = (1.0 / std::sqrt(2.0)) * (one_x + x_one);
  CHECK(dyad(plus, plus).matrix().trace().real() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("fidelity") {
  std::mt19937_64 rng(1);
  const auto psi = testing_support::random_state(9, rng);
  CHECK(fidelity(DensityOperator::pure(psi), psi) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fidelity(DensityOperator::maximally_mixed(9), psi) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  CHECK_THROWS_AS(fidelity(DensityOperator::maximally_mixed(4), psi), DimensionMismatch);
}

TEST_CASE("partial trace") {
  std::mt19937_64 rng(2);
  const auto a = testing_support::random_density(3, rng);
  const auto b = testing_support::random_density(3, rng);
  const DensityOperator ab(kron(a.matrix(), b.matrix()), true);
  const std::array<int, 2> dims = {3, 3};
  const std::array<int, 1> keep_a = {0};
  const std::array<int, 1> keep_b = {1};
  CHECK(partial_trace(ab, dims, keep_a).matrix().isApprox(a.matrix(), 1e-13));
  CHECK(partial_trace(ab, dims, keep_b).matrix().isApprox(b.matrix(), 1e-13));

  const double h = std::sqrt(0.5);
  const auto bell = DensityOperator::pure(StateVector{h, 0, 0, h});
  const std::array<int, 2> qubits = {2, 2};
  CHECK(partial_trace(bell, qubits, keep_a).matrix().isApprox(0.5 * CMatrix::Identity(2, 2)));

  SUBCASE("trace is preserved for random states") {
    const std::array<int, 3> dims3 = {2, 3, 2};
    const std::array<int, 2> keep = {0, 2};
    for (int k = 0; k < 20; ++k) {
      const auto rho = testing_support::random_density(12, rng, 1 + k % 12);
      const auto reduced = partial_trace(rho, dims3, keep);
      CHECK(reduced.dim() == 4);
      CHECK(reduced.trace() == doctest::Approx(rho.trace()).epsilon(1e-13));
      CHECK(reduced.is_psd());
    }
  }
}

TEST_CASE("density operator invariants") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const auto rho = testing_support::random_density(9, rng);
    CHECK(rho.trace() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rho.min_eigenvalue() >= -1e-10);
    CHECK((rho.matrix() - rho.matrix().adjoint()).norm() < 1e-12);
  }
  CMatrix not_hermitian = CMatrix::Zero(2, 2);
  not_hermitian(0, 1) = 1.0;
  CHECK_THROWS_AS(DensityOperator(not_hermitian, false), Error);
  CHECK_THROWS_AS(DensityOperator(CMatrix::Identity(2, 2), true), Error);

  // small drift from integration is symmetrised away
  CMatrix drift = 0.5 * CMatrix::Identity(2, 2);
  drift(0, 1) = Complex(0.0, 1e-10);
  const DensityOperator repaired(drift, true);
  CHECK(repaired.matrix().isApprox(repaired.matrix().adjoint(), 0.0));
}

TEST_CASE("normalisation") {
  const StateVector v{3.0, 4.0};
  CHECK(v.normalized().norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(StateVector({0.0, 0.0}).normalized(), Error);
  const DensityOperator unnormalised(0.25 * CMatrix::Identity(2, 2), false);
  CHECK(unnormalised.trace() == doctest::Approx(0.5));
  CHECK(unnormalised.normalized().trace() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("vec and trace norm") {
  std::mt19937_64 rng(4);
  const CMatrix m = testing_support::ginibre(5, 5, rng);
  CHECK(unvec(vec(m), 5) == m);
  CHECK(vec(m)(1) == m(1, 0));  // column stacking
  CMatrix d = CMatrix::Zero(3, 3);
  d(0, 0) = 2.0;
  d(1, 1) = -1.5;
  CHECK(trace_norm(d) == doctest::Approx(3.5));
  CHECK_THROWS_AS(unvec(vec(m), 4), DimensionMismatch);
}
