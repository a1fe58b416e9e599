#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "qdparity/errors.hpp"
#include "qdparity/model.hpp"
#include "qdparity/units.hpp"

using namespace qdparity;
using namespace qdparity::model;
using doctest::Approx;

namespace {

CMatrix restrict_h2(const CMatrix& h9) {
  CMatrix out(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out(r, c) = h9(kH2[r], kH2[c]);
  return out;
}

std::vector<double> sorted_eigenvalues(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace

TEST_CASE("defaults are the typical device") {
  const DeviceParams p;
  CHECK(p.foerster == 0.85);
  CHECK(p.biexciton == 5.0);
  CHECK(p.drive == 0.1);
  CHECK(p.gamma1 == Approx(1.0 / 1000.0));
  CHECK(p.gamma2 == 2.0 * p.gamma1);
  CHECK(p.gamma3 == 2.0 * p.gamma1);
  CHECK(p.eta == 0.5);
  CHECK(p.k0_dr == 0.05);
  DeviceParams q;
  q.set_lifetime(500.0);
  CHECK(q.gamma1 == Approx(0.002));
  CHECK(q.gamma2 == Approx(0.004));
  CHECK(q.gamma3 == Approx(0.004));

  DeviceParams bad;
  bad.eta = 1.2;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.foerster = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.gamma2 = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("rotating-frame Hamiltonian") {
  DeviceParams p;
  p.drive = 0.0;
  const CMatrix h = hamiltonian_rotating(p).matrix();
  CHECK(hilbert::Operator(h).is_hermitian());
  const auto ev = sorted_eigenvalues(restrict_h2(h));
  CHECK(ev[0] == Approx(-0.85));
  CHECK(ev[1] == Approx(0.0));
  CHECK(ev[2] == Approx(0.85));
  CHECK(ev[3] == Approx(5.0));

  DeviceParams zero;
  zero.omega_a = zero.omega_b = zero.omega_laser = 0.0;
  zero.foerster = zero.biexciton = zero.drive = 0.0;
  CHECK(hamiltonian_rotating(zero).matrix().isZero(0.0));

  const DeviceParams d;
  const CMatrix hd = hamiltonian_rotating(d).matrix();
  const CVector plus = psi_plus().amplitudes();
  const Complex coupling = plus.dot(hd * hilbert::StateVector::basis(9, idx::k11).amplitudes());
  CHECK(coupling.real() == Approx(0.1 * std::sqrt(2.0) / 2.0).epsilon(1e-14));
  CHECK(coupling.real() == Approx(0.0707).epsilon(1e-3));

  SUBCASE("subspaces are not coupled") {
    for (int i : kH0)
      for (int j = 0; j < 9; ++j)
        if (j != i) CHECK(hd(i, j) == 0.0);
    for (int i : kH1)
      for (int j : kH2) CHECK(hd(i, j) == 0.0);
  }
}

TEST_CASE("H2 block") {
  for (double drive : {0.0, 0.05, 0.1, 0.3}) {
    DeviceParams p;
    p.drive = drive;
    const CMatrix h2 = h2_block(p).matrix();
    CHECK(h2(2, 0) == 0.0);  // psi- is dark
    CHECK(h2(2, 3) == 0.0);
    const CMatrix u = psi_basis().matrix();
    const CMatrix via_full = u.adjoint() * restrict_h2(hamiltonian_rotating(p).matrix()) * u;
    CHECK(via_full.isApprox(h2, 1e-14));
  }
  DeviceParams p;
  p.drive = 0.0;
  const CMatrix h2 = h2_block(p).matrix();
  CHECK(h2.isApprox(CMatrix(CVector(Eigen::Vector4cd(0.0, 0.85, -0.85, 5.0)).asDiagonal())));
}

TEST_CASE("psi basis") {
  const CMatrix u = psi_basis().matrix();
  CHECK((u.adjoint() * u).isApprox(CMatrix::Identity(4, 4)));
  const double h = std::sqrt(0.5);
  const Eigen::Vector4cd plus(0.0, h, h, 0.0);   // (|1X> + |X1>)/sqrt2 in {|11>, |1X>, |X1>, |XX>}
  const Eigen::Vector4cd minus(0.0, h, -h, 0.0);
  CHECK((u.adjoint() * plus).isApprox(Eigen::Vector4cd(0, 1, 0, 0)));
  CHECK((u.adjoint() * minus).isApprox(Eigen::Vector4cd(0, 0, 1, 0)));
}

TEST_CASE("decay channels") {
  const DeviceParams p;
  const auto ideal = channels(p, ChannelMode::ideal);
  REQUIRE(ideal.size() == 1);
  const CMatrix cdc = ideal[0].op.adjoint() * ideal[0].op;
  CMatrix expect = CMatrix::Zero(9, 9);
  expect(idx::kX0, idx::kX0) = p.gamma1;
  expect(idx::k0X, idx::k0X) = p.gamma1;
  CHECK(cdc.isApprox(expect));
  CHECK(ideal[0].detectable);
  CHECK(ideal[0].efficiency == p.eta);

  SUBCASE("annihilates states outside the source subspace") {
    for (int i : {idx::k00, idx::k01, idx::k10, idx::k11, idx::k1X, idx::kX1, idx::kXX}) {
      CHECK(ideal[0].op.col(i).isZero(0.0));
    }
  }

  const auto leaky = channels(p, ChannelMode::h2_leakage);
  REQUIRE(leaky.size() == 3);
  CHECK((leaky[1].op.adjoint() * leaky[1].op).trace().real() == Approx(0.002));
  CHECK((leaky[2].op.adjoint() * leaky[2].op).trace().real() == Approx(0.002));
  CHECK_FALSE(leaky[1].detectable);
  CHECK_FALSE(leaky[2].detectable);
  CHECK(leaky[1].detection_efficiency() == 0.0);

  const auto resonant_detuned = channels(p, ChannelMode::detuned);
  CHECK(resonant_detuned[0].at(0.0).isApprox(ideal[0].op));
  CHECK(resonant_detuned[0].at(1234.5).isApprox(ideal[0].op));

  DeviceParams d = p;
  d.omega_a = 2001.0;
  const auto det = channels(d, ChannelMode::detuned);
  const CMatrix c = det[0].at(700.0);
  CHECK((c.adjoint() * c).isApprox(cdc));  // c^dag c does not depend on time
  const Complex expected = std::sqrt(d.gamma1) * std::polar(1.0, -units::phase(1.0, 700.0));
  CHECK(std::abs(c(idx::k01, idx::k0X) - expected) < 1e-15);
  CHECK(c(idx::k10, idx::kX0) == Complex(std::sqrt(d.gamma1), 0.0));
}

TEST_CASE("pi pulses and projectors") {
  CHECK(0.1 * pi_pulse_duration(0.1) / units::kHbar == Approx(units::kPi).epsilon(1e-12));
  CHECK_THROWS_AS(pi_pulse_duration(0.0), Error);
  const CMatrix u = ideal_pi_pulse().matrix();
  CHECK((u.adjoint() * u).isApprox(CMatrix::Identity(9, 9)));
  for (int i : kH0) CHECK(u(i, i) == 1.0);
  for (int i : kH2) CHECK(u(i, i) == 1.0);
  CHECK(u(idx::k0X, idx::k01) == Complex(0, -1));
  CHECK(u(idx::kX0, idx::k10) == Complex(0, -1));
  const CMatrix pe = even_projector().matrix();
  const CMatrix po = odd_projector().matrix();
  CHECK((pe + po).isApprox(CMatrix::Identity(9, 9)));
  CHECK((pe * po).isZero(0.0));
}

TEST_CASE("embedding the qubits") {
  const hilbert::StateVector q{0.1, 0.2, 0.3, 0.4};
  const auto e = embed_computational(q);
  CHECK(e[idx::k00] == 0.1);
  CHECK(e[idx::k01] == 0.2);
  CHECK(e[idx::k10] == 0.3);
  CHECK(e[idx::k11] == 0.4);
  const CMatrix rho = e.amplitudes() * e.amplitudes().adjoint();
  CHECK(computational_block(rho).isApprox(q.amplitudes() * q.amplitudes().adjoint()));
  CHECK_THROWS_AS(embed_computational(hilbert::StateVector{1.0, 0.0}), DimensionMismatch);
  CHECK(decay_linewidth_ueV(DeviceParams{}) == Approx(4.1357).epsilon(1e-4));
}

TEST_CASE("regime validation") {
  const auto report = validate_regime(DeviceParams{});
  CHECK(report.at("foerster_vs_drive").ratio == Approx(0.85 / (0.1 / std::sqrt(2.0))));
  CHECK(report.at("foerster_vs_drive").ratio == Approx(12.0).epsilon(0.01));
  CHECK(report.at("biexciton_vs_drive").ratio == Approx(70.7).epsilon(0.001));
  CHECK(report.resonant_passed());

  DeviceParams off;
  off.drive = 0.0;
  for (const auto& c : validate_regime(off).conditions) {
    if (c.name.find("drive") != std::string::npos && c.name != "drive_vs_detuning") {
      CHECK(std::isinf(c.ratio));
    }
    if (c.resonant) CHECK(c.passed);
  }

  DeviceParams strong;
  strong.drive = 1.0;
  const auto bad = validate_regime(strong);
  CHECK_FALSE(bad.resonant_passed());
  CHECK(bad.at("foerster_vs_drive").ratio == Approx(0.85 / 0.7071067811865476));

  SUBCASE("detuned conditions reduce to the resonant ones") {
    DeviceParams p;
    p.omega_a = p.omega_b + 1e-9;
    const auto r = validate_regime(p);
    CHECK(r.at("biexciton_vs_detuned_drive").ratio == Approx(r.at("biexciton_vs_drive").ratio).epsilon(1e-6));
  }

  SUBCASE("every condition appears once") {
    std::vector<std::string> names;
    for (const auto& c : report.conditions) names.push_back(c.name);
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
    CHECK(names.size() == 6);
  }
  CHECK_THROWS_AS(report.at("nonsense"), Error);
}
