#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qdparity/analytics.hpp"
#include "qdparity/errors.hpp"
#include "qdparity/protocols.hpp"
#include "qdparity/units.hpp"
#include "random_states.hpp"

using namespace qdparity;
using namespace qdparity::protocols;
using hilbert::DensityOperator;
using hilbert::StateVector;
using doctest::Approx;

namespace {

const double kH = std::sqrt(0.5);
const StateVector kPlus{0.5, 0.5, 0.5, 0.5};
const StateVector kOddBell{0.0, kH, kH, 0.0};

ParityOptions ideal_pulse() {
  ParityOptions o;
  o.pulse = PulseShape::ideal;
  return o;
}

}  // namespace

TEST_CASE("names parse back") {
  for (auto p : {PulseShape::square, PulseShape::ideal}) CHECK(parse_pulse_shape(to_string(p)) == p);
  for (auto p : {RegimePolicy::ignore, RegimePolicy::warn, RegimePolicy::reject})
    CHECK(parse_regime_policy(to_string(p)) == p);
  for (auto s : {GrowthStrategy::naive, GrowthStrategy::divide_and_conquer})
    CHECK(parse_growth_strategy(to_string(s)) == s);
  CHECK(parse_growth_strategy("dc") == GrowthStrategy::divide_and_conquer);
  CHECK_THROWS(parse_pulse_shape("gaussian"));
}

TEST_CASE("parity targets") {
  const auto even = parity_target(kPlus, Verdict::even);
  REQUIRE(even);
  CHECK(std::abs(even->inner(StateVector{kH, 0, 0, kH})) == Approx(1.0));
  CHECK_FALSE(parity_target(StateVector::basis(4, 0), Verdict::odd));
}

TEST_CASE("|00> is never excited") {
  for (double eta : {0.0, 0.5, 1.0}) {
    model::DeviceParams d;
    d.eta = eta;
    const ParityMeasurement pm(d, {});
    for (int k = 0; k < 20; ++k) {
      const auto out = pm.measure(StateVector::basis(4, 0), dynamics::derive_seed(11, k));
      CHECK(out.verdict == Verdict::even);
      CHECK(out.photons.empty());
      CHECK(out.fidelity == Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("a detected photon projects onto the odd sector") {
  model::DeviceParams d;
  d.eta = 1.0;
  for (auto opts : {ParityOptions{}, ideal_pulse()}) {
    const ParityMeasurement pm(d, opts);
    int photons = 0;
    for (int k = 0; k < 100; ++k) {
      const auto out = pm.measure(kOddBell, dynamics::derive_seed(12, k));
      CHECK(out.post_state.trace() == Approx(1.0).epsilon(1e-12));
      CHECK((out.verdict == Verdict::odd) == !out.photons.empty());
      if (out.verdict != Verdict::odd) continue;
      ++photons;
      CHECK(out.fidelity == Approx(1.0).epsilon(1e-12));
      CHECK(hilbert::fidelity(out.post_state, kOddBell) == Approx(1.0).epsilon(1e-12));
    }
    CHECK(photons > 90);  // the rest decay after the window
  }
}

TEST_CASE("no-detection branch follows the repeated-cycle formula") {
  for (int cycles : {1, 2, 3}) {
    auto o = ideal_pulse();
    o.cycles = cycles;
    o.window = 25000.0;
    const ParityMeasurement pm(model::DeviceParams{}, o);
    const auto nd = pm.no_detection_state(DensityOperator::pure(kPlus));
    const auto target = model::embed_computational(*parity_target(kPlus, Verdict::even));
    CHECK(hilbert::fidelity(nd.normalized(), target) ==
          Approx(analytics::fidelity_repeat(cycles, 0.5)).epsilon(1e-9));
  }
}

TEST_CASE("ensemble statistics") {
  auto o = ideal_pulse();
  o.unraveling = dynamics::Unraveling::full;
  const ParityMeasurement pm(model::DeviceParams{}, o);
  const auto st = run_parity_ensemble(pm, kPlus, 4000, 3);
  CHECK(st.runs == 4000);
  CHECK(st.even + st.odd == 4000);
  CHECK(st.photon_times.size() == static_cast<std::size_t>(st.odd));
  // odd verdict probability: (1/2) eta (1 - e^-10)
  const double p_odd = 0.25 * (1.0 - std::exp(-10.0));
  CHECK(std::abs(st.odd / 4000.0 - p_odd) < 3.0 * std::sqrt(p_odd * (1 - p_odd) / 4000.0));
  CHECK(std::abs(st.even_fidelity - 2.0 / 3.0) < 3.0 * st.even_fidelity_stderr + 1e-4);
  CHECK(st.odd_fidelity == Approx(1.0).epsilon(1e-9));

  const auto again = run_parity_ensemble(pm, kPlus, 4000, 3);
  CHECK(again.photon_times == st.photon_times);
  CHECK(again.even_fidelity == st.even_fidelity);
}

TEST_CASE("regime policy") {
  model::DeviceParams strong;
  strong.drive = 1.0;
  CHECK_THROWS_AS(ParityMeasurement(strong, {}), RegimeViolation);
  ParityOptions warn;
  warn.regime_policy = RegimePolicy::warn;
  const ParityMeasurement pm(strong, warn);
  CHECK_FALSE(pm.warnings().empty());
  ParityOptions ignore;
  ignore.regime_policy = RegimePolicy::ignore;
  CHECK(ParityMeasurement(strong, ignore).warnings().empty());
  CHECK(ParityMeasurement(model::DeviceParams{}, {}).warnings().empty());
}

TEST_CASE("phase correction") {
  std::mt19937_64 rng(8);
  const auto psi = testing_support::random_state(4, rng);
  CHECK(phase_correct(psi, 0.0, 123.0).amplitudes().isApprox(psi.amplitudes()));

  const double t = units::kPi * units::kHbar;  // delta t / hbar = pi for delta = 1 meV
  const StateVector shifted{0.0, 0.6, -0.8, 0.0};
  const auto fixed = phase_correct(shifted, 1.0, t);
  CHECK(std::abs(fixed.inner(StateVector{0.0, 0.6, 0.8, 0.0})) == Approx(1.0).epsilon(1e-12));

  // a detection time off by 1 ps leaves sin^2(delta dt / 2 hbar)
  const double phi = units::phase(1.0, 500.0);
  const StateVector acquired{0.0, kH, kH * std::polar(1.0, phi), 0.0};
  const auto late = phase_correct(acquired, 1.0, 501.0);
  CHECK(1.0 - std::norm(late.inner(kOddBell)) == Approx(analytics::timing_infidelity(1.0, 1.0)).epsilon(1e-12));
  CHECK(1.0 - std::norm(late.inner(kOddBell)) == Approx(0.474).epsilon(1e-3));

  const auto rho = DensityOperator::pure(acquired);
  CHECK(hilbert::fidelity(phase_correct(rho, 1.0, 500.0), kOddBell) == Approx(1.0).epsilon(1e-12));
  const auto nine = model::embed_computational(acquired);
  CHECK(std::abs(phase_correct(nine, 1.0, 500.0).inner(model::embed_computational(kOddBell))) ==
        Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gate process algebra") {
  const auto ideal = ideal_parity_process();
  CHECK(ideal.outcomes() == 2);
  CHECK(ideal.trace_preservation_defect() < 1e-14);
  CHECK(ideal.probabilities[0] == Approx(0.5));

  std::mt19937_64 rng(9);
  const auto rho = testing_support::random_density(4, rng).matrix();
  CMatrix pe = CMatrix::Zero(4, 4), po = CMatrix::Zero(4, 4);
  pe(0, 0) = pe(3, 3) = 1.0;
  po(1, 1) = po(2, 2) = 1.0;
  CHECK(ideal.apply(ideal.index("even"), rho).isApprox(pe * rho * pe));
  CHECK(ideal.apply(ideal.index("odd"), rho).isApprox(po * rho * po));

  SUBCASE("Kraus round trip") {
    for (int k = 0; k < 2; ++k) {
      const auto rebuilt = process_from_kraus({"x"}, {ideal.kraus(k)});
      CHECK(rebuilt.choi[0].isApprox(ideal.choi[k], 1e-12));
    }
  }
  SUBCASE("fidelity formulas agree with a depolarising oracle") {
    const CMatrix u = cnot_matrix();
    CHECK(average_gate_fidelity(choi_of_unitary(u), u) == Approx(1.0).epsilon(1e-14));
    for (double p : {0.0, 0.1, 0.5, 1.0}) {
      // E(rho) = (1 - p) U rho U^dag + p I / 4
      std::vector<CMatrix> kraus = {std::sqrt(1.0 - p * 15.0 / 16.0) * u};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          if (a == 0 && b == 0) continue;
          CMatrix pa = CMatrix::Zero(2, 2), pb = CMatrix::Zero(2, 2);
          auto pauli = [](int i) {
            CMatrix m = CMatrix::Zero(2, 2);
            if (i == 0) m = CMatrix::Identity(2, 2);
            if (i == 1) m(0, 1) = m(1, 0) = 1.0;
            if (i == 2) m(0, 1) = Complex(0, -1), m(1, 0) = Complex(0, 1);
            if (i == 3) m(0, 0) = 1.0, m(1, 1) = -1.0;
            return m;
          };
          kraus.push_back(std::sqrt(p / 16.0) * u * hilbert::kron(pauli(a), pauli(b)));
        }
      const auto proc = process_from_kraus({"dep"}, {kraus});
      CHECK(proc.trace_preservation_defect() < 1e-12);
      const double expected = (1.0 - p) + p / 4.0;
      CHECK(average_gate_fidelity(proc.choi[0], u) == Approx(expected).epsilon(1e-12));
      CHECK(average_gate_fidelity_choi(proc.choi[0], u) == Approx(expected).epsilon(1e-12));
    }
  }
  CHECK(diamond_distance_bound(ideal.choi[0], ideal.choi[0]) == 0.0);
  CHECK(diamond_distance_bound(ideal.choi[0], ideal.choi[1]) == Approx(2.0));
  CHECK(tomography_inputs().size() == 16);
}

TEST_CASE("parity tomography of the ideal device") {
  model::DeviceParams d;
  d.eta = 1.0;
  const auto proc = extract_parity_process(d, ideal_pulse(), {1000, 21});
  const auto ideal = ideal_parity_process();
  CHECK(diamond_distance_bound(proc.choi[0], ideal.choi[0]) <= 1e-3);
  CHECK(diamond_distance_bound(proc.choi[1], ideal.choi[1]) <= 1e-3);
  CHECK(proc.trace_preservation_defect() <= 1e-3);
  CHECK(proc.min_choi_eigenvalue > -1e-9);
  CHECK(proc.condition_number < 20.0);
  CHECK_THROWS(extract_parity_process(d, ideal_pulse(), {999, 1}));
}

TEST_CASE("with a blind detector the odd outcome never occurs") {
  model::DeviceParams d;
  d.eta = 0.0;
  const ParityMeasurement pm(d, ideal_pulse());
  const auto proc = extract_parity_process(pm, {1000, 22});
  CHECK(proc.choi[proc.index("odd")].isZero(0.0));

  // brute force: unconditional evolution of every |i><j|
  const auto ch = model::channels(d, model::ChannelMode::ideal);
  const dynamics::CompiledSchedule unconditional(pm.schedule(), ch, dynamics::unconditional_efficiencies(ch));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      CMatrix e = CMatrix::Zero(9, 9);
      e(model::kComputational[i], model::kComputational[j]) = 1.0;
      const CMatrix out = hilbert::unvec(unconditional.run(hilbert::vec(e)), 9);
      CMatrix in4 = CMatrix::Zero(4, 4);
      in4(i, j) = 1.0;
      CHECK((model::computational_block(out) - proc.apply(proc.index("even"), in4)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("CNOT from two parity measurements") {
  const auto c = find_cnot_construction();
  const auto again = find_cnot_construction();
  CHECK(c.table() == again.table());
  const auto res = cnot_compose(ideal_parity_process(), c);
  CHECK(res.average_gate_fidelity == Approx(1.0).epsilon(1e-9));
  CHECK(res.average_gate_fidelity_choi == Approx(1.0).epsilon(1e-9));
  CHECK(res.branch_deviation < 1e-9);
  CHECK(res.branches.outcomes() == 8);
  CHECK(res.choi.isApprox(choi_of_unitary(cnot_matrix()), 1e-12));

  CMatrix in = CMatrix::Zero(4, 4);
  in(2, 2) = 1.0;  // |10>, control set
  const CMatrix out = apply_choi(res.choi, in);
  CHECK(out(3, 3).real() == Approx(1.0));

  SUBCASE("simulated parity is reported, not asserted") {
    auto o = ideal_pulse();
    o.cycles = 3;
    const auto proc = extract_parity_process(model::DeviceParams{}, o, {1000, 23});
    const auto sim = cnot_compose(proc, c);
    CHECK(sim.average_gate_fidelity > 0.0);
    CHECK(sim.average_gate_fidelity <= 1.0 + 1e-9);
    CHECK(sim.average_gate_fidelity == Approx(sim.average_gate_fidelity_choi).epsilon(1e-12));
  }
}

TEST_CASE("graph growth") {
  SUBCASE("certain bonds") {
    for (auto s : {GrowthStrategy::naive, GrowthStrategy::divide_and_conquer}) {
      GraphGrowthConfig g;
      g.p = 1.0;
      g.chain_length = 8;
      g.strategy = s;
      g.runs = 100;
      const auto st = grow_graph(g, 1);
      for (long long a : st.attempts) CHECK(a == 7);
    }
  }
  SUBCASE("exact expectations match the Markov chain") {
    for (int n = 1; n <= 12; ++n) {
      for (double p : {0.3, 0.5, 0.9}) {
        if (n > 1) {
          // the absorbing-chain system has condition number ~ p^-n
          CHECK(expected_attempts(GrowthStrategy::naive, n, p) ==
                Approx(oracle::naive_attempts_markov(n, p)).epsilon(1e-9));
        }
        CHECK(expected_attempts(GrowthStrategy::divide_and_conquer, n, p) ==
              Approx(oracle::halving_attempts(n, p)).epsilon(1e-12));
      }
    }
    CHECK(expected_attempts(GrowthStrategy::naive, 8, 0.5) == 254.0);
    CHECK(expected_attempts(GrowthStrategy::divide_and_conquer, 8, 0.5) == 42.0);
  }
  SUBCASE("sampled means") {
    GraphGrowthConfig g;
    const auto two = grow_graph(g, 2);
    CHECK(std::abs(two.mean - 2.0) / 2.0 < 0.05);
    CHECK(geometric_goodness_of_fit(two.attempts, 0.5).p_value > 1e-3);
    CHECK(geometric_goodness_of_fit(two.attempts, 0.3).p_value < 1e-6);
    g.chain_length = 8;
    const auto naive = grow_graph(g, 3);
    g.strategy = GrowthStrategy::divide_and_conquer;
    const auto dc = grow_graph(g, 4);
    CHECK(dc.mean < naive.mean);
    CHECK(std::abs(naive.mean - 254.0) / 254.0 < 0.05);
    CHECK(std::abs(dc.mean - 42.0) / 42.0 < 0.05);
  }
  SUBCASE("budget") {
    GraphGrowthConfig g;
    g.chain_length = 8;
    g.p = 0.1;
    g.max_attempts = 10;
    g.runs = 50;
    const auto st = grow_graph(g, 5);
    CHECK(st.exceeded + st.completed == 50);
    CHECK(st.exceeded > 40);
  }
  SUBCASE("invalid configurations") {
    GraphGrowthConfig g;
    g.p = 0.0;
    CHECK_THROWS(g.validate());
    g = {};
    g.chain_length = 1;
    CHECK_THROWS(g.validate());
  }
}
