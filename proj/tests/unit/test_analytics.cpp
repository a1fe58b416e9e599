#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qdparity/analytics.hpp"
#include "qdparity/errors.hpp"
#include "qdparity/units.hpp"

using namespace qdparity;
using namespace qdparity::analytics;
using doctest::Approx;

TEST_CASE("p_even closed form") {
  for (double eta : {0.0, 0.25, 0.5, 1.0}) CHECK(p_even(0.0, eta, 0.001) == Approx(0.5).epsilon(1e-15));
  CHECK(p_even(1e7, 1.0, 0.001) == Approx(1.0).epsilon(1e-12));
  // mpmath, 30 digits
  CHECK(p_even(1000.0, 0.5, 0.001) == Approx(0.59384548495130938132).epsilon(1e-15));
  for (double t : {0.0, 10.0, 500.0, 3000.0, 10000.0}) {
    for (double eta : {0.1, 0.5, 0.9}) {
      CHECK(p_even(t, eta, 0.001) == Approx(oracle::p_even_from_populations(t, eta, 0.001)).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(p_even(-1.0, 0.5, 0.001), Error);
}

TEST_CASE("p_even increases with time and efficiency") {
  for (double eta : {0.2, 0.5, 0.8}) {
    double last = 0.0;
    for (int k = 0; k <= 100; ++k) {
      const double p = p_even(100.0 * k, eta, 0.001);
      CHECK(p >= last);
      CHECK(p <= fidelity_no_photon(eta) + 1e-15);
      last = p;
    }
  }
}

TEST_CASE("no-photon and repeated-cycle fidelities") {
  CHECK(fidelity_no_photon(1.0) == 1.0);
  CHECK(fidelity_no_photon(0.5) == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(fidelity_no_photon(0.0) == 0.5);
  CHECK(fidelity_repeat(1, 0.5) == Approx(fidelity_no_photon(0.5)).epsilon(1e-15));
  CHECK(fidelity_repeat(3, 0.5) == Approx(8.0 / 9.0).epsilon(1e-15));
  for (int n : {1, 2, 7}) CHECK(fidelity_repeat(n, 1.0) == 1.0);
  for (double eta : {0.1, 0.5, 0.9}) {
    for (int n = 1; n < 10; ++n) CHECK(fidelity_repeat(n + 1, eta) > fidelity_repeat(n, eta));
  }
  CHECK_THROWS_AS(fidelity_repeat(0, 0.5), Error);
  CHECK_THROWS_AS(fidelity_no_photon(1.5), Error);
}

TEST_CASE("spatial interference factor") {
  CHECK(f_spatial(0.0) == Approx(1.0 / 3.0).epsilon(1e-15));
  // mpmath, 30 digits
  CHECK(f_spatial(0.05) == Approx(0.33308337053330310835).epsilon(1e-15));
  CHECK(f_spatial(1.0) == Approx(0.23913362692838292815).epsilon(1e-14));
  CHECK(f_spatial(3.0) == Approx(-0.18341166382161489589).epsilon(1e-14));
  CHECK(f_spatial(10.0) == Approx(-0.070095499448687290759).epsilon(1e-14));
  CHECK(f_spatial(units::kPi) == Approx(-2.0 / (units::kPi * units::kPi)).epsilon(1e-14));

  SUBCASE("agrees with quadrature") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int k = 0; k < 200; ++k) {
      const double a = k < 20 ? 0.05 * k : u(rng);
      CHECK(std::abs(f_spatial(a) - oracle::f_spatial_quadrature(a)) < 1e-12);
    }
  }
  SUBCASE("both branches agree at the switch") {
    const double a = kSpatialSeriesSwitch;
    CHECK(std::abs(f_spatial_series(a) - f_spatial_closed_form(a)) < 1e-13);
  }
  CHECK_THROWS_AS(f_spatial(-0.1), Error);
}

TEST_CASE("spatial fidelity") {
  CHECK(fidelity_spatial(0.0) == Approx(1.0).epsilon(1e-15));
  CHECK(fidelity_spatial(0.05) == Approx(0.99962505579995466253).epsilon(1e-15));
  CHECK(fidelity_spatial(0.05) >= 0.999);
  CHECK(fidelity_spatial(0.05) < 1.0);
  // 2 eV photons, dots 5 nm apart
  CHECK(wavenumber(2000.0) * 5.0 == Approx(0.050677307176793954528).epsilon(1e-12));
}

TEST_CASE("detuning coefficients") {
  const auto zero = detuning_coefficients(0.0, 0.85);
  CHECK(std::isinf(zero.A));
  CHECK(zero.b1 == Approx(std::sqrt(0.5)));
  CHECK(zero.b2 == Approx(std::sqrt(0.5)));

  const auto equal = detuning_coefficients(0.85, 0.85);
  CHECK(equal.A == Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(equal.b1 == Approx(0.38268343236508977173).epsilon(1e-15));
  CHECK(equal.b2 == Approx(0.92387953251128675613).epsilon(1e-15));

  const auto none = detuning_coefficients(1.0, 1e-9);
  CHECK(none.A == Approx(1.0));
  CHECK(none.b1 == Approx(0.0).epsilon(1e-8));
  CHECK(none.b2 == Approx(1.0));

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int k = 0; k < 100; ++k) {
    const auto c = detuning_coefficients(u(rng), u(rng));
    CHECK(c.A >= 1.0);
    CHECK(c.b1 * c.b1 + c.b2 * c.b2 == Approx(1.0).epsilon(1e-12));
    CHECK(c.b1 >= 0.0);
    CHECK(c.b2 <= 1.0);
  }
  CHECK_THROWS_AS(detuning_coefficients(0.0, 0.0), Error);
}

TEST_CASE("detuned phase and timing error") {
  CHECK(detuned_phase(0.0, 123.0) == Complex(1.0, 0.0));
  const double t_pi = units::kPi * units::kHbar;
  CHECK(std::abs(detuned_phase(1.0, t_pi) - Complex(-1.0, 0.0)) < 1e-15);
  CHECK(std::arg(detuned_phase(1.0, 1.0)) == Approx(1.0 / 0.6582119569).epsilon(1e-15));
  CHECK(std::arg(detuned_phase(1.0, 1.0)) == Approx(1.5193).epsilon(1e-4));
  CHECK(timing_infidelity(1.0, 1.0) == Approx(0.47424696081910741696).epsilon(1e-15));
  CHECK(timing_infidelity(1.0, 0.0) == 0.0);
  CHECK(timing_infidelity(0.0, 5.0) == 0.0);
}
