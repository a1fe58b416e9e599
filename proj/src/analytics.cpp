#include "qdparity/analytics.hpp"

#include <cmath>
#include <limits>

#include "qdparity/errors.hpp"
#include "qdparity/units.hpp"

namespace qdparity::analytics {

double p_even(double t, double eta, double gamma1) {
  if (t < 0.0) throw Error("p_even: negative time");
  return 1.0 / (2.0 + eta * (std::exp(-gamma1 * t) - 1.0));
}

double fidelity_no_photon(double eta) {
  if (eta < 0.0 || eta > 1.0) throw Error("fidelity_no_photon: eta outside [0, 1]");
  return 1.0 / (2.0 - eta);
}

double fidelity_repeat(int cycles, double eta) {
  if (cycles < 1) throw Error("fidelity_repeat: need at least one cycle");
  if (eta < 0.0 || eta > 1.0) throw Error("fidelity_repeat: eta outside [0, 1]");
  return 1.0 / (1.0 + std::pow(1.0 - eta, cycles));
}

double f_spatial_closed_form(double alpha) {
  const double a2 = alpha * alpha;
  return (2.0 * alpha * std::cos(alpha) + (a2 - 2.0) * std::sin(alpha)) / (a2 * alpha);
}

double f_spatial_series(double alpha) {
  // sum_n (-1)^n alpha^(2n) / ((2n)! (2n + 3))
  const double a2 = alpha * alpha;
  double power = 1.0;  // (-1)^n alpha^(2n) / (2n)!
  double sum = 0.0;
  for (int n = 0; n < 40; ++n) {
    const double term = power / (2.0 * n + 3.0);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    power *= -a2 / ((2.0 * n + 1.0) * (2.0 * n + 2.0));
  }
  return sum;
}

double f_spatial(double alpha) {
  if (alpha < 0.0) throw Error("f_spatial: negative argument");
  return alpha < kSpatialSeriesSwitch ? f_spatial_series(alpha) : f_spatial_closed_form(alpha);
}

double fidelity_spatial(double k0_dr) { return 0.5 * (1.0 + 3.0 * f_spatial(k0_dr)); }

double wavenumber(double energy_meV) { return energy_meV / units::kHbarC; }

DetuningCoefficients detuning_coefficients(double delta, double foerster) {
  if (delta == 0.0) {
    if (foerster == 0.0) throw Error("detuning_coefficients: undefined for delta = V_F = 0");
    const double b = 1.0 / std::sqrt(2.0);
    return {std::numeric_limits<double>::infinity(), b, b};
  }
  const double ratio = foerster / delta;
  const double A = std::sqrt(1.0 + ratio * ratio);
  // (A - 1) / (2A) written to avoid cancellation when A is close to 1.
  const double b1_sq = ratio * ratio / (2.0 * A * (A + 1.0));
  const double b2_sq = (A + 1.0) / (2.0 * A);
  return {A, std::sqrt(b1_sq), std::sqrt(b2_sq)};
}

Complex detuned_phase(double delta, double t) {
  if (t < 0.0) throw Error("detuned_phase: negative time");
  return std::polar(1.0, units::phase(delta, t));
}

double timing_infidelity(double delta, double dt) {
  const double s = std::sin(0.5 * units::phase(delta, dt));
  return s * s;
}

}  // namespace qdparity::analytics
