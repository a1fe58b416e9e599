#pragma once

// Closed-form results for the two-dot parity measurement.

#include "qdparity/hilbert.hpp"

namespace qdparity::analytics {

/// Probability of the even subspace at time t [ps] given no detected photon, for
/// an equal superposition of the four spin states excited at t = 0.
double p_even(double t, double eta, double gamma1);

/// Even-outcome fidelity once emission has finished: 1 / (2 - eta).
double fidelity_no_photon(double eta);

/// Even-outcome fidelity after n photonless excite-decay cycles: 1 / (1 + (1 - eta)^n).
double fidelity_repeat(int cycles, double eta);

/// Below this argument f_spatial uses its Taylor series; the closed form loses
/// digits to cancellation in the O(alpha^3) numerator.
inline constexpr double kSpatialSeriesSwitch = 0.5;

/// Interference factor between emission from the two dots at separation
/// alpha = k0 * dr: (2 a cos a + (a^2 - 2) sin a) / a^3, with f(0) = 1/3.
double f_spatial(double alpha);
double f_spatial_closed_form(double alpha);
double f_spatial_series(double alpha);

/// Odd-outcome fidelity for dots a distance k0_dr apart: (1 + 3 f) / 2.
double fidelity_spatial(double k0_dr);

/// Optical wavenumber of a photon of the given energy [nm^-1].
double wavenumber(double energy_meV);

struct DetuningCoefficients {
  double A = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
};

/// A = sqrt(1 + V_F^2 / delta^2), b_{1,2} = sqrt((A -+ 1) / (2A)). The delta -> 0
/// limit (A -> infinity, b1 = b2 = 1/sqrt 2) is returned explicitly; delta = V_F = 0
/// is undefined and throws.
DetuningCoefficients detuning_coefficients(double delta, double foerster);

/// exp(i delta t / hbar): relative phase picked up by |10> when a photon from
/// detuned dots is detected at time t.
Complex detuned_phase(double delta, double t);

/// Infidelity left after correcting with a detection time that is off by dt:
/// sin^2(delta dt / (2 hbar)).
double timing_infidelity(double delta, double dt);

}  // namespace qdparity::analytics
