#pragma once

// Energies are in meV, times in ps, rates in ps^-1.

namespace qdparity::units {

/// Reduced Planck constant [meV ps].
inline constexpr double kHbar = 0.6582119569;

/// hbar * c [meV nm].
inline constexpr double kHbarC = 197326.9804;

inline constexpr double kPi = 3.14159265358979323846;

/// Phase accumulated by an energy over a time: E t / hbar [rad].
constexpr double phase(double energy_meV, double time_ps) { return energy_meV * time_ps / kHbar; }

/// Angular frequency of an energy [rad/ps].
constexpr double angular(double energy_meV) { return energy_meV / kHbar; }

}  // namespace qdparity::units
