#pragma once

// Two optically driven quantum dots: Hamiltonians, decay channels and the
// parameter regime in which the parity measurement is selective.
//
// The Hilbert space decouples into H0 = {|00>}, H1 = {|01>, |0X>, |10>, |X0>} and
// H2 = {|11>, |1X>, |X1>, |XX>}. All dynamics are done in the frame rotating at
// the laser frequency, within the rotating wave approximation.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "qdparity/channel.hpp"
#include "qdparity/hilbert.hpp"

namespace qdparity::model {

/// Physical constants of the two-dot device. Energies in meV, rates in ps^-1.
/// Defaults are the typical values for self-assembled dots: V_F = 0.85 meV,
/// V_XX = 5 meV, Omega = 0.1 meV, exciton energy 2 eV, tau_X = 1 ns, eta = 0.5.
struct DeviceParams {
  double omega_a = 2000.0;      // exciton creation energy, dot a
  double omega_b = 2000.0;      // exciton creation energy, dot b
  double foerster = 0.85;       // V_F
  double biexciton = 5.0;       // V_XX
  double drive = 0.1;           // laser coupling Omega
  double omega_laser = 2000.0;  // laser frequency (frame frequency)
  double gamma1 = 0.001;        // single-exciton decay, 1 / tau_X
  double gamma2 = 0.002;        // |psi+> -> |11>
  double gamma3 = 0.002;        // |XX> -> |psi+>
  double eta = 0.5;             // detector efficiency
  double k0_dr = 0.05;          // dot separation times optical wavenumber

  double delta() const { return omega_a - omega_b; }

  /// Sets gamma1 = 1 / tau and the H2 leakage rates to 2 * gamma1.
  DeviceParams& set_lifetime(double tau_ps);

  /// Throws on negative rates, eta outside [0, 1] or V_F = 0.
  void validate() const;

  friend bool operator==(const DeviceParams&, const DeviceParams&) = default;
};

enum class ChannelMode { ideal, detuned, h2_leakage, detuned_h2_leakage };

std::string_view to_string(ChannelMode mode);
ChannelMode parse_channel_mode(std::string_view name);
constexpr bool is_detuned(ChannelMode m) { return m == ChannelMode::detuned || m == ChannelMode::detuned_h2_leakage; }
constexpr bool has_leakage(ChannelMode m) { return m == ChannelMode::h2_leakage || m == ChannelMode::detuned_h2_leakage; }

/// Composite indices of the two-dot basis states.
namespace idx {
inline constexpr int k00 = 0, k01 = 1, k0X = 2, k10 = 3, k11 = 4, k1X = 5, kX0 = 6, kX1 = 7, kXX = 8;
}

inline constexpr std::array<int, 1> kH0 = {idx::k00};
inline constexpr std::array<int, 4> kH1 = {idx::k01, idx::k0X, idx::k10, idx::kX0};
inline constexpr std::array<int, 4> kH2 = {idx::k11, idx::k1X, idx::kX1, idx::kXX};
/// Spin states |00>, |01>, |10>, |11> in the order of the 2-qubit basis.
inline constexpr std::array<int, 4> kComputational = {idx::k00, idx::k01, idx::k10, idx::k11};

hilbert::StateVector psi_plus();
hilbert::StateVector psi_minus();

/// Rotating-frame Hamiltonian (9x9), laser at `omega_laser`, drive Omega/2 on each
/// |1> <-> |X> transition, Foerster coupling |1X> <-> |X1>, biexciton shift on |XX>.
hilbert::Operator hamiltonian_rotating(const DeviceParams& p);

/// The H2 block in the basis {|11>, psi+, psi-, |XX>}, written out directly.
hilbert::Operator h2_block(const DeviceParams& p);

/// Columns are |11>, psi+, psi-, |XX> expressed in {|11>, |1X>, |X1>, |XX>}.
hilbert::Operator psi_basis();

std::vector<LindbladChannel> channels(const DeviceParams& p, ChannelMode mode);

/// Hamiltonian used by the dynamics for a given channel mode and drive amplitude.
/// Detuned modes describe the dots in the frame co-rotating with each dot's own
/// transition, where the detuning lives only in the phase of the collapse operator.
hilbert::Operator dynamics_hamiltonian(const DeviceParams& p, ChannelMode mode, double drive);

/// Duration of a square pi pulse, pi * hbar / Omega [ps].
double pi_pulse_duration(double drive);

/// Instantaneous, perfectly selective pi pulse: -i sigma_x on |01> <-> |0X> and
/// |10> <-> |X0>, identity on H0 and H2.
hilbert::Operator ideal_pi_pulse();

/// Projectors onto the even (H0 + H2) and odd (H1) spin-parity sectors.
hilbert::Operator even_projector();
hilbert::Operator odd_projector();

/// Two-qubit state (index 2a + b) placed on the spin states of the two dots.
hilbert::StateVector embed_computational(const hilbert::StateVector& qubits);
/// 4x4 block of a two-dot density matrix on the spin states; trace < 1 when excited.
CMatrix computational_block(const CMatrix& rho9);

/// Energy-equivalent linewidth 2 pi hbar gamma1 [ueV].
double decay_linewidth_ueV(const DeviceParams& p);

struct RegimeCondition {
  std::string name;
  double ratio = 0.0;
  bool passed = false;
  bool resonant = false;  // required for resonant dots; otherwise a detuned-dot condition
};

struct RegimeReport {
  double threshold = 10.0;
  std::vector<RegimeCondition> conditions;

  bool all_passed() const;
  bool resonant_passed() const;
  const RegimeCondition& at(std::string_view name) const;
};

/// Each much-greater-than condition of the scheme as a ratio, passing at >= threshold.
RegimeReport validate_regime(const DeviceParams& p, double threshold = 10.0);

}  // namespace qdparity::model
