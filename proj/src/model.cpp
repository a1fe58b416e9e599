#include "qdparity/model.hpp"

#include <cmath>
#include <limits>

#include "qdparity/analytics.hpp"
#include "qdparity/errors.hpp"
#include "qdparity/units.hpp"

namespace qdparity::model {

using hilbert::Operator;
using hilbert::StateVector;

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double ratio(double num, double den) {
  num = std::abs(num);
  den = std::abs(den);
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

CMatrix ket_bra(int row, int col) {
  CMatrix m = CMatrix::Zero(hilbert::kTwoDotDim, hilbert::kTwoDotDim);
  m(row, col) = 1.0;
  return m;
}

}  // namespace

CMatrix LindbladChannel::at(double t) const {
  if (phased.size() == 0) return op;
  if (phase_rate == 0.0) return op + phased;
  return op + std::polar(1.0, -units::phase(phase_rate, t)) * phased;
}

void LindbladChannel::validate() const {
  if (op.rows() != op.cols()) throw DimensionMismatch("channel " + name + ": operator is not square");
  if (phased.size() != 0 && (phased.rows() != op.rows() || phased.cols() != op.cols())) {
    throw DimensionMismatch("channel " + name + ": phased part has the wrong shape");
  }
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw Error("channel " + name + ": efficiency outside [0, 1]");
}

DeviceParams& DeviceParams::set_lifetime(double tau_ps) {
  if (!(tau_ps > 0.0)) throw Error("lifetime must be positive");
  gamma1 = 1.0 / tau_ps;
  gamma2 = 2.0 * gamma1;
  gamma3 = 2.0 * gamma1;
  return *this;
}

void DeviceParams::validate() const {
  if (gamma1 < 0.0 || gamma2 < 0.0 || gamma3 < 0.0) throw Error("decay rates must be non-negative");
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error("detector efficiency must lie in [0, 1]");
  if (foerster == 0.0) throw Error("the parity measurement needs a non-zero Foerster coupling");
  if (k0_dr < 0.0) throw Error("k0_dr must be non-negative");
}

std::string_view to_string(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::ideal: return "ideal";
    case ChannelMode::detuned: return "detuned";
    case ChannelMode::h2_leakage: return "h2_leakage";
    case ChannelMode::detuned_h2_leakage: return "detuned+h2_leakage";
  }
  return "?";
}

ChannelMode parse_channel_mode(std::string_view name) {
  if (name == "ideal") return ChannelMode::ideal;
  if (name == "detuned") return ChannelMode::detuned;
  if (name == "h2_leakage") return ChannelMode::h2_leakage;
  if (name == "detuned+h2_leakage" || name == "detuned_h2_leakage") return ChannelMode::detuned_h2_leakage;
  throw ConfigError("unknown channel mode: " + std::string(name));
}

StateVector psi_plus() {
  return kInvSqrt2 * (StateVector::basis(9, idx::k1X) + StateVector::basis(9, idx::kX1));
}

StateVector psi_minus() {
  return kInvSqrt2 * (StateVector::basis(9, idx::k1X) - StateVector::basis(9, idx::kX1));
}

Operator hamiltonian_rotating(const DeviceParams& p) {
  using hilbert::Level;
  const double det_a = p.omega_a - p.omega_laser;
  const double det_b = p.omega_b - p.omega_laser;

  CMatrix h = CMatrix::Zero(9, 9);
  for (int i = 0; i < 9; ++i) {
    const auto label = hilbert::BasisLabel::from_index(i);
    if (label.a == Level::exciton) h(i, i) += det_a;
    if (label.b == Level::exciton) h(i, i) += det_b;
  }
  h(idx::kXX, idx::kXX) += p.biexciton;
  h(idx::k1X, idx::kX1) += p.foerster;
  h(idx::kX1, idx::k1X) += p.foerster;

  // Omega/2 on |1> <-> |X> of each dot, whatever the other dot holds.
  const double half = 0.5 * p.drive;
  for (int other = 0; other < hilbert::kDotLevels; ++other) {
    const auto o = static_cast<Level>(other);
    const int a_one = hilbert::two_dot_index(Level::one, o);
    const int a_exc = hilbert::two_dot_index(Level::exciton, o);
    h(a_one, a_exc) += half;
    h(a_exc, a_one) += half;
    const int b_one = hilbert::two_dot_index(o, Level::one);
    const int b_exc = hilbert::two_dot_index(o, Level::exciton);
    h(b_one, b_exc) += half;
    h(b_exc, b_one) += half;
  }
  return Operator(std::move(h));
}

Operator h2_block(const DeviceParams& p) {
  const double det_a = p.omega_a - p.omega_laser;
  const double det_b = p.omega_b - p.omega_laser;
  const double coupling = p.drive * kInvSqrt2;  // Omega' / 2 with Omega' = sqrt(2) Omega
  const double mean = 0.5 * (det_a + det_b);

  // Order: |11>, psi+, psi-, |XX>.
  CMatrix h = CMatrix::Zero(4, 4);
  h(1, 1) = mean + p.foerster;
  h(2, 2) = mean - p.foerster;
  h(3, 3) = det_a + det_b + p.biexciton;
  h(1, 2) = h(2, 1) = 0.5 * (det_b - det_a);
  h(0, 1) = h(1, 0) = coupling;
  h(1, 3) = h(3, 1) = coupling;
  return Operator(std::move(h));
}

Operator psi_basis() {
  CMatrix u = CMatrix::Zero(4, 4);
  u(0, 0) = 1.0;
  u(1, 1) = kInvSqrt2;
  u(2, 1) = kInvSqrt2;
  u(1, 2) = kInvSqrt2;
  u(2, 2) = -kInvSqrt2;
  u(3, 3) = 1.0;
  return Operator(std::move(u));
}

std::vector<LindbladChannel> channels(const DeviceParams& p, ChannelMode mode) {
  std::vector<LindbladChannel> out;
  const double s1 = std::sqrt(p.gamma1);

  LindbladChannel c1;
  c1.name = "c1";
  c1.efficiency = p.eta;
  c1.detectable = true;
  if (is_detuned(mode)) {
    c1.op = s1 * ket_bra(idx::k10, idx::kX0);
    c1.phased = s1 * ket_bra(idx::k01, idx::k0X);
    c1.phase_rate = p.delta();
  } else {
    c1.op = s1 * (ket_bra(idx::k10, idx::kX0) + ket_bra(idx::k01, idx::k0X));
  }
  out.push_back(std::move(c1));

  if (has_leakage(mode)) {
    const StateVector plus = psi_plus();
    LindbladChannel c2;
    c2.name = "c2";
    c2.op = std::sqrt(p.gamma2) * hilbert::dyad(StateVector::basis(9, idx::k11), plus).matrix();
    c2.efficiency = p.eta;
    c2.detectable = false;
    out.push_back(std::move(c2));

    LindbladChannel c3;
    c3.name = "c3";
    c3.op = std::sqrt(p.gamma3) * hilbert::dyad(plus, StateVector::basis(9, idx::kXX)).matrix();
    c3.efficiency = p.eta;
    c3.detectable = false;
    out.push_back(std::move(c3));
  }
  return out;
}

Operator dynamics_hamiltonian(const DeviceParams& p, ChannelMode mode, double drive) {
  DeviceParams q = p;
  q.drive = drive;
  if (is_detuned(mode)) {
    q.omega_a = q.omega_laser;
    q.omega_b = q.omega_laser;
  }
  return hamiltonian_rotating(q);
}

double pi_pulse_duration(double drive) {
  if (!(drive > 0.0)) throw Error("pi pulse needs a positive drive amplitude");
  return units::kPi * units::kHbar / drive;
}

Operator ideal_pi_pulse() {
  CMatrix u = CMatrix::Identity(9, 9);
  const Complex minus_i(0.0, -1.0);
  for (auto [ground, excited] : {std::pair{idx::k01, idx::k0X}, std::pair{idx::k10, idx::kX0}}) {
    u(ground, ground) = 0.0;
    u(excited, excited) = 0.0;
    u(ground, excited) = minus_i;
    u(excited, ground) = minus_i;
  }
  return Operator(std::move(u));
}

Operator even_projector() {
  CMatrix m = CMatrix::Zero(9, 9);
  for (int i : kH0) m(i, i) = 1.0;
  for (int i : kH2) m(i, i) = 1.0;
  return Operator(std::move(m));
}

Operator odd_projector() {
  CMatrix m = CMatrix::Zero(9, 9);
  for (int i : kH1) m(i, i) = 1.0;
  return Operator(std::move(m));
}

StateVector embed_computational(const StateVector& qubits) {
  if (qubits.dim() != 4) throw DimensionMismatch("embed_computational expects a two-qubit state");
  CVector v = CVector::Zero(9);
  for (int k = 0; k < 4; ++k) v(kComputational[k]) = qubits[k];
  return StateVector(std::move(v));
}

CMatrix computational_block(const CMatrix& rho9) {
  if (rho9.rows() != 9 || rho9.cols() != 9) throw DimensionMismatch("computational_block expects a 9x9 matrix");
  CMatrix out(4, 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out(r, c) = rho9(kComputational[r], kComputational[c]);
  }
  return out;
}

double decay_linewidth_ueV(const DeviceParams& p) { return 2.0 * units::kPi * units::kHbar * p.gamma1 * 1000.0; }

bool RegimeReport::all_passed() const {
  for (const auto& c : conditions) {
    if (!c.passed) return false;
  }
  return true;
}

bool RegimeReport::resonant_passed() const {
  for (const auto& c : conditions) {
    if (c.resonant && !c.passed) return false;
  }
  return true;
}

const RegimeCondition& RegimeReport::at(std::string_view name) const {
  for (const auto& c : conditions) {
    if (c.name == name) return c;
  }
  throw Error("no regime condition named " + std::string(name));
}

RegimeReport validate_regime(const DeviceParams& p, double threshold) {
  RegimeReport report;
  report.threshold = threshold;
  auto add = [&](std::string name, double r, bool resonant) {
    report.conditions.push_back({std::move(name), r, r >= threshold, resonant});
  };

  // Resonant dots: |V_F|, |V_XX| >> |Omega'| / 2.
  const double half_rabi_h2 = p.drive * kInvSqrt2;
  add("foerster_vs_drive", ratio(p.foerster, half_rabi_h2), true);
  add("biexciton_vs_drive", ratio(p.biexciton, half_rabi_h2), true);

  // Detuned dots. The drive enters with its rotating-wave amplitude Omega/2 so that
  // delta -> 0 (b1 + b2 -> sqrt 2) gives back the resonant conditions.
  const double delta = p.delta();
  add("drive_vs_detuning", ratio(p.drive, delta), false);
  const auto b = analytics::detuning_coefficients(delta, p.foerster);
  const double detuned_coupling = 0.5 * p.drive * (b.b1 + b.b2);
  add("splitting_vs_detuned_drive", ratio(std::hypot(delta, p.foerster), detuned_coupling), false);
  add("biexciton_vs_detuned_drive", ratio(p.biexciton, detuned_coupling), false);
  add("foerster_vs_detuning", ratio(p.foerster, delta), false);
  return report;
}

}  // namespace qdparity::model
