#pragma once

// The parity measurement (pi pulse, monitored decay, repeat), its process
// tomography, the CNOT built from two parity measurements, and graph-state growth.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qdparity/dynamics.hpp"
#include "qdparity/model.hpp"

namespace qdparity::protocols {

enum class Verdict { even, odd };
std::string_view to_string(Verdict v);

enum class PulseShape {
  square,  // constant drive Omega for pi hbar / Omega, decay active throughout
  ideal,   // instantaneous, perfectly selective pi rotation
};
std::string_view to_string(PulseShape p);
PulseShape parse_pulse_shape(std::string_view name);

enum class RegimePolicy { ignore, warn, reject };
std::string_view to_string(RegimePolicy p);
RegimePolicy parse_regime_policy(std::string_view name);

struct ParityOptions {
  model::ChannelMode mode = model::ChannelMode::ideal;
  int cycles = 1;
  PulseShape pulse = PulseShape::square;
  double window = 10000.0;  // ps of monitored decay per cycle
  dynamics::Unraveling unraveling = dynamics::Unraveling::observed;
  dynamics::IntegratorConfig integrator;
  RegimePolicy regime_policy = RegimePolicy::reject;
  double regime_threshold = 10.0;
  /// Undo the detuning phase using the recorded photon time.
  bool phase_correction = true;
};

struct PhotonEvent {
  double time = 0.0;  // ps from the start of the first cycle
  int cycle = 0;
};

struct ParityOutcome {
  Verdict verdict = Verdict::even;
  std::vector<PhotonEvent> photons;
  int cycles_executed = 0;
  /// Normalised two-qubit state on the spin levels (phase-corrected when detuned).
  hilbert::DensityOperator post_state;
  /// Population left outside the spin levels, dropped from post_state.
  double leakage = 0.0;
  /// Overlap of the full conditional state with the input projected onto the
  /// verdict's parity sector; 0 when that projection vanishes.
  double fidelity = 0.0;
};

/// Parity sector of an input and the normalised target it should be projected to.
/// Returns nullopt when the input has no weight in that sector.
std::optional<hilbert::StateVector> parity_target(const hilbert::StateVector& qubits, Verdict verdict);

/// One compiled parity-measurement procedure. Immutable; safe to share across threads.
class ParityMeasurement {
 public:
  /// Checks the regime per options.regime_policy; `reject` throws RegimeViolation.
  ParityMeasurement(model::DeviceParams device, ParityOptions options);

  const model::DeviceParams& device() const { return device_; }
  const ParityOptions& options() const { return options_; }
  const model::RegimeReport& regime() const { return regime_; }
  /// Regime conditions that failed, as readable lines; empty when all passed.
  const std::vector<std::string>& warnings() const { return warnings_; }
  const dynamics::PulseSchedule& schedule() const { return sampler_.schedule(); }

  /// `input` is a two-qubit state (dim 4) or a two-dot state on the spin levels (dim 9).
  ParityOutcome measure(const hilbert::StateVector& input, std::uint64_t seed) const;
  ParityOutcome measure(const hilbert::DensityOperator& input, std::uint64_t seed) const;

  /// Unnormalised two-dot state after every cycle without a detected photon; its
  /// trace is the probability of the even verdict.
  hilbert::DensityOperator no_detection_state(const hilbert::DensityOperator& input) const;

 private:
  hilbert::DensityOperator embed(const hilbert::DensityOperator& input) const;
  ParityOutcome finish(const dynamics::TrajectoryRecord& rec, const hilbert::StateVector* qubits) const;

  model::DeviceParams device_;
  ParityOptions options_;
  std::vector<std::string> warnings_;  // filled while regime_ is computed
  model::RegimeReport regime_;
  dynamics::TrajectorySampler sampler_;
  dynamics::CompiledSchedule no_detection_;
};

ParityOutcome parity_measure(const hilbert::StateVector& psi0, const model::DeviceParams& device,
                             const ParityOptions& options, std::uint64_t seed);

struct ParityStats {
  int runs = 0;
  int odd = 0;
  int even = 0;
  double odd_fidelity = 0.0;  // mean over odd verdicts
  double odd_fidelity_stderr = 0.0;
  double even_fidelity = 0.0;
  double even_fidelity_stderr = 0.0;
  double mean_leakage = 0.0;
  std::vector<double> photon_times;  // first photon of every odd run, ps
  std::vector<int> photon_cycles;
  /// Mean normalised post-states per verdict (4x4); empty matrices when unseen.
  CMatrix mean_odd_state;
  CMatrix mean_even_state;
};

ParityStats run_parity_ensemble(const ParityMeasurement& pm, const hilbert::StateVector& input, int runs,
                                std::uint64_t master_seed);

/// Multiplies the |10> amplitude by exp(-i delta t / hbar), undoing detuned_phase.
/// Works on two-qubit (dim 4) and two-dot (dim 9) states.
hilbert::StateVector phase_correct(const hilbert::StateVector& state, double delta, double t_detect);
hilbert::DensityOperator phase_correct(const hilbert::DensityOperator& state, double delta, double t_detect);

// ---------------------------------------------------------------------------
// Processes on two qubits.

/// Outcome-labelled maps on two qubits, each stored as its (unnormalised) Choi
/// matrix J = sum_ij |i><j| (x) E(|i><j|), input factor first.
struct GateProcess {
  std::vector<std::string> labels;
  std::vector<CMatrix> choi;
  /// Outcome probabilities for the maximally mixed input.
  std::vector<double> probabilities;
  /// Condition number of the tomography input set (1 for analytic processes).
  double condition_number = 1.0;
  /// Most negative Choi eigenvalue across outcomes; >= 0 for CP maps.
  double min_choi_eigenvalue = 0.0;

  int outcomes() const { return static_cast<int>(choi.size()); }
  int index(std::string_view label) const;
  /// Unnormalised output of outcome k for a 4x4 input.
  CMatrix apply(int k, const CMatrix& rho) const;
  /// Kraus operators of outcome k from the Choi eigendecomposition; negative
  /// eigenvalues are dropped.
  std::vector<CMatrix> kraus(int k) const;
  /// Choi matrix of the sum over outcomes.
  CMatrix total_choi() const;
  /// max over inputs of |1 - sum_k tr E_k(rho)|, computed exactly from the Choi matrices.
  double trace_preservation_defect() const;
};

/// E(rho) = sum_ij rho_ij J_(ij block).
CMatrix apply_choi(const CMatrix& choi, const CMatrix& rho);
GateProcess process_from_kraus(std::vector<std::string> labels, const std::vector<std::vector<CMatrix>>& kraus);
CMatrix choi_of_unitary(const CMatrix& u);

/// Ideal parity projectors: "even" -> P_e rho P_e, "odd" -> P_o rho P_o.
GateProcess ideal_parity_process();

/// Upper bound on the diamond distance, (1/2) ||J1 - J2||_1.
double diamond_distance_bound(const CMatrix& choi1, const CMatrix& choi2);

/// Average gate fidelity of a two-qubit map against a unitary, from the Pauli
/// basis: (sum_P tr[U P U^dag E(P)] + d^2) / (d^2 (d + 1)).
double average_gate_fidelity(const CMatrix& choi, const CMatrix& unitary);
/// Same quantity from the entanglement fidelity, (d F_e + 1) / (d + 1).
double average_gate_fidelity_choi(const CMatrix& choi, const CMatrix& unitary);

/// The 16 tomography inputs {|0>, |1>, |+>, |+i>}^(x)2 as density matrices.
std::vector<CMatrix> tomography_inputs();

struct TomographyOptions {
  int ensemble_size = 2000;  // photon-run samples per input
  std::uint64_t seed = 1;
};

/// Reconstructs the even/odd maps of a parity measurement from its action on the
/// tomography inputs. The even map is exact (no-detection branch of the linear
/// master equation); the odd map weights the exact odd probability by the
/// mean photon-run post-state, sampled per input.
GateProcess extract_parity_process(const ParityMeasurement& pm, const TomographyOptions& options);
GateProcess extract_parity_process(const model::DeviceParams& device, const ParityOptions& parity,
                                   const TomographyOptions& options);

// ---------------------------------------------------------------------------
// CNOT from two parity measurements on (control, ancilla) and (ancilla, target).

/// Local Cliffords applied to both qubits before a parity measurement (and undone
/// after it), turning a ZZ measurement into XX (H) or YY (H S^dag).
enum class ParityBasis { zz, xx, yy };
enum class AncillaBasis { z, x, y };

struct CnotConstruction {
  int ancilla_state = 0;  // index into {|0>, |1>, |+>, |->, |+i>, |-i>}
  ParityBasis first = ParityBasis::zz;
  ParityBasis second = ParityBasis::zz;
  AncillaBasis readout = AncillaBasis::z;
  /// corrections[m1][m2][m3] = Pauli pair (control, target), Pauli index 0..3 = I, X, Y, Z.
  std::array<std::array<std::array<std::array<int, 2>, 2>, 2>, 2> corrections{};

  /// Human-readable correction table.
  std::string table() const;
};

/// Exhaustive search over ancilla states, parity bases, ancilla readout basis and
/// per-branch Pauli corrections for a construction in which every branch of the
/// ideal circuit equals CNOT up to global phase. Deterministic; throws if none exists.
CnotConstruction find_cnot_construction();

struct CnotResult {
  CnotConstruction construction;
  /// Corrected branch maps on (control, target), labelled "m1m2m3".
  GateProcess branches;
  CMatrix choi;  // sum of the corrected branches
  double average_gate_fidelity = 0.0;
  double average_gate_fidelity_choi = 0.0;
  /// max over branches of 1 - <w|J_b|w> / (d tr J_b), w = vec(CNOT): zero iff every
  /// branch is CNOT up to a scalar, i.e. all branches agree up to global phase.
  double branch_deviation = 0.0;
};

CMatrix cnot_matrix();

/// Composes the CNOT from a two-outcome parity process ("even", "odd").
CnotResult cnot_compose(const GateProcess& parity, const CnotConstruction& construction);
CnotResult cnot_compose(const GateProcess& parity);

// ---------------------------------------------------------------------------
// Graph-state growth at the level of probabilistic bonds.

enum class GrowthStrategy {
  naive,               // add one bond at a time; a failure destroys the whole chain
  divide_and_conquer,  // grow both halves, then join; a failed join destroys both halves
};
std::string_view to_string(GrowthStrategy s);
GrowthStrategy parse_growth_strategy(std::string_view name);

struct GraphGrowthConfig {
  int chain_length = 2;  // nodes
  double p = 0.5;        // success probability per bond attempt
  GrowthStrategy strategy = GrowthStrategy::naive;
  long long max_attempts = 100'000'000;
  int runs = 10000;

  void validate() const;
};

struct GrowthStats {
  GraphGrowthConfig config;
  int completed = 0;
  int exceeded = 0;  // runs stopped at max_attempts
  std::vector<long long> attempts;  // completed runs only
  double mean = 0.0;
  double stderr_mean = 0.0;
};

GrowthStats grow_graph(const GraphGrowthConfig& config, std::uint64_t seed);

/// Exact expected number of bond attempts to finish the chain.
double expected_attempts(GrowthStrategy strategy, int chain_length, double p);

struct GoodnessOfFit {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
};

/// Pearson chi-square test of attempt counts against Geometric(p) on {1, 2, ...};
/// bins with expected count < 5 are merged into the tail.
GoodnessOfFit geometric_goodness_of_fit(const std::vector<long long>& attempts, double p);

}  // namespace qdparity::protocols
