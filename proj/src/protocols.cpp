#include "qdparity/protocols.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "qdparity/errors.hpp"
#include "qdparity/units.hpp"

namespace qdparity::protocols {

using hilbert::DensityOperator;
using hilbert::StateVector;

namespace {

constexpr int kQubitPair = 4;
constexpr double kInvSqrt2 = 0.70710678118654752440;

CMatrix spin_embedding() {
  CMatrix e = CMatrix::Zero(hilbert::kTwoDotDim, kQubitPair);
  for (int k = 0; k < kQubitPair; ++k) e(model::kComputational[k], k) = 1.0;
  return e;
}

double stderr_of(double sum, double sum_sq, int n) {
  if (n < 2) return 0.0;
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1));
  return std::sqrt(var / n);
}

dynamics::PulseSchedule build_schedule(const model::DeviceParams& device, const ParityOptions& options) {
  if (options.cycles < 1) throw Error("a parity measurement needs at least one cycle");
  if (!(options.window > 0.0)) throw Error("the detection window must be positive");
  dynamics::PulseSchedule schedule;
  const auto idle = model::dynamics_hamiltonian(device, options.mode, 0.0);
  for (int c = 1; c <= options.cycles; ++c) {
    const std::string n = std::to_string(c);
    if (options.pulse == PulseShape::ideal) {
      schedule.stages.push_back(dynamics::Stage::instant("pulse " + n, model::ideal_pi_pulse()));
    } else {
      schedule.stages.push_back(dynamics::Stage::evolve(
          "pulse " + n, model::dynamics_hamiltonian(device, options.mode, device.drive),
          model::pi_pulse_duration(device.drive)));
    }
    schedule.stages.push_back(dynamics::Stage::evolve("window " + n, idle, options.window));
  }
  return schedule;
}

model::RegimeReport checked_regime(const model::DeviceParams& device, const ParityOptions& options,
                                   std::vector<std::string>& warnings) {
  device.validate();
  model::RegimeReport report = model::validate_regime(device, options.regime_threshold);
  if (options.regime_policy == RegimePolicy::ignore) return report;
  const bool detuned = model::is_detuned(options.mode);
  for (const auto& c : report.conditions) {
    if (c.passed || (!detuned && !c.resonant)) continue;
    std::ostringstream os;
    os << c.name << " = " << c.ratio << " < " << report.threshold;
    warnings.push_back(os.str());
  }
  if (!warnings.empty() && options.regime_policy == RegimePolicy::reject) {
    std::string msg = "device outside the parity-measurement regime:";
    for (const auto& w : warnings) msg += " " + w + ";";
    throw RegimeViolation(msg);
  }
  return report;
}

StateVector qubits_of(const StateVector& input) {
  if (input.dim() == kQubitPair) return input;
  if (input.dim() != hilbert::kTwoDotDim) throw DimensionMismatch("parity input must have dimension 4 or 9");
  CVector q(kQubitPair);
  double outside = input.norm() * input.norm();
  for (int k = 0; k < kQubitPair; ++k) {
    q(k) = input[model::kComputational[k]];
    outside -= std::norm(q(k));
  }
  if (outside > 1e-12) throw Error("parity input has weight outside the spin states");
  return StateVector(std::move(q));
}

}  // namespace

std::string_view to_string(Verdict v) { return v == Verdict::odd ? "odd" : "even"; }

std::string_view to_string(PulseShape p) { return p == PulseShape::ideal ? "ideal" : "square"; }

PulseShape parse_pulse_shape(std::string_view name) {
  if (name == "square") return PulseShape::square;
  if (name == "ideal") return PulseShape::ideal;
  throw ConfigError("unknown pulse shape: " + std::string(name));
}

std::string_view to_string(RegimePolicy p) {
  switch (p) {
    case RegimePolicy::ignore: return "ignore";
    case RegimePolicy::warn: return "warn";
    case RegimePolicy::reject: return "reject";
  }
  return "?";
}

RegimePolicy parse_regime_policy(std::string_view name) {
  if (name == "ignore") return RegimePolicy::ignore;
  if (name == "warn") return RegimePolicy::warn;
  if (name == "reject") return RegimePolicy::reject;
  throw ConfigError("unknown regime policy: " + std::string(name));
}

std::optional<StateVector> parity_target(const StateVector& qubits, Verdict verdict) {
  if (qubits.dim() != kQubitPair) throw DimensionMismatch("parity_target expects a two-qubit state");
  CVector v = CVector::Zero(kQubitPair);
  // Two-qubit index 2a + b: even = {00, 11} = {0, 3}, odd = {01, 10} = {1, 2}.
  const std::array<int, 2> keep = verdict == Verdict::even ? std::array{0, 3} : std::array{1, 2};
  for (int k : keep) v(k) = qubits[k];
  if (v.norm() < 1e-12) return std::nullopt;
  return StateVector(v / v.norm());
}

// ---------------------------------------------------------------------------

ParityMeasurement::ParityMeasurement(model::DeviceParams device, ParityOptions options)
    : device_(std::move(device)),
      options_(std::move(options)),
      regime_(checked_regime(device_, options_, warnings_)),
      sampler_(build_schedule(device_, options_), model::channels(device_, options_.mode), options_.integrator,
               {options_.unraveling, true}),
      no_detection_(sampler_.schedule(), sampler_.channels(), dynamics::detection_efficiencies(sampler_.channels()),
                    options_.integrator) {}

DensityOperator ParityMeasurement::embed(const DensityOperator& input) const {
  if (input.dim() == kQubitPair) {
    const CMatrix e = spin_embedding();
    return DensityOperator(e * input.matrix() * e.adjoint(), input.is_normalized());
  }
  if (input.dim() != hilbert::kTwoDotDim) throw DimensionMismatch("parity input must have dimension 4 or 9");
  const double inside = model::computational_block(input.matrix()).trace().real();
  if (std::abs(input.trace() - inside) > 1e-12) throw Error("parity input has weight outside the spin states");
  return input;
}

DensityOperator ParityMeasurement::no_detection_state(const DensityOperator& input) const {
  return no_detection_.run(embed(input));
}

ParityOutcome ParityMeasurement::measure(const StateVector& input, std::uint64_t seed) const {
  const StateVector qubits = qubits_of(input);
  return finish(sampler_.sample(embed(DensityOperator::pure(qubits)), seed), &qubits);
}

ParityOutcome ParityMeasurement::measure(const DensityOperator& input, std::uint64_t seed) const {
  return finish(sampler_.sample(embed(input), seed), nullptr);
}

ParityOutcome ParityMeasurement::finish(const dynamics::TrajectoryRecord& rec, const StateVector* qubits) const {
  ParityOutcome out;
  for (const auto& j : rec.jumps) {
    if (j.detected) out.photons.push_back({j.time, j.stage / 2});
  }
  out.verdict = out.photons.empty() ? Verdict::even : Verdict::odd;
  out.cycles_executed = out.photons.empty() ? options_.cycles : out.photons.front().cycle + 1;

  DensityOperator state = rec.final_state;
  if (out.verdict == Verdict::odd && model::is_detuned(options_.mode) && options_.phase_correction) {
    state = phase_correct(state, device_.delta(), out.photons.front().time);
  }
  const CMatrix block = model::computational_block(state.matrix());
  const double inside = block.trace().real();
  out.leakage = std::max(0.0, 1.0 - inside);
  out.post_state = inside > 1e-300 ? DensityOperator(block / inside, true) : DensityOperator::maximally_mixed(4);
  if (qubits) {
    if (auto target = parity_target(*qubits, out.verdict)) {
      out.fidelity = hilbert::fidelity(state, model::embed_computational(*target));
    }
  }
  return out;
}

ParityOutcome parity_measure(const StateVector& psi0, const model::DeviceParams& device, const ParityOptions& options,
                             std::uint64_t seed) {
  return ParityMeasurement(device, options).measure(psi0, seed);
}

ParityStats run_parity_ensemble(const ParityMeasurement& pm, const StateVector& input, int runs,
                                std::uint64_t master_seed) {
  if (runs < 1) throw Error("an ensemble needs at least one run");
  const auto outcomes = dynamics::parallel_map<ParityOutcome>(
      runs, [&](int i) { return pm.measure(input, dynamics::derive_seed(master_seed, static_cast<std::uint64_t>(i))); });

  ParityStats st;
  st.runs = runs;
  double fid[2] = {0, 0}, fid_sq[2] = {0, 0}, leak = 0.0;
  CMatrix sum[2] = {CMatrix::Zero(4, 4), CMatrix::Zero(4, 4)};
  for (const auto& o : outcomes) {
    const int c = o.verdict == Verdict::odd ? 1 : 0;
    (c ? st.odd : st.even) += 1;
    fid[c] += o.fidelity;
    fid_sq[c] += o.fidelity * o.fidelity;
    sum[c] += o.post_state.matrix();
    leak += o.leakage;
    if (c) {
      st.photon_times.push_back(o.photons.front().time);
      st.photon_cycles.push_back(o.photons.front().cycle);
    }
  }
  if (st.odd > 0) {
    st.odd_fidelity = fid[1] / st.odd;
    st.odd_fidelity_stderr = stderr_of(fid[1], fid_sq[1], st.odd);
    st.mean_odd_state = sum[1] / st.odd;
  }
  if (st.even > 0) {
    st.even_fidelity = fid[0] / st.even;
    st.even_fidelity_stderr = stderr_of(fid[0], fid_sq[0], st.even);
    st.mean_even_state = sum[0] / st.even;
  }
  st.mean_leakage = leak / runs;
  return st;
}

namespace {

int ten_index(int dim) {
  if (dim == kQubitPair) return 2;
  if (dim == hilbert::kTwoDotDim) return model::idx::k10;
  throw DimensionMismatch("phase_correct expects a two-qubit or two-dot state");
}

}  // namespace

StateVector phase_correct(const StateVector& state, double delta, double t_detect) {
  CVector v = state.amplitudes();
  v(ten_index(state.dim())) *= std::polar(1.0, -units::phase(delta, t_detect));
  return StateVector(std::move(v));
}

DensityOperator phase_correct(const DensityOperator& state, double delta, double t_detect) {
  const int k = ten_index(state.dim());
  CMatrix m = state.matrix();
  const Complex z = std::polar(1.0, -units::phase(delta, t_detect));
  m.row(k) *= z;
  m.col(k) *= std::conj(z);
  return DensityOperator(std::move(m), state.is_normalized());
}

// ---------------------------------------------------------------------------

CMatrix apply_choi(const CMatrix& choi, const CMatrix& rho) {
  const int d = static_cast<int>(rho.rows());
  if (choi.rows() != d * d) throw DimensionMismatch("Choi matrix does not match the input");
  CMatrix out = CMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (rho(i, j) != 0.0) out += rho(i, j) * choi.block(i * d, j * d, d, d);
    }
  }
  return out;
}

int GateProcess::index(std::string_view label) const {
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == label) return static_cast<int>(k);
  }
  throw Error("process has no outcome " + std::string(label));
}

CMatrix GateProcess::apply(int k, const CMatrix& rho) const { return apply_choi(choi.at(k), rho); }

std::vector<CMatrix> GateProcess::kraus(int k) const {
  const CMatrix& j = choi.at(k);
  const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(j.rows()))));
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (j + j.adjoint()));
  std::vector<CMatrix> out;
  const double cutoff = 1e-14 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  for (int e = static_cast<int>(j.rows()) - 1; e >= 0; --e) {
    const double lambda = es.eigenvalues()(e);
    if (lambda <= cutoff) continue;
    CMatrix kr(d, d);
    for (int i = 0; i < d; ++i) {
      for (int o = 0; o < d; ++o) kr(o, i) = std::sqrt(lambda) * es.eigenvectors()(i * d + o, e);
    }
    out.push_back(std::move(kr));
  }
  return out;
}

CMatrix GateProcess::total_choi() const {
  if (choi.empty()) throw Error("empty process");
  CMatrix sum = CMatrix::Zero(choi.front().rows(), choi.front().cols());
  for (const auto& j : choi) sum += j;
  return sum;
}

double GateProcess::trace_preservation_defect() const {
  const CMatrix j = total_choi();
  const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(j.rows()))));
  CMatrix t = CMatrix::Identity(d, d);
  for (int i = 0; i < d; ++i) {
    for (int k = 0; k < d; ++k) t(i, k) -= j.block(i * d, k * d, d, d).trace();
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (t + t.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

CVector choi_vector(const CMatrix& k) {
  const int d = static_cast<int>(k.cols());
  CVector w(d * d);
  for (int i = 0; i < d; ++i) {
    for (int o = 0; o < d; ++o) w(i * d + o) = k(o, i);
  }
  return w;
}

double min_eigenvalue(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

void finalize(GateProcess& p) {
  p.probabilities.clear();
  p.min_choi_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& j : p.choi) {
    const double d = std::sqrt(static_cast<double>(j.rows()));
    p.probabilities.push_back(j.trace().real() / d);
    p.min_choi_eigenvalue = std::min(p.min_choi_eigenvalue, min_eigenvalue(j));
  }
}

}  // namespace

GateProcess process_from_kraus(std::vector<std::string> labels, const std::vector<std::vector<CMatrix>>& kraus) {
  if (labels.size() != kraus.size()) throw Error("one label per outcome expected");
  GateProcess p;
  p.labels = std::move(labels);
  for (const auto& ops : kraus) {
    if (ops.empty()) throw Error("outcome without Kraus operators");
    const int d = static_cast<int>(ops.front().rows());
    CMatrix j = CMatrix::Zero(d * d, d * d);
    for (const auto& k : ops) {
      const CVector w = choi_vector(k);
      j += w * w.adjoint();
    }
    p.choi.push_back(std::move(j));
  }
  finalize(p);
  return p;
}

CMatrix choi_of_unitary(const CMatrix& u) {
  const CVector w = choi_vector(u);
  return w * w.adjoint();
}

GateProcess ideal_parity_process() {
  CMatrix even = CMatrix::Zero(4, 4), odd = CMatrix::Zero(4, 4);
  even(0, 0) = even(3, 3) = 1.0;
  odd(1, 1) = odd(2, 2) = 1.0;
  return process_from_kraus({"even", "odd"}, {{even}, {odd}});
}

double diamond_distance_bound(const CMatrix& choi1, const CMatrix& choi2) {
  return 0.5 * hilbert::trace_norm(choi1 - choi2);
}

namespace {

const std::array<CMatrix, 4>& paulis() {
  static const std::array<CMatrix, 4> p = [] {
    std::array<CMatrix, 4> out;
    out[0] = CMatrix::Identity(2, 2);
    out[1] = CMatrix::Zero(2, 2);
    out[1](0, 1) = out[1](1, 0) = 1.0;
    out[2] = CMatrix::Zero(2, 2);
    out[2](0, 1) = Complex(0, -1);
    out[2](1, 0) = Complex(0, 1);
    out[3] = CMatrix::Zero(2, 2);
    out[3](0, 0) = 1.0;
    out[3](1, 1) = -1.0;
    return out;
  }();
  return p;
}

}  // namespace

double average_gate_fidelity(const CMatrix& choi, const CMatrix& unitary) {
  const int d = static_cast<int>(unitary.rows());
  if (d != kQubitPair) throw DimensionMismatch("average_gate_fidelity expects a two-qubit unitary");
  double sum = 0.0;
  for (const auto& pa : paulis()) {
    for (const auto& pb : paulis()) {
      const CMatrix p = hilbert::kron(pa, pb);
      sum += (unitary * p * unitary.adjoint() * apply_choi(choi, p)).trace().real();
    }
  }
  return (sum + d * d) / (d * d * (d + 1.0));
}

double average_gate_fidelity_choi(const CMatrix& choi, const CMatrix& unitary) {
  const int d = static_cast<int>(unitary.rows());
  const CVector w = choi_vector(unitary);
  const double fe = (w.adjoint() * choi * w)(0).real() / (d * d);
  return (d * fe + 1.0) / (d + 1.0);
}

std::vector<CMatrix> tomography_inputs() {
  std::array<CVector, 4> single;
  single[0] = CVector::Zero(2);
  single[0](0) = 1.0;
  single[1] = CVector::Zero(2);
  single[1](1) = 1.0;
  single[2] = CVector::Constant(2, kInvSqrt2);
  single[3] = CVector(2);
  single[3] << kInvSqrt2, Complex(0.0, kInvSqrt2);
  std::vector<CMatrix> out;
  for (const auto& a : single) {
    for (const auto& b : single) {
      const CVector v = hilbert::kron(a, b);
      out.push_back(v * v.adjoint());
    }
  }
  return out;
}

GateProcess extract_parity_process(const ParityMeasurement& pm, const TomographyOptions& options) {
  if (options.ensemble_size < 1000) throw Error("process tomography needs an ensemble of at least 1000 runs");
  const auto inputs = tomography_inputs();
  const int n = static_cast<int>(inputs.size());
  CMatrix x(16, n), y_even(16, n), y_odd(16, n);

  for (int k = 0; k < n; ++k) {
    const DensityOperator rho(inputs[k], true);
    const CMatrix no_detection = pm.no_detection_state(rho).matrix();
    const CMatrix even = model::computational_block(no_detection);
    const double p_odd = 1.0 - no_detection.trace().real();

    CMatrix odd = CMatrix::Zero(4, 4);
    if (p_odd > 1e-12) {
      const std::uint64_t input_seed = dynamics::derive_seed(options.seed, static_cast<std::uint64_t>(k));
      const auto outcomes = dynamics::parallel_map<std::optional<CMatrix>>(options.ensemble_size, [&](int r) {
        const auto o = pm.measure(rho, dynamics::derive_seed(input_seed, static_cast<std::uint64_t>(r)));
        if (o.verdict != Verdict::odd) return std::optional<CMatrix>();
        return std::optional<CMatrix>((1.0 - o.leakage) * o.post_state.matrix());
      });
      int hits = 0;
      for (const auto& o : outcomes) {
        if (!o) continue;
        odd += *o;
        ++hits;
      }
      if (hits > 0) odd *= p_odd / hits;
    }
    x.col(k) = hilbert::vec(inputs[k]);
    y_even.col(k) = hilbert::vec(even);
    y_odd.col(k) = hilbert::vec(odd);
  }

  Eigen::JacobiSVD<CMatrix> svd(x);
  const auto& sv = svd.singularValues();
  GateProcess p;
  p.labels = {"even", "odd"};
  p.condition_number = sv(0) / sv(sv.size() - 1);
  const CMatrix x_inv = x.inverse();
  for (const CMatrix* y : {&y_even, &y_odd}) {
    const CMatrix s = *y * x_inv;  // vec(E(rho)) = s vec(rho)
    CMatrix j(16, 16);
    for (int i = 0; i < 4; ++i) {
      for (int l = 0; l < 4; ++l) j.block(i * 4, l * 4, 4, 4) = hilbert::unvec(s.col(l * 4 + i), 4);
    }
    p.choi.push_back(std::move(j));
  }
  finalize(p);
  return p;
}

GateProcess extract_parity_process(const model::DeviceParams& device, const ParityOptions& parity,
                                   const TomographyOptions& options) {
  return extract_parity_process(ParityMeasurement(device, parity), options);
}

// ---------------------------------------------------------------------------

namespace {

// Three qubits ordered (control, ancilla, target); index 4c + 2a + t.
constexpr int kThree = 8;

CMatrix basis_rotation(ParityBasis b) {
  const CMatrix h = kInvSqrt2 * (CMatrix(2, 2) << 1, 1, 1, -1).finished();
  CMatrix s_dag = CMatrix::Identity(2, 2);
  s_dag(1, 1) = Complex(0, -1);
  switch (b) {
    case ParityBasis::zz: return CMatrix::Identity(2, 2);
    case ParityBasis::xx: return h;
    case ParityBasis::yy: return h * s_dag;
  }
  return CMatrix::Identity(2, 2);
}

std::array<CVector, 2> readout_states(AncillaBasis b) {
  CVector z0 = CVector::Zero(2), z1 = CVector::Zero(2);
  z0(0) = 1.0;
  z1(1) = 1.0;
  switch (b) {
    case AncillaBasis::z: return {z0, z1};
    case AncillaBasis::x: return {kInvSqrt2 * (z0 + z1), kInvSqrt2 * (z0 - z1)};
    case AncillaBasis::y: return {kInvSqrt2 * (z0 + Complex(0, 1) * z1), kInvSqrt2 * (z0 - Complex(0, 1) * z1)};
  }
  return {z0, z1};
}

CVector ancilla_state(int k) {
  CVector v = CVector::Zero(2);
  switch (k) {
    case 0: v(0) = 1.0; break;
    case 1: v(1) = 1.0; break;
    case 2: v << kInvSqrt2, kInvSqrt2; break;
    case 3: v << kInvSqrt2, -kInvSqrt2; break;
    case 4: v << kInvSqrt2, Complex(0, kInvSqrt2); break;
    case 5: v << kInvSqrt2, Complex(0, -kInvSqrt2); break;
    default: throw Error("ancilla state index out of range");
  }
  return v;
}

constexpr const char* kAncillaNames[] = {"|0>", "|1>", "|+>", "|->", "|+i>", "|-i>"};
constexpr const char* kPauliNames[] = {"I", "X", "Y", "Z"};

const char* name(ParityBasis b) {
  switch (b) {
    case ParityBasis::zz: return "ZZ";
    case ParityBasis::xx: return "XX";
    case ParityBasis::yy: return "YY";
  }
  return "?";
}

const char* name(AncillaBasis b) {
  switch (b) {
    case AncillaBasis::z: return "Z";
    case AncillaBasis::x: return "X";
    case AncillaBasis::y: return "Y";
  }
  return "?";
}

// A two-qubit operator on (control, ancilla) when first_pair, else on (ancilla, target).
CMatrix on_pair(const CMatrix& op, bool first_pair) {
  const CMatrix id = CMatrix::Identity(2, 2);
  return first_pair ? hilbert::kron(op, id) : hilbert::kron(id, op);
}

// Applies a two-qubit map, given by its Choi matrix, to one pair of a three-qubit state.
CMatrix apply_on_pair(const CMatrix& choi, const CMatrix& rho, bool first_pair) {
  auto full = [&](int pair, int spectator) { return first_pair ? 2 * pair + spectator : 4 * spectator + pair; };
  CMatrix out = CMatrix::Zero(kThree, kThree);
  for (int s = 0; s < 2; ++s) {
    for (int s2 = 0; s2 < 2; ++s2) {
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          const Complex r = rho(full(i, s), full(j, s2));
          if (r == 0.0) continue;
          const auto block = choi.block(i * 4, j * 4, 4, 4);
          for (int o = 0; o < 4; ++o) {
            for (int o2 = 0; o2 < 4; ++o2) out(full(o, s), full(o2, s2)) += r * block(o, o2);
          }
        }
      }
    }
  }
  return out;
}

// (I (x) <b| (x) I) M (I (x) |a> (x) I): three-qubit operator to (control, target).
CMatrix contract_ancilla(const CMatrix& m, const CVector& in, const CVector& out) {
  CMatrix k = CMatrix::Zero(4, 4);
  for (int c = 0; c < 2; ++c) {
    for (int t = 0; t < 2; ++t) {
      for (int c2 = 0; c2 < 2; ++c2) {
        for (int t2 = 0; t2 < 2; ++t2) {
          Complex sum = 0.0;
          for (int a = 0; a < 2; ++a) {
            for (int a2 = 0; a2 < 2; ++a2) sum += std::conj(out(a)) * m(4 * c + 2 * a + t, 4 * c2 + 2 * a2 + t2) * in(a2);
          }
          k(2 * c + t, 2 * c2 + t2) = sum;
        }
      }
    }
  }
  return k;
}

CMatrix pauli_pair(const std::array<int, 2>& q) { return hilbert::kron(paulis()[q[0]], paulis()[q[1]]); }

// |<CNOT, K>| / (|K| |CNOT|) == 1 iff K is proportional to CNOT.
bool proportional_to_cnot(const CMatrix& k) {
  const CMatrix cnot = cnot_matrix();
  const double nk = k.norm();
  if (nk < 1e-12) return false;
  return std::abs((cnot.adjoint() * k).trace()) / (nk * cnot.norm()) > 1.0 - 1e-10;
}

}  // namespace

CMatrix cnot_matrix() {
  CMatrix u = CMatrix::Zero(4, 4);
  u(0, 0) = u(1, 1) = 1.0;
  u(2, 3) = u(3, 2) = 1.0;
  return u;
}

std::string CnotConstruction::table() const {
  std::ostringstream os;
  os << "ancilla " << kAncillaNames[ancilla_state] << "\n";
  os << "parity 1 (control, ancilla) " << name(first) << "\n";
  os << "parity 2 (ancilla, target) " << name(second) << "\n";
  os << "ancilla readout " << name(readout) << "\n";
  os << "m1    m2    m3 | control target\n";
  for (int m1 = 0; m1 < 2; ++m1) {
    for (int m2 = 0; m2 < 2; ++m2) {
      for (int m3 = 0; m3 < 2; ++m3) {
        const auto& q = corrections[m1][m2][m3];
        os << (m1 ? "odd " : "even") << "  " << (m2 ? "odd " : "even") << "  " << m3 << "  |    " << kPauliNames[q[0]]
           << "      " << kPauliNames[q[1]] << "\n";
      }
    }
  }
  return os.str();
}

CnotConstruction find_cnot_construction() {
  const std::array<CMatrix, 2> projectors = [] {
    CMatrix even = CMatrix::Zero(4, 4), odd = CMatrix::Zero(4, 4);
    even(0, 0) = even(3, 3) = 1.0;
    odd(1, 1) = odd(2, 2) = 1.0;
    return std::array{even, odd};
  }();
  const std::array bases{ParityBasis::zz, ParityBasis::xx, ParityBasis::yy};
  const std::array readouts{AncillaBasis::z, AncillaBasis::x, AncillaBasis::y};

  for (int prep = 0; prep < 6; ++prep) {
    for (auto first : bases) {
      for (auto second : bases) {
        for (auto readout : readouts) {
          CnotConstruction c{prep, first, second, readout, {}};
          const CMatrix r1 = basis_rotation(first), r2 = basis_rotation(second);
          const CMatrix w1 = on_pair(hilbert::kron(r1, r1), true);
          const CMatrix w2 = on_pair(hilbert::kron(r2, r2), false);
          const auto out_states = readout_states(readout);
          bool valid = true;
          for (int m1 = 0; m1 < 2 && valid; ++m1) {
            for (int m2 = 0; m2 < 2 && valid; ++m2) {
              const CMatrix m = w2.adjoint() * on_pair(projectors[m2], false) * w2 * w1.adjoint() *
                                on_pair(projectors[m1], true) * w1;
              for (int m3 = 0; m3 < 2 && valid; ++m3) {
                const CMatrix k = contract_ancilla(m, ancilla_state(prep), out_states[m3]);
                bool found = false;
                for (int qc = 0; qc < 4 && !found; ++qc) {
                  for (int qt = 0; qt < 4 && !found; ++qt) {
                    if (proportional_to_cnot(pauli_pair({qc, qt}) * k)) {
                      c.corrections[m1][m2][m3] = {qc, qt};
                      found = true;
                    }
                  }
                }
                valid = found;
              }
            }
          }
          if (valid) return c;
        }
      }
    }
  }
  throw Error("no CNOT construction from two parity measurements was found");
}

CnotResult cnot_compose(const GateProcess& parity, const CnotConstruction& construction) {
  if (parity.outcomes() != 2) throw Error("cnot_compose needs a two-outcome parity process");
  const std::array<int, 2> outcome = {parity.index("even"), parity.index("odd")};
  const CMatrix r1 = basis_rotation(construction.first), r2 = basis_rotation(construction.second);
  const CMatrix w1 = on_pair(hilbert::kron(r1, r1), true);
  const CMatrix w2 = on_pair(hilbert::kron(r2, r2), false);
  const auto out_states = readout_states(construction.readout);
  const CVector prep = ancilla_state(construction.ancilla_state);

  CnotResult res;
  res.construction = construction;
  res.branches.labels.clear();
  for (int m1 = 0; m1 < 2; ++m1) {
    for (int m2 = 0; m2 < 2; ++m2) {
      for (int m3 = 0; m3 < 2; ++m3) {
        const CMatrix q = pauli_pair(construction.corrections[m1][m2][m3]);
        CMatrix choi = CMatrix::Zero(16, 16);
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) {
            // |i><j| on (control, target) with the ancilla inserted.
            CMatrix rho = CMatrix::Zero(kThree, kThree);
            for (int a = 0; a < 2; ++a) {
              for (int a2 = 0; a2 < 2; ++a2) {
                rho(4 * (i / 2) + 2 * a + (i % 2), 4 * (j / 2) + 2 * a2 + (j % 2)) = prep(a) * std::conj(prep(a2));
              }
            }
            rho = w1 * rho * w1.adjoint();
            rho = apply_on_pair(parity.choi[outcome[m1]], rho, true);
            rho = w1.adjoint() * rho * w1;
            rho = w2 * rho * w2.adjoint();
            rho = apply_on_pair(parity.choi[outcome[m2]], rho, false);
            rho = w2.adjoint() * rho * w2;
            CMatrix out = CMatrix::Zero(4, 4);
            const CVector& b = out_states[m3];
            for (int r = 0; r < 4; ++r) {
              for (int c = 0; c < 4; ++c) {
                for (int a = 0; a < 2; ++a) {
                  for (int a2 = 0; a2 < 2; ++a2) {
                    out(r, c) += std::conj(b(a)) * rho(4 * (r / 2) + 2 * a + (r % 2), 4 * (c / 2) + 2 * a2 + (c % 2)) *
                                 b(a2);
                  }
                }
              }
            }
            choi.block(i * 4, j * 4, 4, 4) = q * out * q.adjoint();
          }
        }
        res.branches.labels.push_back(std::string(1, char('0' + m1)) + char('0' + m2) + char('0' + m3));
        res.branches.choi.push_back(std::move(choi));
      }
    }
  }
  finalize(res.branches);
  res.choi = res.branches.total_choi();
  const CMatrix cnot = cnot_matrix();
  res.average_gate_fidelity = average_gate_fidelity(res.choi, cnot);
  res.average_gate_fidelity_choi = average_gate_fidelity_choi(res.choi, cnot);

  const CVector w = choi_vector(cnot);
  for (const auto& j : res.branches.choi) {
    const double tr = j.trace().real();
    if (tr < 1e-12) continue;
    const double overlap = (w.adjoint() * j * w)(0).real() / (4.0 * tr);
    res.branch_deviation = std::max(res.branch_deviation, 1.0 - overlap);
  }
  return res;
}

CnotResult cnot_compose(const GateProcess& parity) { return cnot_compose(parity, find_cnot_construction()); }

// ---------------------------------------------------------------------------

std::string_view to_string(GrowthStrategy s) {
  return s == GrowthStrategy::naive ? "naive" : "divide_and_conquer";
}

GrowthStrategy parse_growth_strategy(std::string_view name) {
  if (name == "naive") return GrowthStrategy::naive;
  if (name == "divide_and_conquer" || name == "dc") return GrowthStrategy::divide_and_conquer;
  throw ConfigError("unknown growth strategy: " + std::string(name));
}

void GraphGrowthConfig::validate() const {
  if (chain_length < 2) throw Error("graph growth needs a chain of at least two nodes");
  if (!(p > 0.0 && p <= 1.0)) throw Error("bond success probability must lie in (0, 1]");
  if (max_attempts < 1) throw Error("max_attempts must be positive");
  if (runs < 1) throw Error("graph growth needs at least one run");
}

namespace {

struct BudgetExceeded {};

class Grower {
 public:
  Grower(const GraphGrowthConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {}

  long long run() {
    attempts_ = 0;
    if (cfg_.strategy == GrowthStrategy::naive) {
      int bonds = 0;
      while (bonds < cfg_.chain_length - 1) bonds = attempt() ? bonds + 1 : 0;
    } else {
      build(cfg_.chain_length);
    }
    return attempts_;
  }

 private:
  bool attempt() {
    if (++attempts_ > cfg_.max_attempts) throw BudgetExceeded{};
    return dynamics::uniform(rng_()) < cfg_.p;
  }

  void build(int nodes) {
    if (nodes < 2) return;
    do {
      build((nodes + 1) / 2);
      build(nodes / 2);
    } while (!attempt());
  }

  const GraphGrowthConfig& cfg_;
  std::mt19937_64 rng_;
  long long attempts_ = 0;
};

}  // namespace

GrowthStats grow_graph(const GraphGrowthConfig& config, std::uint64_t seed) {
  config.validate();
  const auto results = dynamics::parallel_map<long long>(config.runs, [&](int i) -> long long {
    Grower g(config, dynamics::derive_seed(seed, static_cast<std::uint64_t>(i)));
    try {
      return g.run();
    } catch (const BudgetExceeded&) {
      return -1;
    }
  });
  GrowthStats st;
  st.config = config;
  double sum = 0.0, sum_sq = 0.0;
  for (long long a : results) {
    if (a < 0) {
      ++st.exceeded;
      continue;
    }
    st.attempts.push_back(a);
    sum += static_cast<double>(a);
    sum_sq += static_cast<double>(a) * static_cast<double>(a);
  }
  st.completed = static_cast<int>(st.attempts.size());
  if (st.completed > 0) {
    st.mean = sum / st.completed;
    st.stderr_mean = stderr_of(sum, sum_sq, st.completed);
  }
  return st;
}

double expected_attempts(GrowthStrategy strategy, int chain_length, double p) {
  if (chain_length < 1) throw Error("chain length must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw Error("bond success probability must lie in (0, 1]");
  if (strategy == GrowthStrategy::naive) {
    // E_k = (E_(k-1) + 1) / p for k bonds.
    double e = 0.0;
    for (int k = 1; k < chain_length; ++k) e = (e + 1.0) / p;
    return e;
  }
  std::function<double(int)> e = [&](int n) -> double {
    if (n < 2) return 0.0;
    return (e((n + 1) / 2) + e(n / 2) + 1.0) / p;
  };
  return e(chain_length);
}

GoodnessOfFit geometric_goodness_of_fit(const std::vector<long long>& attempts, double p) {
  if (attempts.empty()) throw Error("no samples for the goodness-of-fit test");
  if (!(p > 0.0 && p < 1.0)) throw Error("geometric test needs p in (0, 1)");
  const double n = static_cast<double>(attempts.size());
  // Bins k = 1..K with expected count >= 5, then the tail k > K.
  int bins = 0;
  while (n * p * std::pow(1.0 - p, bins) >= 5.0 && n * std::pow(1.0 - p, bins + 1) >= 5.0) ++bins;
  if (bins < 1) throw Error("too few samples for the goodness-of-fit test");
  std::vector<double> observed(bins + 1, 0.0);
  for (long long a : attempts) {
    if (a < 1) throw Error("attempt counts start at 1");
    observed[a <= bins ? a - 1 : bins] += 1.0;
  }
  GoodnessOfFit g;
  for (int k = 0; k <= bins; ++k) {
    const double expected = k < bins ? n * p * std::pow(1.0 - p, k) : n * std::pow(1.0 - p, bins);
    g.statistic += (observed[k] - expected) * (observed[k] - expected) / expected;
  }
  g.dof = bins;
  g.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(g.dof), g.statistic));
  return g;
}

}  // namespace qdparity::protocols
