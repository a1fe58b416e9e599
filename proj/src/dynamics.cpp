#include "qdparity/dynamics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <random>

#include "qdparity/errors.hpp"
#include "qdparity/units.hpp"

namespace qdparity::dynamics {

using hilbert::DensityOperator;
using hilbert::Operator;
using hilbert::StateVector;
using model::LindbladChannel;

namespace {

constexpr int kBisections = 64;

double inf_norm(const CMatrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

Eigen::RowVectorXcd trace_row(int dim) {
  Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(dim * dim);
  for (int k = 0; k < dim; ++k) row(k * (dim + 1)) = 1.0;
  return row;
}

CMatrix lindblad_superoperator(const CMatrix& h, const std::vector<CMatrix>& ops, const std::vector<double>& eff) {
  const int d = static_cast<int>(h.rows());
  const CMatrix id = CMatrix::Identity(d, d);
  const Complex minus_i_over_hbar(0.0, -1.0 / units::kHbar);
  CMatrix l = minus_i_over_hbar * (hilbert::kron(id, h) - hilbert::kron(h.transpose(), id));
  for (std::size_t j = 0; j < ops.size(); ++j) {
    const CMatrix& c = ops[j];
    const CMatrix cc = c.adjoint() * c;
    if (eff[j] < 1.0) l += (1.0 - eff[j]) * hilbert::kron(c.conjugate(), c);
    l -= 0.5 * (hilbert::kron(id, cc) + hilbert::kron(cc.transpose(), id));
  }
  return l;
}

// Diagonal frequencies f (rad/ps) such that exp(i f t) removes every channel phase
// while commuting with H. Each non-zero element (r, c) of channel j must pick up the
// same phase g_j t, so f_r - f_c = g_j (+ omega_j for the phased part); H couplings
// need f_r = f_c.
std::optional<Eigen::VectorXd> phase_frame(const CMatrix& h, const std::vector<LindbladChannel>& channels) {
  const int d = static_cast<int>(h.rows());
  const int m = static_cast<int>(channels.size());
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  auto add = [&](int r, int c, int channel, double value) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(d + m);
    row(r) += 1.0;
    row(c) -= 1.0;
    if (channel >= 0) row(d + channel) = -1.0;
    rows.push_back(std::move(row));
    rhs.push_back(value);
  };
  for (int r = 0; r < d; ++r) {
    for (int c = r + 1; c < d; ++c) {
      if (h(r, c) != 0.0 || h(c, r) != 0.0) add(r, c, -1, 0.0);
    }
  }
  for (int j = 0; j < m; ++j) {
    const auto& ch = channels[j];
    const double omega = ch.has_phase() ? units::angular(ch.phase_rate) : 0.0;
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        if (ch.op(r, c) != 0.0) add(r, c, j, 0.0);
        if (ch.phased.size() != 0 && ch.phased(r, c) != 0.0) add(r, c, j, omega);
      }
    }
  }
  if (rows.empty()) return Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd a(rows.size(), d + m);
  Eigen::VectorXd b(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    a.row(i) = rows[i];
    b(i) = rhs[i];
  }
  const Eigen::VectorXd x = a.completeOrthogonalDecomposition().solve(b);
  if ((a * x - b).norm() > 1e-9 * std::max(1.0, b.norm())) return std::nullopt;
  return Eigen::VectorXd(x.head(d));
}

void normalize_state(CVector& v, int dim, double& weight, double& threshold) {
  const double tr = NoJumpPropagator::trace(v, dim);
  if (!(tr > 0.0)) throw Error("conditional state lost all weight");
  v /= tr;
  threshold /= tr;
  weight *= tr;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw StepSizeError("time step must be positive and finite");
  if (renormalize_every < 0) throw Error("renormalize_every must be non-negative");
}

void check_step_size(const Operator& hamiltonian, std::span<const LindbladChannel> channels, double dt) {
  double rate = 0.0;
  for (const auto& ch : channels) {
    const CMatrix c = ch.at(0.0);
    rate = std::max(rate, inf_norm(c.adjoint() * c));
  }
  const double scale = dt * (inf_norm(hamiltonian.matrix()) / units::kHbar + rate);
  if (!(scale < 0.1)) {
    throw StepSizeError("dt = " + std::to_string(dt) + " ps is too coarse: dt * (|H|/hbar + max rate) = " +
                        std::to_string(scale) + ", needs < 0.1");
  }
}

Stage Stage::evolve(std::string label, Operator hamiltonian, double duration) {
  Stage s;
  s.label = std::move(label);
  s.hamiltonian = std::move(hamiltonian);
  s.duration = duration;
  return s;
}

Stage Stage::instant(std::string label, Operator unitary) {
  Stage s;
  s.label = std::move(label);
  s.hamiltonian = Operator::zero(unitary.dim());
  s.kick = std::move(unitary);
  return s;
}

double PulseSchedule::span() const {
  double total = 0.0;
  for (const auto& s : stages) total += s.is_kick() ? 0.0 : s.duration;
  return total;
}

int PulseSchedule::dim() const { return stages.empty() ? 0 : stages.front().hamiltonian.dim(); }

void PulseSchedule::validate() const {
  const int d = dim();
  for (const auto& s : stages) {
    if (s.hamiltonian.dim() != d) throw DimensionMismatch("stage " + s.label + " has the wrong dimension");
    if (s.is_kick()) {
      const CMatrix& u = s.kick->matrix();
      if (u.rows() != d || u.cols() != d) throw DimensionMismatch("kick " + s.label + " has the wrong dimension");
      if (!(u.adjoint() * u).isIdentity(1e-10)) throw Error("kick " + s.label + " is not unitary");
    } else {
      if (!(s.duration > 0.0) || !std::isfinite(s.duration)) {
        throw Error("stage " + s.label + " needs a positive duration");
      }
      if (!s.hamiltonian.is_hermitian(1e-10)) throw Error("stage " + s.label + ": Hamiltonian is not Hermitian");
    }
  }
}

// ---------------------------------------------------------------------------

NoJumpPropagator::NoJumpPropagator(const Operator& hamiltonian, std::vector<LindbladChannel> channels,
                                   std::vector<double> efficiencies, const IntegratorConfig& cfg, double horizon)
    : dim_(hamiltonian.dim()),
      cfg_(cfg),
      hamiltonian_(hamiltonian.matrix()),
      channels_(std::move(channels)),
      efficiencies_(std::move(efficiencies)) {
  cfg_.validate();
  if (efficiencies_.size() != channels_.size()) throw DimensionMismatch("one efficiency per channel expected");
  for (const auto& ch : channels_) {
    ch.validate();
    if (ch.dim() != dim_) throw DimensionMismatch("channel " + ch.name + " does not match the Hamiltonian");
  }
  for (double e : efficiencies_) {
    if (!(e >= 0.0 && e <= 1.0)) throw Error("counting efficiency outside [0, 1]");
  }
  if (!(horizon >= 0.0)) throw Error("negative propagation horizon");
  check_step_size(hamiltonian, channels_, cfg_.dt);

  // The phase only matters through the jump term and the cross terms of c^dag c.
  bool phase_matters = false;
  for (std::size_t j = 0; j < channels_.size(); ++j) {
    const auto& ch = channels_[j];
    if (!ch.has_phase()) continue;
    const bool cross = !(ch.op.adjoint() * ch.phased).isZero(0.0);
    if (efficiencies_[j] < 1.0 || cross) phase_matters = true;
  }

  std::vector<CMatrix> ops;
  for (const auto& ch : channels_) ops.push_back(ch.phased.size() ? CMatrix(ch.op + ch.phased) : ch.op);

  if (!phase_matters) {
    build_static(hamiltonian_, ops, horizon);
    return;
  }
  if (auto freq = phase_frame(hamiltonian_, channels_)) {
    use_frame_ = true;
    frame_freq_ = *freq;
    CMatrix h_frame = hamiltonian_;
    for (int k = 0; k < dim_; ++k) h_frame(k, k) -= units::kHbar * frame_freq_(k);
    build_static(h_frame, ops, horizon);
    return;
  }
  time_dependent_ = true;
}

void NoJumpPropagator::build_static(const CMatrix& h_frame, const std::vector<CMatrix>& ops, double horizon) {
  const int n = dim_ * dim_;
  generator_ = lindblad_superoperator(h_frame, ops, efficiencies_);
  const CMatrix step_gen = cfg_.dt * generator_;

  CMatrix step;
  if (cfg_.method == Method::exact) {
    step = step_gen.exp();
    taylor_order_ = 12;
  } else {
    const CMatrix id = CMatrix::Identity(n, n);
    step = id + step_gen * (id + step_gen * (id + step_gen * (id + step_gen / 4.0) / 3.0) / 2.0);
    taylor_order_ = 4;
  }

  const Eigen::RowVectorXcd tr = trace_row(dim_);
  moment_rows_.assign(taylor_order_ + 1, tr);
  for (int k = 1; k <= taylor_order_; ++k) moment_rows_[k] = moment_rows_[k - 1] * generator_ / double(k);

  const Split sp = split(horizon);
  int levels = 1;
  while ((1LL << levels) <= sp.steps) ++levels;
  powers_.assign(1, step);
  for (int k = 1; k < levels; ++k) powers_.push_back(powers_.back() * powers_.back());
  power_traces_.clear();
  for (const auto& p : powers_) power_traces_.push_back(tr * p);

  horizon_ = horizon;
  if (horizon > 0.0) {
    CMatrix map = CMatrix::Identity(n, n);
    long long left = sp.steps;
    for (int k = levels - 1; k >= 0; --k) {
      while (left >= (1LL << k)) {
        map = powers_[k] * map;
        left -= 1LL << k;
      }
    }
    if (sp.remainder > 0.0) {
      const CMatrix g = sp.remainder * generator_;
      CMatrix partial = CMatrix::Identity(n, n);
      for (int k = taylor_order_; k >= 1; --k) partial = CMatrix::Identity(n, n) + g * partial / double(k);
      map = partial * map;
    }
    horizon_map_ = std::move(map);
    horizon_trace_ = tr * horizon_map_;
  }
}

NoJumpPropagator::Split NoJumpPropagator::split(double duration) const {
  const double ratio = duration / cfg_.dt;
  auto steps = static_cast<long long>(std::floor(ratio + 1e-9));
  double remainder = duration - static_cast<double>(steps) * cfg_.dt;
  if (remainder < 1e-9 * cfg_.dt) remainder = 0.0;
  return {steps, remainder};
}

double NoJumpPropagator::trace(const CVector& v, int dim) {
  double tr = 0.0;
  for (int k = 0; k < dim; ++k) tr += v(k * (dim + 1)).real();
  return tr;
}

CMatrix NoJumpPropagator::superoperator(double t) const {
  std::vector<CMatrix> ops;
  for (const auto& ch : channels_) ops.push_back(ch.at(t));
  return lindblad_superoperator(hamiltonian_, ops, efficiencies_);
}

void NoJumpPropagator::apply_partial(CVector& v, double tau) const {
  CVector u = v;
  for (int k = taylor_order_; k >= 1; --k) u = v + (tau / k) * (generator_ * u);
  v = std::move(u);
}

double NoJumpPropagator::partial_trace_poly(const std::vector<Complex>& moments, double tau) const {
  double sum = 0.0;
  for (int k = taylor_order_; k >= 0; --k) sum = sum * tau + moments[k].real();
  return sum;
}

NoJumpPropagator::Crossing NoJumpPropagator::static_until(CVector& v, double duration, double threshold) const {
  if (trace(v, dim_) < threshold) return {0.0, true};
  if (duration == horizon_ && horizon_map_.size() != 0 && (horizon_trace_ * v)(0).real() >= threshold) {
    v = horizon_map_ * v;
    return {duration, false};
  }

  auto crossing_in = [&](double span) {
    std::vector<Complex> moments(taylor_order_ + 1);
    for (int k = 0; k <= taylor_order_; ++k) moments[k] = (moment_rows_[k] * v)(0);
    if (partial_trace_poly(moments, span) >= threshold) return -1.0;
    double lo = 0.0;
    double hi = span;
    for (int i = 0; i < kBisections; ++i) {
      const double mid = 0.5 * (lo + hi);
      (partial_trace_poly(moments, mid) >= threshold ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };

  const Split sp = split(duration);
  const int levels = static_cast<int>(powers_.size());
  long long done = 0;
  while (done < sp.steps) {
    const long long left = sp.steps - done;
    long long taken = 0;
    for (int k = levels - 1; k >= 0; --k) {
      const long long chunk = 1LL << k;
      if (taken + chunk > left) continue;
      if ((power_traces_[k] * v)(0).real() >= threshold) {
        v = powers_[k] * v;
        taken += chunk;
      }
    }
    done += taken;
    if (done == sp.steps) break;
    if ((power_traces_[0] * v)(0).real() >= threshold) continue;  // ran out of powers, not a crossing
    const double tau = crossing_in(cfg_.dt);
    if (tau < 0.0) {  // polynomial and step map disagree at round-off level; take the step
      v = powers_[0] * v;
      ++done;
      continue;
    }
    apply_partial(v, tau);
    return {std::min(duration, static_cast<double>(done) * cfg_.dt + tau), true};
  }
  if (sp.remainder > 0.0) {
    const double tau = crossing_in(sp.remainder);
    if (tau < 0.0) {
      apply_partial(v, sp.remainder);
    } else {
      apply_partial(v, tau);
      return {std::min(duration, static_cast<double>(sp.steps) * cfg_.dt + tau), true};
    }
  }
  return {duration, false};
}

void NoJumpPropagator::static_advance(CVector& v, double duration) const {
  if (duration == horizon_ && horizon_map_.size() != 0) {
    v = horizon_map_ * v;
    return;
  }
  const Split sp = split(duration);
  long long left = sp.steps;
  for (int k = static_cast<int>(powers_.size()) - 1; k >= 0; --k) {
    while (left >= (1LL << k)) {
      v = powers_[k] * v;
      left -= 1LL << k;
    }
  }
  if (sp.remainder > 0.0) apply_partial(v, sp.remainder);
}

void NoJumpPropagator::to_frame(CVector& v, double t) const {
  for (int c = 0; c < dim_; ++c) {
    for (int r = 0; r < dim_; ++r) v(c * dim_ + r) *= std::polar(1.0, (frame_freq_(r) - frame_freq_(c)) * t);
  }
}

void NoJumpPropagator::from_frame(CVector& v, double t) const {
  for (int c = 0; c < dim_; ++c) {
    for (int r = 0; r < dim_; ++r) v(c * dim_ + r) *= std::polar(1.0, (frame_freq_(c) - frame_freq_(r)) * t);
  }
}

void NoJumpPropagator::advance(CVector& v, double t0, double duration) const {
  if (v.size() != dim_ * dim_) throw DimensionMismatch("state does not match the propagator");
  if (duration < 0.0) throw Error("cannot propagate backwards in time");
  if (time_dependent_) {
    stepped_until(v, t0, duration, 0.0, false);
  } else if (use_frame_) {
    to_frame(v, t0);
    static_advance(v, duration);
    from_frame(v, t0 + duration);
  } else {
    static_advance(v, duration);
  }
}

NoJumpPropagator::Crossing NoJumpPropagator::advance_until(CVector& v, double t0, double duration,
                                                           double threshold) const {
  if (v.size() != dim_ * dim_) throw DimensionMismatch("state does not match the propagator");
  if (duration < 0.0) throw Error("cannot propagate backwards in time");
  if (time_dependent_) return stepped_until(v, t0, duration, threshold, true);
  if (!use_frame_) return static_until(v, duration, threshold);
  to_frame(v, t0);
  const Crossing out = static_until(v, duration, threshold);
  from_frame(v, t0 + out.elapsed);
  return out;
}

void NoJumpPropagator::rhs(double t, const CMatrix& rho, CMatrix& out) const {
  const Complex half_i(0.0, 0.5 * units::kHbar);
  CMatrix heff = hamiltonian_;
  std::vector<CMatrix> ops;
  ops.reserve(channels_.size());
  for (const auto& ch : channels_) {
    ops.push_back(ch.at(t));
    heff -= half_i * (ops.back().adjoint() * ops.back());
  }
  const Complex minus_i_over_hbar(0.0, -1.0 / units::kHbar);
  out.noalias() = minus_i_over_hbar * (heff * rho);
  out.noalias() -= minus_i_over_hbar * (rho * heff.adjoint());
  for (std::size_t j = 0; j < ops.size(); ++j) {
    if (efficiencies_[j] < 1.0) out.noalias() += (1.0 - efficiencies_[j]) * (ops[j] * rho * ops[j].adjoint());
  }
}

void NoJumpPropagator::rk4_step(CMatrix& rho, double t, double h) const {
  CMatrix k1(dim_, dim_), k2(dim_, dim_), k3(dim_, dim_), k4(dim_, dim_);
  rhs(t, rho, k1);
  rhs(t + 0.5 * h, rho + 0.5 * h * k1, k2);
  rhs(t + 0.5 * h, rho + 0.5 * h * k2, k3);
  rhs(t + h, rho + h * k3, k4);
  rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

NoJumpPropagator::Crossing NoJumpPropagator::stepped_until(CVector& v, double t0, double duration, double threshold,
                                                           bool stop_on_cross) const {
  CMatrix rho = hilbert::unvec(v, dim_);
  if (stop_on_cross && rho.trace().real() < threshold) return {0.0, true};
  const Split sp = split(duration);
  const long long total = sp.steps + (sp.remainder > 0.0 ? 1 : 0);
  for (long long k = 0; k < total; ++k) {
    const double t = t0 + static_cast<double>(k) * cfg_.dt;
    const double h = k < sp.steps ? cfg_.dt : sp.remainder;
    CMatrix next = rho;
    rk4_step(next, t, h);
    if (stop_on_cross && next.trace().real() < threshold) {
      double lo = 0.0;
      double hi = h;
      for (int i = 0; i < kBisections; ++i) {
        const double mid = 0.5 * (lo + hi);
        CMatrix trial = rho;
        rk4_step(trial, t, mid);
        (trial.trace().real() >= threshold ? lo : hi) = mid;
      }
      const double tau = 0.5 * (lo + hi);
      rk4_step(rho, t, tau);
      v = hilbert::vec(rho);
      return {std::min(duration, static_cast<double>(k) * cfg_.dt + tau), true};
    }
    rho = std::move(next);
  }
  v = hilbert::vec(rho);
  return {duration, false};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> counting_efficiencies(const std::vector<LindbladChannel>& channels, bool count_all) {
  std::vector<double> eff;
  for (const auto& ch : channels) eff.push_back(count_all ? 1.0 : ch.detection_efficiency());
  return eff;
}

}  // namespace

std::vector<double> detection_efficiencies(const std::vector<LindbladChannel>& channels) {
  return counting_efficiencies(channels, false);
}

std::vector<double> unconditional_efficiencies(const std::vector<LindbladChannel>& channels) {
  return std::vector<double>(channels.size(), 0.0);
}

CompiledSchedule::CompiledSchedule(PulseSchedule schedule, const std::vector<LindbladChannel>& channels,
                                   std::vector<double> efficiencies, const IntegratorConfig& cfg)
    : schedule_(std::move(schedule)) {
  schedule_.validate();
  for (const auto& stage : schedule_.stages) {
    if (stage.is_kick()) {
      propagators_.emplace_back(std::nullopt);
    } else {
      propagators_.emplace_back(std::in_place, stage.hamiltonian, channels, efficiencies, cfg, stage.duration);
    }
  }
}

CVector CompiledSchedule::run(CVector v) const {
  const int d = schedule_.dim();
  if (v.size() != d * d) throw DimensionMismatch("state does not match the schedule");
  double t = 0.0;
  for (std::size_t s = 0; s < schedule_.stages.size(); ++s) {
    const Stage& stage = schedule_.stages[s];
    if (stage.is_kick()) {
      const CMatrix& u = stage.kick->matrix();
      v = hilbert::vec(u * hilbert::unvec(v, d) * u.adjoint());
      continue;
    }
    propagators_[s]->advance(v, t, stage.duration);
    t += stage.duration;
  }
  return v;
}

DensityOperator CompiledSchedule::run(const DensityOperator& rho) const {
  const CVector v = run(hilbert::vec(rho.matrix()));
  return DensityOperator(hilbert::unvec(v, rho.dim()), false);
}

DensityOperator evolve_unconditional(const DensityOperator& rho, const Operator& hamiltonian,
                                     const std::vector<LindbladChannel>& channels, double duration,
                                     const IntegratorConfig& cfg) {
  NoJumpPropagator prop(hamiltonian, channels, unconditional_efficiencies(channels), cfg, duration);
  CVector v = hilbert::vec(rho.matrix());
  prop.advance(v, 0.0, duration);
  return DensityOperator(hilbert::unvec(v, rho.dim()), rho.is_normalized());
}

DensityOperator evolve_no_jump(const DensityOperator& rho_tilde, const Operator& hamiltonian,
                               const std::vector<LindbladChannel>& channels, double duration,
                               const IntegratorConfig& cfg, double t0) {
  NoJumpPropagator prop(hamiltonian, channels, detection_efficiencies(channels), cfg, duration);
  CVector v = hilbert::vec(rho_tilde.matrix());
  prop.advance(v, t0, duration);
  return DensityOperator(hilbert::unvec(v, rho_tilde.dim()), false);
}

DensityOperator evolve_unconditional(const DensityOperator& rho, const PulseSchedule& schedule,
                                     const std::vector<LindbladChannel>& channels, const IntegratorConfig& cfg) {
  if (rho.dim() != schedule.dim()) throw DimensionMismatch("state does not match the schedule");
  const CVector v = CompiledSchedule(schedule, channels, unconditional_efficiencies(channels), cfg).run(hilbert::vec(rho.matrix()));
  return DensityOperator(hilbert::unvec(v, rho.dim()), rho.is_normalized());
}

DensityOperator evolve_no_jump(const DensityOperator& rho_tilde, const PulseSchedule& schedule,
                               const std::vector<LindbladChannel>& channels, const IntegratorConfig& cfg) {
  if (rho_tilde.dim() != schedule.dim()) throw DimensionMismatch("state does not match the schedule");
  const CVector v =
      CompiledSchedule(schedule, channels, detection_efficiencies(channels), cfg).run(hilbert::vec(rho_tilde.matrix()));
  return DensityOperator(hilbert::unvec(v, rho_tilde.dim()), false);
}

// ---------------------------------------------------------------------------

int TrajectoryRecord::detections() const {
  int n = 0;
  for (const auto& j : jumps) n += j.detected ? 1 : 0;
  return n;
}

std::optional<double> TrajectoryRecord::first_detection() const {
  for (const auto& j : jumps) {
    if (j.detected) return j.time;
  }
  return std::nullopt;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // Element index + 1 of the SplitMix64 stream started at `master`.
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

TrajectorySampler::TrajectorySampler(PulseSchedule schedule, std::vector<LindbladChannel> channels,
                                     const IntegratorConfig& cfg, SamplerOptions options)
    : schedule_(std::move(schedule)), channels_(std::move(channels)), cfg_(cfg), options_(options) {
  schedule_.validate();
  const auto eff = counting_efficiencies(channels_, options_.unraveling == Unraveling::full);
  for (const auto& stage : schedule_.stages) {
    if (stage.is_kick()) {
      propagators_.emplace_back(std::nullopt);
    } else {
      propagators_.emplace_back(std::in_place, stage.hamiltonian, channels_, eff, cfg_, stage.duration);
    }
  }
}

TrajectoryRecord TrajectorySampler::sample(const StateVector& psi0, std::uint64_t seed) const {
  return sample(DensityOperator::pure(psi0), seed);
}

TrajectoryRecord TrajectorySampler::sample(const DensityOperator& rho0, std::uint64_t seed) const {
  const int d = schedule_.dim();
  if (rho0.dim() != d) throw DimensionMismatch("initial state does not match the schedule");
  const bool count_all = options_.unraveling == Unraveling::full;

  std::mt19937_64 rng(seed);
  auto draw = [&] { return uniform(rng()); };

  TrajectoryRecord rec;
  rec.seed = seed;
  CVector v = hilbert::vec(rho0.normalized().matrix());
  double threshold = draw();
  double weight = 1.0;
  double t = 0.0;
  int boundaries = 0;
  bool stop = false;

  for (std::size_t s = 0; s < schedule_.stages.size() && !stop; ++s) {
    const Stage& stage = schedule_.stages[s];
    StageLogEntry log{stage.label, t, t, 0};
    if (stage.is_kick()) {
      const CMatrix& u = stage.kick->matrix();
      v = hilbert::vec(u * hilbert::unvec(v, d) * u.adjoint());
      rec.stage_log.push_back(std::move(log));
      continue;
    }

    const NoJumpPropagator& prop = *propagators_[s];
    const double stage_end = t + stage.duration;
    double remaining = stage.duration;
    while (remaining > 0.0) {
      const auto cr = prop.advance_until(v, t, remaining, threshold);
      t += cr.elapsed;
      remaining -= cr.elapsed;
      if (!cr.crossed) break;

      const CMatrix rho = hilbert::unvec(v, d);
      std::vector<double> rates(channels_.size());
      std::vector<CMatrix> ops(channels_.size());
      double total = 0.0;
      for (std::size_t j = 0; j < channels_.size(); ++j) {
        const double e = count_all ? 1.0 : channels_[j].detection_efficiency();
        if (e <= 0.0) continue;
        ops[j] = channels_[j].at(t);
        rates[j] = e * (ops[j] * rho * ops[j].adjoint()).trace().real();
        total += std::max(rates[j], 0.0);
      }
      threshold = draw();
      if (!(total > 0.0)) continue;

      double pick = draw() * total;
      std::size_t chosen = 0;
      for (std::size_t j = 0; j < rates.size(); ++j) {
        if (rates[j] <= 0.0) continue;
        chosen = j;
        if (pick < rates[j]) break;
        pick -= rates[j];
      }
      CMatrix next = ops[chosen] * rho * ops[chosen].adjoint();
      next /= next.trace().real();
      v = hilbert::vec(next);
      weight = 1.0;

      const bool detected = count_all ? draw() < channels_[chosen].detection_efficiency() : true;
      rec.jumps.push_back({t, static_cast<int>(chosen), detected, static_cast<int>(s)});
      ++log.jumps;
      if (detected && options_.stop_on_detection) {
        stop = true;
        rec.stopped_early = true;
        break;
      }
      if (remaining < 1e-12 * std::max(1.0, stage.duration)) break;
    }
    if (!stop) t = stage_end;
    log.t_end = t;
    rec.stage_log.push_back(std::move(log));

    ++boundaries;
    if (cfg_.renormalize_every > 0 && boundaries % cfg_.renormalize_every == 0) {
      normalize_state(v, d, weight, threshold);
    }
  }

  const double tr = NoJumpPropagator::trace(v, d);
  rec.no_jump_weight = weight * tr;
  rec.final_state = DensityOperator(hilbert::unvec(v, d) / tr, true);
  rec.end_time = t;
  return rec;
}

TrajectoryRecord sample_trajectory(const StateVector& psi0, const PulseSchedule& schedule,
                                   const std::vector<LindbladChannel>& channels, const IntegratorConfig& cfg,
                                   std::uint64_t seed, SamplerOptions options) {
  return TrajectorySampler(schedule, channels, cfg, options).sample(psi0, seed);
}

// ---------------------------------------------------------------------------

namespace {

struct TrajectorySummary {
  CMatrix state;
  bool photon = false;
  std::optional<double> first;
  double fidelity = 0.0;
};

void finish_class(ClassStats& c, const CMatrix& state_sum, double fid_sum, double fid_sq) {
  if (c.count == 0) return;
  c.mean_state = DensityOperator(state_sum / c.count, true);
  c.mean_fidelity = fid_sum / c.count;
  if (c.count > 1) {
    const double var = std::max(0.0, (fid_sq - c.count * c.mean_fidelity * c.mean_fidelity) / (c.count - 1));
    c.fidelity_stderr = std::sqrt(var / c.count);
  }
}

}  // namespace

EnsembleStats run_ensemble(int n, const StateVector& psi0, const TrajectorySampler& sampler, std::uint64_t master_seed,
                           const EnsembleTargets& targets) {
  if (n < 1) throw Error("an ensemble needs at least one trajectory");
  const auto summaries = parallel_map<TrajectorySummary>(n, [&](int i) {
    const TrajectoryRecord rec = sampler.sample(psi0, derive_seed(master_seed, static_cast<std::uint64_t>(i)));
    TrajectorySummary s;
    s.state = rec.final_state.matrix();
    s.first = rec.first_detection();
    s.photon = s.first.has_value();
    const auto& target = s.photon ? targets.photon : targets.no_photon;
    if (target) s.fidelity = hilbert::fidelity(rec.final_state, *target);
    return s;
  });

  const int d = sampler.schedule().dim();
  EnsembleStats out;
  out.trajectories = n;
  CMatrix sum = CMatrix::Zero(d, d);
  Eigen::MatrixXd sq_re = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd sq_im = Eigen::MatrixXd::Zero(d, d);
  CMatrix sum_photon = CMatrix::Zero(d, d);
  CMatrix sum_dark = CMatrix::Zero(d, d);
  double fid[2] = {0.0, 0.0};
  double fid_sq[2] = {0.0, 0.0};
  for (const auto& s : summaries) {
    sum += s.state;
    sq_re += s.state.real().cwiseAbs2();
    sq_im += s.state.imag().cwiseAbs2();
    const int c = s.photon ? 1 : 0;
    (s.photon ? sum_photon : sum_dark) += s.state;
    (s.photon ? out.photon : out.no_photon).count += 1;
    fid[c] += s.fidelity;
    fid_sq[c] += s.fidelity * s.fidelity;
    if (s.first) out.first_photon_times.push_back(*s.first);
  }
  out.mean_state = sum / n;
  auto stderr_of = [&](const Eigen::MatrixXd& sq, const Eigen::MatrixXd& mean) {
    if (n < 2) return Eigen::MatrixXd(Eigen::MatrixXd::Zero(d, d));
    const Eigen::MatrixXd var = ((sq - n * mean.cwiseAbs2()) / (n - 1)).cwiseMax(0.0);
    return Eigen::MatrixXd((var / n).cwiseSqrt());
  };
  out.stderr_real = stderr_of(sq_re, out.mean_state.real());
  out.stderr_imag = stderr_of(sq_im, out.mean_state.imag());
  finish_class(out.photon, sum_photon, fid[1], fid_sq[1]);
  finish_class(out.no_photon, sum_dark, fid[0], fid_sq[0]);
  return out;
}

EnsembleStats run_ensemble(int n, const StateVector& psi0, const PulseSchedule& schedule,
                           const std::vector<LindbladChannel>& channels, const IntegratorConfig& cfg,
                           std::uint64_t master_seed, SamplerOptions options, const EnsembleTargets& targets) {
  return run_ensemble(n, psi0, TrajectorySampler(schedule, channels, cfg, options), master_seed, targets);
}

}  // namespace qdparity::dynamics
