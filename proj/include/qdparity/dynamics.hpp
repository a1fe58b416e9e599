#pragma once

// Master-equation and photon-counting trajectory dynamics.
//
// Everything is built on the linear, unnormalised conditional master equation
//
//   d rho~/dt = -i [H, rho~] / hbar + sum_j { (1 - e_j) c_j rho~ c_j^dag - A[c_j] rho~ },
//   A[c] rho = (c^dag c rho + rho c^dag c) / 2,
//
// whose trace is the probability that no counted jump has happened. e_j = 0 gives
// the unconditional Lindblad equation; e_j = eta_j gives evolution conditioned on
// no detected photon.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdparity/channel.hpp"
#include "qdparity/hilbert.hpp"

namespace qdparity::dynamics {

enum class Method {
  rk4,    // fixed-step classical Runge-Kutta
  exact,  // matrix exponential of the step generator (time-independent stages only)
};

/// Which jumps a trajectory resolves.
enum class Unraveling {
  observed,  // only detected photons are jumps; undetected emission makes the state mixed
  full,      // every emission is a jump, each flagged detected with probability eta_j
};

struct IntegratorConfig {
  double dt = 0.01;  // ps
  Method method = Method::rk4;
  /// Renormalise the conditional state every this many stage boundaries (0: never).
  int renormalize_every = 1;

  void validate() const;
};

/// Throws StepSizeError unless dt * (|H|_inf / hbar + max_j |c_j^dag c_j|_inf) < 0.1.
void check_step_size(const hilbert::Operator& hamiltonian, std::span<const model::LindbladChannel> channels,
                     double dt);

struct Stage {
  std::string label;
  hilbert::Operator hamiltonian;
  double duration = 0.0;                  // ps
  std::optional<hilbert::Operator> kick;  // instantaneous unitary, applied with zero duration

  static Stage evolve(std::string label, hilbert::Operator hamiltonian, double duration);
  static Stage instant(std::string label, hilbert::Operator unitary);
  bool is_kick() const { return kick.has_value(); }
};

struct PulseSchedule {
  std::vector<Stage> stages;

  double span() const;
  int dim() const;
  /// Timed stages need positive durations; kicks must be unitary; dimensions must agree.
  void validate() const;
};

/// Propagator of the linear CME above for one fixed Hamiltonian and channel set.
///
/// Time-independent generators are compiled once into the step map S and its
/// powers S^(2^k), so advancing by any number of steps costs O(log n) matrix-vector
/// products. Generators whose only time dependence is a channel phase are made
/// time-independent by a diagonal change of frame when one exists; the rest are
/// stepped with RK4 in place.
class NoJumpPropagator {
 public:
  struct Crossing {
    double elapsed = 0.0;
    bool crossed = false;
  };

  /// `efficiencies[j]` is e_j for channel j. `horizon` is the longest single advance
  /// expected; longer advances still work, in several chunks.
  NoJumpPropagator(const hilbert::Operator& hamiltonian, std::vector<model::LindbladChannel> channels,
                   std::vector<double> efficiencies, const IntegratorConfig& cfg, double horizon);

  int dim() const { return dim_; }
  bool time_dependent() const { return time_dependent_; }
  bool uses_frame() const { return use_frame_; }

  /// Evolve vec(rho~) (column-stacked) from time t0 by `duration`.
  void advance(CVector& v, double t0, double duration) const;

  /// Evolve until trace(rho~) drops to `threshold` or `duration` elapses, whichever
  /// first. On a crossing, v holds the state at the crossing time.
  Crossing advance_until(CVector& v, double t0, double duration, double threshold) const;

  /// Generator as a dim^2 x dim^2 matrix acting on vec(rho~), at time t.
  CMatrix superoperator(double t = 0.0) const;

  static double trace(const CVector& v, int dim);

 private:
  struct Split {
    long long steps;
    double remainder;
  };
  Split split(double duration) const;

  void build_static(const CMatrix& h_frame, const std::vector<CMatrix>& ops, double horizon);
  void apply_partial(CVector& v, double tau) const;
  double partial_trace_poly(const std::vector<Complex>& moments, double tau) const;
  Crossing static_until(CVector& v, double duration, double threshold) const;
  void static_advance(CVector& v, double duration) const;
  void to_frame(CVector& v, double t) const;
  void from_frame(CVector& v, double t) const;

  void rhs(double t, const CMatrix& rho, CMatrix& out) const;
  void rk4_step(CMatrix& rho, double t, double h) const;
  Crossing stepped_until(CVector& v, double t0, double duration, double threshold, bool stop_on_cross) const;

  int dim_ = 0;
  IntegratorConfig cfg_;
  CMatrix hamiltonian_;
  std::vector<model::LindbladChannel> channels_;
  std::vector<double> efficiencies_;
  bool time_dependent_ = false;

  // Static path.
  bool use_frame_ = false;
  Eigen::VectorXd frame_freq_;  // rad/ps per basis state
  CMatrix generator_;           // in the frame when use_frame_
  int taylor_order_ = 4;
  std::vector<CMatrix> powers_;  // S^(2^k)
  std::vector<Eigen::RowVectorXcd> power_traces_;
  std::vector<Eigen::RowVectorXcd> moment_rows_;  // vec(I)^T L^k / k!
  double horizon_ = 0.0;
  CMatrix horizon_map_;
  Eigen::RowVectorXcd horizon_trace_;
};

/// A schedule compiled once for repeated deterministic evolution with fixed
/// per-channel counting efficiencies.
class CompiledSchedule {
 public:
  CompiledSchedule(PulseSchedule schedule, const std::vector<model::LindbladChannel>& channels,
                   std::vector<double> efficiencies, const IntegratorConfig& cfg = {});

  /// Evolve vec(rho~) through every stage.
  CVector run(CVector v) const;
  hilbert::DensityOperator run(const hilbert::DensityOperator& rho) const;

  const PulseSchedule& schedule() const { return schedule_; }

 private:
  PulseSchedule schedule_;
  std::vector<std::optional<NoJumpPropagator>> propagators_;
};

/// Efficiencies that make a CompiledSchedule evolve the no-detection branch
/// (detectable channels at eta_j) or the unconditional state (all zero).
std::vector<double> detection_efficiencies(const std::vector<model::LindbladChannel>& channels);
std::vector<double> unconditional_efficiencies(const std::vector<model::LindbladChannel>& channels);

hilbert::DensityOperator evolve_unconditional(const hilbert::DensityOperator& rho, const hilbert::Operator& hamiltonian,
                                              const std::vector<model::LindbladChannel>& channels, double duration,
                                              const IntegratorConfig& cfg = {});

/// Unnormalised state after `duration` with no detected photon; its trace is the
/// probability of that record.
hilbert::DensityOperator evolve_no_jump(const hilbert::DensityOperator& rho_tilde, const hilbert::Operator& hamiltonian,
                                        const std::vector<model::LindbladChannel>& channels, double duration,
                                        const IntegratorConfig& cfg = {}, double t0 = 0.0);

hilbert::DensityOperator evolve_unconditional(const hilbert::DensityOperator& rho, const PulseSchedule& schedule,
                                              const std::vector<model::LindbladChannel>& channels,
                                              const IntegratorConfig& cfg = {});
hilbert::DensityOperator evolve_no_jump(const hilbert::DensityOperator& rho_tilde, const PulseSchedule& schedule,
                                        const std::vector<model::LindbladChannel>& channels,
                                        const IntegratorConfig& cfg = {});

struct JumpEvent {
  double time = 0.0;  // ps
  int channel = 0;
  bool detected = true;
  int stage = 0;
};

struct StageLogEntry {
  std::string label;
  double t_start = 0.0;
  double t_end = 0.0;
  int jumps = 0;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::vector<JumpEvent> jumps;
  std::vector<StageLogEntry> stage_log;
  hilbert::DensityOperator final_state;  // normalised conditional state
  /// Probability of the jump-free stretch since the last jump (or the start).
  double no_jump_weight = 1.0;
  double end_time = 0.0;
  bool stopped_early = false;

  int detections() const;
  std::optional<double> first_detection() const;
};

struct SamplerOptions {
  Unraveling unraveling = Unraveling::observed;
  bool stop_on_detection = false;
};

/// Photon-counting trajectories through a fixed schedule. Immutable once built;
/// safe to share between threads.
///
/// Jump times are drawn by inverting the no-detection weight: draw r ~ U(0, 1) and
/// jump when trace(rho~) reaches r. The trace is non-increasing, so the crossing is
/// located exactly by bisection.
class TrajectorySampler {
 public:
  TrajectorySampler(PulseSchedule schedule, std::vector<model::LindbladChannel> channels,
                    const IntegratorConfig& cfg = {}, SamplerOptions options = {});

  TrajectoryRecord sample(const hilbert::DensityOperator& rho0, std::uint64_t seed) const;
  TrajectoryRecord sample(const hilbert::StateVector& psi0, std::uint64_t seed) const;

  const PulseSchedule& schedule() const { return schedule_; }
  const std::vector<model::LindbladChannel>& channels() const { return channels_; }
  const SamplerOptions& options() const { return options_; }

 private:
  PulseSchedule schedule_;
  std::vector<model::LindbladChannel> channels_;
  IntegratorConfig cfg_;
  SamplerOptions options_;
  std::vector<std::optional<NoJumpPropagator>> propagators_;
};

TrajectoryRecord sample_trajectory(const hilbert::StateVector& psi0, const PulseSchedule& schedule,
                                   const std::vector<model::LindbladChannel>& channels, const IntegratorConfig& cfg,
                                   std::uint64_t seed, SamplerOptions options = {});

/// Seed of trajectory `index` in an ensemble with `master` seed (SplitMix64 of both).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Uniform double in [0, 1) from 53 random bits.
double uniform(std::uint64_t bits);

struct ClassStats {
  int count = 0;
  std::optional<hilbert::DensityOperator> mean_state;
  double mean_fidelity = 0.0;
  double fidelity_stderr = 0.0;
};

struct EnsembleTargets {
  std::optional<hilbert::StateVector> photon;
  std::optional<hilbert::StateVector> no_photon;
};

struct EnsembleStats {
  int trajectories = 0;
  ClassStats photon;     // at least one detected photon
  ClassStats no_photon;  // none
  /// Average of the normalised conditional states over all trajectories, with the
  /// standard error of each element's real and imaginary part.
  CMatrix mean_state;
  Eigen::MatrixXd stderr_real;
  Eigen::MatrixXd stderr_imag;
  std::vector<double> first_photon_times;
};

EnsembleStats run_ensemble(int n, const hilbert::StateVector& psi0, const TrajectorySampler& sampler,
                           std::uint64_t master_seed, const EnsembleTargets& targets = {});

EnsembleStats run_ensemble(int n, const hilbert::StateVector& psi0, const PulseSchedule& schedule,
                           const std::vector<model::LindbladChannel>& channels, const IntegratorConfig& cfg,
                           std::uint64_t master_seed, SamplerOptions options = {},
                           const EnsembleTargets& targets = {});

/// Runs `count` independent jobs on the available hardware threads; job i's result
/// lands in slot i, so the output does not depend on scheduling.
template <class Result, class Job>
std::vector<Result> parallel_map(int count, Job job);

}  // namespace qdparity::dynamics

#include "qdparity/detail/parallel.hpp"
