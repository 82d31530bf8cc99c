#pragma once

// Quantum-jump trajectories. Between photon detections the atomic state is
// the non-normalized conditional vector psi(t) = U_cond(t) psi(0); its squared
// norm is the probability that no photon has been detected yet. A jump time
// is drawn by inverting that survival function (draw r, evolve until
// |psi|^2 = r), then the state is reset to C_k psi / |C_k psi| with channel k
// chosen with probability |C_k psi|^2 / sum_j |C_j psi|^2.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qjump/atom_model.hpp"
#include "qjump/propagator.hpp"
#include "qjump/rng.hpp"
#include "qjump/types.hpp"

namespace qjump {

struct ConditionalState {
  CVector amplitudes;
  double t = 0.0;
};

struct JumpOperator {
  // Index of the decay channel, or of the first merged channel when
  // cross damping groups channels by lower level.
  int channel = 0;
  int lower = 0;
  std::vector<int> merged_channels;
  CMatrix matrix;
};

struct JumpRecord {
  double t = 0.0;
  int channel = 0;
  CVector post_state;
};

/// Dense sample of a trajectory. `state` is the normalized copy of the
/// conditional vector; `norm2` is its squared norm since the last jump.
struct StateSample {
  double t = 0.0;
  CVector state;
  double norm2 = 1.0;
  bool normalized = true;
};

struct Trajectory {
  std::uint64_t seed = 0;
  double t_end = 0.0;
  CVector psi0;
  std::vector<JumpRecord> jumps;
  std::vector<StateSample> samples;
};

struct ConditionalDensity {
  CMatrix rho0;
  double t = 0.0;
};

struct EngineOptions {
  double tol = 1e-10;
  double norm_slack = kNormSlack;
  double jump_time_tol = kJumpTimeTol;
};

/// One operator per decay channel, C = sqrt(A) |lower><upper|, or one per
/// lower level when the atom has cross damping enabled. Channels with A = 0
/// still get an (all-zero) operator so indices line up with the model.
std::vector<JumpOperator> jump_operators(const AtomModel& atom);

/// Everything a trajectory needs, precomputed once per atom model.
/// Immutable after construction and safe to share between threads.
class QuantumJumpEngine {
 public:
  explicit QuantumJumpEngine(const AtomModel& atom, EngineOptions opts = {});

  const AtomModel& atom() const { return atom_; }
  const EngineOptions& options() const { return opts_; }
  const CMatrix& h_cond() const { return prop_.generator(); }
  const CMatrix& gamma() const { return prop_.damping(); }
  const std::vector<JumpOperator>& jump_ops() const { return ops_; }
  const ConditionalPropagator& propagator() const { return prop_; }

 private:
  AtomModel atom_;
  EngineOptions opts_;
  ConditionalPropagator prop_;
  std::vector<JumpOperator> ops_;
};

/// psi(t1) = U_cond(t1 - t) psi(t). Throws NonContractive if the norm grows
/// and StepFailure on non-finite results.
ConditionalState evolve_cond(const ConditionalState& state, const CMatrix& h_cond, double t1,
                             double tol = 1e-10);
ConditionalState evolve_cond(const ConditionalState& state, const ConditionalPropagator& prop,
                             double t1, double norm_slack = kNormSlack);

/// Squared norm of the conditional state, clamped to [0, 1].
double no_photon_probability(const ConditionalState& state);

struct WaitingDensity {
  std::vector<double> t;
  std::vector<double> w1;  // 2 <psi|Gamma|psi> = -dP0/dt
  std::vector<double> p0;  // |psi|^2
  // trapezoid(w1) + P0(last) - P0(first); zero up to quadrature error.
  double mass_defect = 0.0;
};

WaitingDensity waiting_density(const AtomModel& atom, const CVector& psi0,
                               std::span<const double> t_grid);

struct JumpSample {
  std::optional<double> t_jump;  // absolute time, none if no jump before t_max
  ConditionalState pre_jump;     // state at t_jump, or at t_max when none
};

/// Time at which |psi|^2 falls to `threshold_fraction` times its current
/// value, searched on (state.t, t_max]. Bracketing by step doubling followed
/// by safeguarded Newton iteration on the norm (its derivative is
/// -2 <psi|Gamma|psi>), to relative accuracy `time_tol`.
JumpSample find_jump_time(const ConditionalState& state, const ConditionalPropagator& prop,
                          double threshold_fraction, double t_max,
                          double time_tol = kJumpTimeTol, double norm_slack = kNormSlack);

JumpSample sample_jump(const ConditionalState& state, const ConditionalPropagator& prop,
                       RandomStream& rng, double t_max);
JumpSample sample_jump(const ConditionalState& state, const CMatrix& h_cond, RandomStream& rng,
                       double t_max);

struct ResetResult {
  int channel = 0;
  ConditionalState state;
};

/// Throws NoDecayPath when every |C_k psi| vanishes.
ResetResult reset_state(const ConditionalState& pre_jump, std::span<const JumpOperator> ops,
                        RandomStream& rng);

using JumpCallback = std::function<void(double t, int channel, const CVector& post_state)>;
using SampleCallback = std::function<void(const StateSample&)>;

/// Core trajectory loop. Calls `on_jump` for every jump in time order and
/// `on_sample` for every entry of `sample_times` (ascending, within
/// [0, t_end]). The random stream is consumed in a fixed pattern: one draw
/// for each waiting time, one for each channel choice.
void simulate_jumps(const QuantumJumpEngine& engine, const CVector& psi0, double t_end,
                    std::uint64_t seed, const JumpCallback& on_jump,
                    std::span<const double> sample_times = {}, const SampleCallback& on_sample = {});

struct TrajectoryOptions {
  std::vector<double> sample_times;
};

Trajectory simulate_trajectory(const QuantumJumpEngine& engine, const CVector& psi0, double t_end,
                               std::uint64_t seed, const TrajectoryOptions& opts = {});
Trajectory simulate_trajectory(const AtomModel& atom, const CVector& psi0, double t_end,
                               std::uint64_t seed, const TrajectoryOptions& opts = {});

/// Jump times only (optionally restricted to some channels); the memory-light
/// path for long runs.
std::vector<double> simulate_detections(const QuantumJumpEngine& engine, const CVector& psi0,
                                        double t_end, std::uint64_t seed,
                                        std::span<const int> detect_channels = {});

/// rho_A^0(t) = U_cond rho0 U_cond^dagger; its trace is the no-photon probability.
ConditionalDensity evolve_conditional_density(const CMatrix& rho0, const CMatrix& h_cond, double t);

/// Unit vector on a single level.
CVector basis_state(int n_levels, int level);

}  // namespace qjump
