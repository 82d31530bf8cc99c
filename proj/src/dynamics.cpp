#include "qjump/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qjump/errors.hpp"

namespace qjump {

std::vector<JumpOperator> jump_operators(const AtomModel& atom) {
  atom.validate();
  const int n = atom.n_levels();
  std::vector<JumpOperator> ops;

  if (!atom.cross_damping) {
    for (int k = 0; k < static_cast<int>(atom.decay_channels.size()); ++k) {
      const auto& ch = atom.decay_channels[k];
      JumpOperator op;
      op.channel = k;
      op.lower = ch.lower;
      op.merged_channels = {k};
      op.matrix = CMatrix::Zero(n, n);
      op.matrix(ch.lower, ch.upper) = std::sqrt(ch.a_coeff);
      ops.push_back(std::move(op));
    }
    return ops;
  }

  // Group by lower level, keeping first-appearance order.
  std::map<int, std::size_t> slot;
  for (int k = 0; k < static_cast<int>(atom.decay_channels.size()); ++k) {
    const auto& ch = atom.decay_channels[k];
    auto [it, inserted] = slot.emplace(ch.lower, ops.size());
    if (inserted) {
      JumpOperator op;
      op.channel = k;
      op.lower = ch.lower;
      op.matrix = CMatrix::Zero(n, n);
      ops.push_back(std::move(op));
    }
    auto& op = ops[it->second];
    op.merged_channels.push_back(k);
    op.matrix(ch.lower, ch.upper) += std::sqrt(ch.a_coeff);
  }
  return ops;
}

QuantumJumpEngine::QuantumJumpEngine(const AtomModel& atom, EngineOptions opts)
    : atom_(atom), opts_(opts), prop_(build_h_cond(atom), opts.tol), ops_(jump_operators(atom)) {}

ConditionalState evolve_cond(const ConditionalState& state, const ConditionalPropagator& prop,
                             double t1, double norm_slack) {
  if (t1 < state.t) throw NumericError("RangeError", "evolve_cond: target time precedes state time");
  ConditionalState out{prop.apply(state.amplitudes, t1 - state.t), t1};
  if (!out.amplitudes.allFinite()) throw NumericError("StepFailure", "conditional evolution produced non-finite values");
  const double before = state.amplitudes.squaredNorm();
  const double after = out.amplitudes.squaredNorm();
  if (after > before * (1.0 + norm_slack))
    throw NumericError("NonContractive", "conditional norm increased; damping matrix is not positive semidefinite");
  return out;
}

ConditionalState evolve_cond(const ConditionalState& state, const CMatrix& h_cond, double t1, double tol) {
  ConditionalPropagator prop(h_cond, tol);
  return evolve_cond(state, prop, t1);
}

double no_photon_probability(const ConditionalState& state) {
  return std::clamp(state.amplitudes.squaredNorm(), 0.0, 1.0);
}

WaitingDensity waiting_density(const AtomModel& atom, const CVector& psi0, std::span<const double> t_grid) {
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw ConfigError("RangeError", "waiting_density: time grid must be increasing");

  const ConditionalPropagator prop(build_h_cond(atom));
  const auto orbit = prop.orbit(psi0);
  WaitingDensity out;
  for (double t : t_grid) {
    const CVector psi = orbit.at(t);
    const double w = 2.0 * psi.dot(prop.damping() * psi).real();
    if (w < -1e-9) throw NumericError("NonContractive", "negative waiting-time density");
    out.t.push_back(t);
    out.w1.push_back(w);
    out.p0.push_back(psi.squaredNorm());
  }
  if (!out.t.empty()) {
    double mass = 0.0;
    for (std::size_t i = 1; i < out.t.size(); ++i) mass += 0.5 * (out.w1[i] + out.w1[i - 1]) * (out.t[i] - out.t[i - 1]);
    out.mass_defect = mass + out.p0.back() - out.p0.front();
  }
  return out;
}

JumpSample find_jump_time(const ConditionalState& state, const ConditionalPropagator& prop,
                          double threshold_fraction, double t_max, double time_tol, double norm_slack) {
  const auto orbit = prop.orbit(state.amplitudes);
  const double n0 = state.amplitudes.squaredNorm();
  const double horizon = t_max - state.t;

  auto no_jump = [&]() {
    return JumpSample{std::nullopt, {horizon > 0.0 ? orbit.at(horizon) : state.amplitudes, std::max(t_max, state.t)}};
  };
  if (horizon <= 0.0 || n0 == 0.0 || prop.max_damping() == 0.0) return no_jump();

  const double threshold = threshold_fraction * n0;
  const Eigen::Index n = state.amplitudes.size();
  CVector psi(n);
  auto norm2_at = [&](double s) {
    psi = orbit.at(s);
    return psi.squaredNorm();
  };

  // Bracket the crossing.
  double lo = 0.0, n_lo = n0;
  double step = std::min(0.25 / prop.max_damping(), horizon);
  double hi = 0.0, n_hi = n0;
  for (;;) {
    hi = std::min(lo + step, horizon);
    n_hi = norm2_at(hi);
    if (!std::isfinite(n_hi)) throw NumericError("StepFailure", "conditional evolution produced non-finite values");
    if (n_hi > n_lo * (1.0 + norm_slack))
      throw NumericError("NonContractive", "conditional norm increased between accepted steps");
    if (n_hi <= threshold) break;
    if (hi >= horizon) return no_jump();
    lo = hi;
    n_lo = n_hi;
    step *= 2.0;
  }

  // Safeguarded Newton on f(s) = |psi(s)|^2 - threshold, f(lo) > 0 >= f(hi).
  double s = (n_lo - n_hi) > 0.0 ? lo + (hi - lo) * (n_lo - threshold) / (n_lo - n_hi) : 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = norm2_at(s) - threshold;
    if (f > 0.0) lo = s; else hi = s;
    const double df = -2.0 * psi.dot(prop.damping() * psi).real();
    double next = (df < 0.0) ? s - f / df : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const bool done = std::abs(next - s) <= time_tol * next || (hi - lo) <= time_tol * hi;
    s = next;
    if (done) break;
  }
  norm2_at(s);
  return JumpSample{state.t + s, {psi, state.t + s}};
}

JumpSample sample_jump(const ConditionalState& state, const ConditionalPropagator& prop, RandomStream& rng,
                       double t_max) {
  return find_jump_time(state, prop, rng.uniform(), t_max);
}

JumpSample sample_jump(const ConditionalState& state, const CMatrix& h_cond, RandomStream& rng, double t_max) {
  const ConditionalPropagator prop(h_cond);
  return sample_jump(state, prop, rng, t_max);
}

ResetResult reset_state(const ConditionalState& pre_jump, std::span<const JumpOperator> ops, RandomStream& rng) {
  const double u = rng.uniform();
  std::vector<double> weights(ops.size());
  double total = 0.0;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    weights[k] = (ops[k].matrix * pre_jump.amplitudes).squaredNorm();
    total += weights[k];
  }
  if (!(total > 0.0)) throw NumericError("NoDecayPath", "reset requested for a state with no decay path");

  const double target = u * total;
  std::size_t chosen = 0;
  double acc = 0.0;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    if (weights[k] == 0.0) continue;
    chosen = k;
    acc += weights[k];
    if (target < acc) break;
  }
  CVector post = ops[chosen].matrix * pre_jump.amplitudes;
  post /= std::sqrt(weights[chosen]);
  return ResetResult{static_cast<int>(chosen), {std::move(post), pre_jump.t}};
}

void simulate_jumps(const QuantumJumpEngine& engine, const CVector& psi0, double t_end, std::uint64_t seed,
                    const JumpCallback& on_jump, std::span<const double> sample_times,
                    const SampleCallback& on_sample) {
  const auto& prop = engine.propagator();
  if (psi0.size() != prop.dim()) throw ConfigError("RangeError", "initial state has the wrong dimension");
  if (std::abs(psi0.squaredNorm() - 1.0) > 1e-9) throw ConfigError("RangeError", "initial state must be normalized");

  RandomStream rng(seed);
  ConditionalState state{psi0, 0.0};
  std::size_t next_sample = 0;

  auto emit_samples_until = [&](double t_stop, bool inclusive) {
    if (!on_sample) return;
    while (next_sample < sample_times.size()) {
      const double ts = sample_times[next_sample];
      if (ts > t_end || ts > t_stop || (!inclusive && ts == t_stop)) break;
      if (ts >= state.t) {
        const CVector psi = prop.apply(state.amplitudes, ts - state.t);
        const double n2 = psi.squaredNorm();
        on_sample(StateSample{ts, psi / std::sqrt(n2), n2, true});
      }
      ++next_sample;
    }
  };

  for (;;) {
    const JumpSample js = find_jump_time(state, prop, rng.uniform(), t_end, engine.options().jump_time_tol,
                                         engine.options().norm_slack);
    if (!js.t_jump) {
      emit_samples_until(t_end, true);
      break;
    }
    emit_samples_until(*js.t_jump, false);
    const ResetResult reset = reset_state(js.pre_jump, engine.jump_ops(), rng);
    on_jump(*js.t_jump, reset.channel, reset.state.amplitudes);
    state = reset.state;
  }
}

Trajectory simulate_trajectory(const QuantumJumpEngine& engine, const CVector& psi0, double t_end,
                               std::uint64_t seed, const TrajectoryOptions& opts) {
  Trajectory traj;
  traj.seed = seed;
  traj.t_end = t_end;
  traj.psi0 = psi0;
  simulate_jumps(
      engine, psi0, t_end, seed,
      [&](double t, int channel, const CVector& post) { traj.jumps.push_back({t, channel, post}); },
      opts.sample_times, [&](const StateSample& s) { traj.samples.push_back(s); });
  return traj;
}

Trajectory simulate_trajectory(const AtomModel& atom, const CVector& psi0, double t_end, std::uint64_t seed,
                               const TrajectoryOptions& opts) {
  return simulate_trajectory(QuantumJumpEngine(atom), psi0, t_end, seed, opts);
}

std::vector<double> simulate_detections(const QuantumJumpEngine& engine, const CVector& psi0, double t_end,
                                        std::uint64_t seed, std::span<const int> detect_channels) {
  std::vector<bool> detected(engine.jump_ops().size(), detect_channels.empty());
  for (int c : detect_channels) {
    if (c < 0 || c >= static_cast<int>(detected.size()))
      throw ConfigError("IndexOutOfRange", "detected channel index out of range");
    detected[c] = true;
  }
  std::vector<double> times;
  simulate_jumps(engine, psi0, t_end, seed, [&](double t, int channel, const CVector&) {
    if (detected[channel]) times.push_back(t);
  });
  return times;
}

ConditionalDensity evolve_conditional_density(const CMatrix& rho0, const CMatrix& h_cond, double t) {
  const ConditionalPropagator prop(h_cond);
  const CMatrix u = prop.matrix(t);
  CMatrix rho = u * rho0 * u.adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return {rho, t};
}

CVector basis_state(int n_levels, int level) {
  if (level < 0 || level >= n_levels) throw ConfigError("IndexOutOfRange", "basis state level out of range");
  CVector v = CVector::Zero(n_levels);
  v(level) = 1.0;
  return v;
}

}  // namespace qjump
