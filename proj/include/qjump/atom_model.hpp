#pragma once

// N-level atom in the rotating frame of its driving lasers.
//
// Conventions (hbar = 1, rates and frequencies in units of a reference rate):
//   drive (upper u, lower l, Rabi frequency W, detuning d = w_laser - w_ul):
//     H_A += -d |u><u| + (W/2) |u><l| + (W*/2) |l><u|
//   decay channel (upper i, lower a, Einstein coefficient A):
//     jump operator C = sqrt(A) |a><i|
//   damping matrix Gamma = 1/2 sum_k C_k^dagger C_k
//   conditional Hamiltonian H_cond = H_A - i Gamma
//
// With `cross_damping` set, channels sharing a lower level are merged into a
// single jump operator C_a = sum_i sqrt(A_ia) |a><i|, which adds the cross
// terms Gamma_ij = 1/2 sqrt(A_ia A_ja) (parallel dipoles).

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qjump/types.hpp"

namespace qjump {

struct DecayChannel {
  int upper = 0;
  int lower = 0;
  double a_coeff = 0.0;
};

struct DriveField {
  int upper = 0;
  int lower = 0;
  Complex rabi{0.0, 0.0};
  double detuning = 0.0;
};

struct AtomModel {
  std::vector<std::string> level_labels;
  std::vector<DecayChannel> decay_channels;
  std::vector<DriveField> drives;
  bool cross_damping = false;
  // Set when a model without any positive decay channel is intended.
  bool closed = false;
  // Physical value of the model's unit rate in s^-1; only used by
  // validate_coarse_graining.
  std::optional<double> rate_unit_per_second;

  int n_levels() const { return static_cast<int>(level_labels.size()); }

  /// Throws ConfigError (IndexOutOfRange, NegativeRate, DuplicateChannel,
  /// NoDecay, NonFinite) if an invariant is violated.
  void validate() const;

  /// Model with `n` levels labelled "0".."n-1" and nothing else.
  static AtomModel with_levels(int n);
};

/// Hermitian positive semidefinite damping matrix Gamma.
CMatrix build_gamma(const AtomModel& atom);

/// Atomic Hamiltonian H_A (Hermitian part of H_cond).
CMatrix build_h_atom(const AtomModel& atom);

/// H_cond = H_A - i Gamma.
CMatrix build_h_cond(const AtomModel& atom);

struct CoarseGrainingReport {
  double dt_seconds = 0.0;
  double max_rate_per_second = 0.0;
  double dt_times_rate = 0.0;
  bool in_window = false;    // dt in [1e-13, 1e-10] s
  bool lifetime_ok = false;  // dt * max A <= 0.01
  bool pass() const { return in_window && lifetime_ok; }
  std::string message;
};

/// Advisory check of a physical measurement interval against the
/// coarse-graining window. `rate_unit_per_second` overrides the model's own
/// unit if given. Never throws for a bad dt; it only reports.
CoarseGrainingReport validate_coarse_graining(
    const AtomModel& atom, double dt_seconds,
    std::optional<double> rate_unit_per_second = std::nullopt);

// Canonical models used throughout tests and presets. Level 0 is the ground
// state everywhere.

/// Two-level atom: channel 1 -> 0 with coefficient `a`, drive Rabi `rabi`.
AtomModel two_level(double a, double rabi, double detuning = 0.0);

struct DehmeltParams {
  double a_strong = 1.0;     // A2, level 1 -> 0
  double a_weak = 1e-4;      // A2', level 2 -> 0
  double rabi_strong = 0.5;  // Omega on 0 <-> 1
  double rabi_weak = 5e-3;   // Omega' on 0 <-> 2
  double detuning_strong = 0.0;
  double detuning_weak = 0.0;
};

/// Dehmelt V-system: ground 0, strongly coupled 1, metastable 2.
AtomModel dehmelt_v(const DehmeltParams& p = {});

/// Lambda system: excited level 2 decaying to grounds 0 and 1.
AtomModel lambda_system(double a0, double a1, double rabi0 = 0.0, double rabi1 = 0.0);

/// The model restricted to `keep` (renumbered in that order). Channels and
/// drives touching a dropped level are removed.
AtomModel subsystem(const AtomModel& atom, const std::vector<int>& keep);

// JSON schema:
//   { "levels": ["g", "e", ...],
//     "channels": [{"upper": 1, "lower": 0, "A": 1.0}, ...],
//     "drives": [{"upper": 1, "lower": 0, "rabi_re": 0.5, "rabi_im": 0.0,
//                 "detuning": 0.0}, ...],
//     "cross_damping": false,      (optional)
//     "closed": false,             (optional)
//     "rate_unit_hz": 1e8 }        (optional)
// Unknown keys are rejected with SchemaError.
AtomModel atom_from_json(const nlohmann::json& j);
nlohmann::json atom_to_json(const AtomModel& atom);

}  // namespace qjump
