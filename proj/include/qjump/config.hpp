#pragma once

// Experiment configuration: a JSON document naming an atom (inline, a file,
// or a shipped preset), one experiment and its parameters.
//
//   {
//     "preset": "dehmelt-v",            optional; fills every other key
//     "atom": {...} | "path/atom.json", inline model or file (relative to the config)
//     "experiment": "periods",
//     "params": {...},
//     "output_dir": "out/dehmelt"
//   }
//
// Keys given next to a preset override it; "params" merges key by key.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qjump/atom_model.hpp"

namespace qjump {

enum class Experiment { Trajectories, CompareUnraveling, Periods, Spectrum, LightPeriodSpectrum, Ergodicity };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);
bool is_stochastic(Experiment e);

struct DeltaGrid {
  double min = -10.0;
  double max = 10.0;
  int n = 401;
};

struct ExperimentParams {
  double t_end = 10.0;
  int n_traj = 1;
  std::optional<std::uint64_t> seed0;
  int initial_level = 0;

  // trajectories
  int dense_samples = 0;  // evenly spaced state samples per trajectory (0 = none)

  // compare_unraveling
  int n_times = 51;
  double mc_factor = 4.0;

  // periods
  double t0_threshold = 50.0;
  double min_light = 0.0;
  std::vector<int> channels;  // detected / radiating channels, empty = all

  // spectra
  DeltaGrid delta_grid;
  std::optional<double> tau_max;
  double rate_scale = 1.0;
  bool decompose = false;
  std::vector<int> light_levels{0, 1};

  double tolerance = 1e-10;
  bool check = true;  // turn failed statistical checks into exit code 4
};

struct ExperimentConfig {
  std::string source;  // preset name, atom file, or "inline"
  std::optional<std::string> preset;
  AtomModel atom;
  Experiment experiment = Experiment::Trajectories;
  ExperimentParams params;
  std::filesystem::path output_dir = "out";
  std::string seed_origin = "config";  // or "QJUMP_SEED"
};

struct ParseOptions {
  std::filesystem::path base_dir = ".";                // resolves relative atom files
  std::optional<std::filesystem::path> preset_dir;     // default: preset_directory()
  std::optional<std::uint64_t> seed_override;          // QJUMP_SEED
};

/// Throws ConfigError (SchemaError / RangeError) with the JSON path of the
/// offending key.
ExperimentConfig parse_config(const std::string& text, const ParseOptions& opts = {});
ExperimentConfig load_config(const std::filesystem::path& file, const ParseOptions& opts = {});

/// Canonical JSON of the effective configuration (output_dir excluded).
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of `config_to_json(cfg).dump()`, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// QJUMP_SEED parsing; nullopt when unset, RangeError when malformed.
std::optional<std::uint64_t> seed_from_env();

std::filesystem::path preset_directory();

struct PresetInfo {
  std::string name;
  std::string experiment;
  std::string description;
};
std::vector<PresetInfo> list_presets(const std::filesystem::path& dir = preset_directory());

}  // namespace qjump
