#pragma once

// Experiment runner and the on-disk formats.
//
// Trajectory files (JSON lines): one header record
//   {"type":"header","trajectory":k,"seed":s,"t_end":T,"initial_level":l,"n_levels":n}
// followed by one {"t":..,"channel":..} record per jump, in time order.
// Optional dense samples go to a CSV with columns t, re_i, im_i, norm2.
//
// Doubles are printed with 17 significant digits so identical runs give
// byte-identical files.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qjump/config.hpp"
#include "qjump/dynamics.hpp"
#include "qjump/periods.hpp"
#include "qjump/spectra.hpp"

namespace qjump {

struct RunOptions {
  int jobs = 1;
  std::optional<std::filesystem::path> output_dir;  // overrides the config
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::string experiment;
  std::optional<std::uint64_t> seed0;
  std::string seed_origin;
  std::vector<std::uint64_t> seeds;  // one per trajectory, split_seed(seed0, k)
  int jobs = 1;
  double wall_clock_s = 0.0;
  std::filesystem::path output_dir;
  std::vector<std::string> outputs;  // relative to output_dir
  nlohmann::json summary = nlohmann::json::object();
  bool checks_passed = true;

  nlohmann::json to_json() const;
};

/// Runs the experiment and writes its outputs plus manifest.json. Module
/// errors are rethrown with the experiment name prefixed. A failed
/// statistical self-check (when params.check is set) throws StatisticalError
/// after every file, the manifest included, has been written.
RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

std::string tool_version();

// Formats --------------------------------------------------------------------

std::string format_double(double x);

void write_trajectory_jsonl(std::ostream& os, const Trajectory& traj, int index, int initial_level);
void write_samples_csv(std::ostream& os, const Trajectory& traj);

struct JumpFile {
  std::optional<std::uint64_t> seed;
  double t_end = 0.0;
  std::vector<double> t;
  std::vector<int> channel;

  /// Detection record restricted to `channels` (empty = every channel).
  PhotonRecord record(const std::vector<int>& channels = {}) const;
};

/// Throws SchemaError on malformed lines or a missing header.
JumpFile read_trajectory_jsonl(std::istream& is);

void write_segmentation_csv(std::ostream& os, const PeriodSegmentation& seg);

/// Columns t, then rho_ij_re, rho_ij_im for i <= j.
void write_density_csv(std::ostream& os, const std::vector<double>& t, const std::vector<CMatrix>& rho);

/// delta, incoherent_density; '#' header lines carry the scalar results.
void write_spectrum_csv(std::ostream& os, const SpectrumResult& s,
                        const std::vector<std::pair<std::string, std::string>>& header = {});

}  // namespace qjump
