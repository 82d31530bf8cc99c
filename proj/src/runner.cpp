#include "qjump/runner.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "qjump/batch.hpp"
#include "qjump/errors.hpp"
#include "qjump/master_equation.hpp"
#include "qjump/rng.hpp"

namespace qjump {

using nlohmann::json;
namespace fs = std::filesystem;

std::string tool_version() { return QJUMP_VERSION; }

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json RunManifest::to_json() const {
  json j = {{"tool", "qjump"},
            {"version", version},
            {"config_hash", config_hash},
            {"experiment", experiment},
            {"seed_origin", seed_origin},
            {"seeds", seeds},
            {"jobs", jobs},
            {"wall_clock_s", wall_clock_s},
            {"outputs", outputs},
            {"summary", summary},
            {"checks_passed", checks_passed}};
  if (seed0) j["seed0"] = *seed0;
  return j;
}

// Formats --------------------------------------------------------------------

void write_trajectory_jsonl(std::ostream& os, const Trajectory& traj, int index, int initial_level) {
  json header = {{"type", "header"},
                 {"trajectory", index},
                 {"seed", traj.seed},
                 {"t_end", traj.t_end},
                 {"initial_level", initial_level},
                 {"n_levels", traj.psi0.size()}};
  os << header.dump() << '\n';
  for (const auto& j : traj.jumps) os << "{\"t\":" << format_double(j.t) << ",\"channel\":" << j.channel << "}\n";
}

void write_samples_csv(std::ostream& os, const Trajectory& traj) {
  const Eigen::Index n = traj.psi0.size();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",re_" << i << ",im_" << i;
  os << ",norm2\n";
  for (const auto& s : traj.samples) {
    os << format_double(s.t);
    for (Eigen::Index i = 0; i < n; ++i)
      os << ',' << format_double(s.state(i).real()) << ',' << format_double(s.state(i).imag());
    os << ',' << format_double(s.norm2) << '\n';
  }
}

PhotonRecord JumpFile::record(const std::vector<int>& channels) const {
  PhotonRecord r;
  r.t_end = t_end;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (channels.empty() || std::find(channels.begin(), channels.end(), channel[i]) != channels.end())
      r.detection_times.push_back(t[i]);
  return r;
}

JumpFile read_trajectory_jsonl(std::istream& is) {
  JumpFile f;
  bool have_header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw ConfigError("SchemaError", where + ": invalid JSON");
    }
    if (!j.is_object()) throw ConfigError("SchemaError", where + ": expected an object");
    if (j.value("type", "") == "header") {
      if (have_header) throw ConfigError("SchemaError", where + ": second header record");
      if (!j.contains("t_end") || !j["t_end"].is_number())
        throw ConfigError("SchemaError", where + ": header lacks t_end");
      f.t_end = j["t_end"].get<double>();
      if (j.contains("seed") && j["seed"].is_number_unsigned()) f.seed = j["seed"].get<std::uint64_t>();
      have_header = true;
      continue;
    }
    if (!have_header) throw ConfigError("SchemaError", where + ": jump record before the header");
    if (!j.contains("t") || !j["t"].is_number() || !j.contains("channel") || !j["channel"].is_number_integer())
      throw ConfigError("SchemaError", where + ": expected {\"t\": number, \"channel\": integer}");
    f.t.push_back(j["t"].get<double>());
    f.channel.push_back(j["channel"].get<int>());
  }
  if (!have_header) throw ConfigError("SchemaError", "trajectory file has no header record");
  return f;
}

void write_segmentation_csv(std::ostream& os, const PeriodSegmentation& seg) {
  os << "kind,t_start,t_end,n_detections,discarded,truncated\n";
  for (const auto& s : seg.segments)
    os << to_string(s.kind) << ',' << format_double(s.t_start) << ',' << format_double(s.t_end) << ','
       << s.n_detections << ',' << (s.discarded ? 1 : 0) << ',' << (s.truncated ? 1 : 0) << '\n';
}

void write_density_csv(std::ostream& os, const std::vector<double>& t, const std::vector<CMatrix>& rho) {
  const Eigen::Index n = rho.empty() ? 0 : rho.front().rows();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) os << ",rho_" << i << j << "_re,rho_" << i << j << "_im";
  os << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    os << format_double(t[k]);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j)
        os << ',' << format_double(rho[k](i, j).real()) << ',' << format_double(rho[k](i, j).imag());
    os << '\n';
  }
}

void write_spectrum_csv(std::ostream& os, const SpectrumResult& s,
                        const std::vector<std::pair<std::string, std::string>>& header) {
  os << "# coherent_weight " << format_double(s.coherent_weight) << '\n'
     << "# total_power " << format_double(s.total_power) << '\n'
     << "# integrated_incoherent " << format_double(s.integrated_incoherent) << '\n'
     << "# tau_max " << format_double(s.tau_max) << '\n';
  for (const auto& [k, v] : header) os << "# " << k << ' ' << v << '\n';
  os << "delta,incoherent_density\n";
  for (std::size_t i = 0; i < s.delta.size(); ++i)
    os << format_double(s.delta[i]) << ',' << format_double(s.incoherent[i]) << '\n';
}

// Runner -----------------------------------------------------------------------

namespace {

class Output {
 public:
  Output(fs::path dir, RunManifest& m) : dir_(std::move(dir)), manifest_(m) { fs::create_directories(dir_); }

  std::ofstream open(const std::string& name) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw ConfigError("OutputError", "cannot write " + (dir_ / name).string());
    manifest_.outputs.push_back(name);
    return os;
  }

 private:
  fs::path dir_;
  RunManifest& manifest_;
};

std::string numbered(const char* stem, int k, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d%s", stem, k, ext);
  return buf;
}

std::vector<double> uniform_times(double t_end, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = t_end * i / (n - 1);
  return t;
}

std::vector<double> delta_grid(const ExperimentParams& p) {
  return linear_grid(p.delta_grid.min, p.delta_grid.max, p.delta_grid.n);
}

json decomposition_json(const PeakDecomposition& d) {
  return {{"broad_amplitude", d.broad_amplitude}, {"broad_width", d.broad_width},
          {"narrow_amplitude", d.narrow_amplitude}, {"narrow_width", d.narrow_width},
          {"narrow_height", d.narrow_height()},   {"center_height", d.center_height},
          {"coherent_weight", d.coherent_weight}, {"max_residual", d.max_residual},
          {"narrow_present", d.narrow_present}};
}

std::vector<std::pair<std::string, std::string>> decomposition_header(const std::string& prefix,
                                                                       const PeakDecomposition& d) {
  return {{prefix + "broad_amplitude", format_double(d.broad_amplitude)},
          {prefix + "broad_width", format_double(d.broad_width)},
          {prefix + "narrow_amplitude", format_double(d.narrow_amplitude)},
          {prefix + "narrow_width", format_double(d.narrow_width)},
          {prefix + "fit_max_residual", format_double(d.max_residual)},
          {prefix + "narrow_present", d.narrow_present ? "1" : "0"}};
}

void run_trajectories(const ExperimentConfig& cfg, int jobs, Output& out, RunManifest& m) {
  const auto& p = cfg.params;
  const QuantumJumpEngine engine(cfg.atom, {.tol = p.tolerance});
  const CVector psi0 = basis_state(cfg.atom.n_levels(), p.initial_level);
  TrajectoryOptions topts;
  if (p.dense_samples == 1) topts.sample_times = {0.0};
  else if (p.dense_samples > 1) topts.sample_times = uniform_times(p.t_end, p.dense_samples);
  const auto trajs = run_trajectory_batch(engine, psi0, p.t_end, *p.seed0, p.n_traj, topts, jobs);

  long long jumps = 0;
  for (int k = 0; k < p.n_traj; ++k) {
    auto os = out.open(numbered("traj", k, ".jsonl"));
    write_trajectory_jsonl(os, trajs[k], k, p.initial_level);
    if (p.dense_samples > 0) {
      auto cs = out.open(numbered("traj", k, "_samples.csv"));
      write_samples_csv(cs, trajs[k]);
    }
    jumps += static_cast<long long>(trajs[k].jumps.size());
  }
  m.summary = {{"n_traj", p.n_traj}, {"total_jumps", jumps}, {"mean_rate", jumps / (p.t_end * p.n_traj)}};
}

bool run_unraveling(const ExperimentConfig& cfg, int jobs, Output& out, RunManifest& m) {
  const auto& p = cfg.params;
  const CVector psi0 = basis_state(cfg.atom.n_levels(), p.initial_level);
  const auto t = uniform_times(p.t_end, p.n_times);
  const auto rep = compare_unraveling(cfg.atom, psi0, t, p.n_traj, *p.seed0, jobs);

  {
    auto os = out.open("master.csv");
    write_density_csv(os, rep.t, rep.master);
  }
  {
    auto os = out.open("averaged.csv");
    write_density_csv(os, rep.t, rep.averaged);
  }
  {
    auto os = out.open("unraveling.csv");
    os << "t,trace_distance,mc_error\n";
    for (std::size_t i = 0; i < rep.t.size(); ++i)
      os << format_double(rep.t[i]) << ',' << format_double(rep.trace_distance[i]) << ','
         << format_double(rep.mc_error[i]) << '\n';
  }
  const bool ok = rep.consistent(p.mc_factor);
  m.summary = {{"n_traj", rep.n_traj},
               {"max_trace_distance", rep.max_trace_distance},
               {"mc_error_estimate", rep.mc_error_estimate},
               {"mc_factor", p.mc_factor},
               {"consistent", ok}};
  {
    auto os = out.open("report.json");
    os << m.summary.dump(2) << '\n';
  }
  return ok;
}

void run_periods(const ExperimentConfig& cfg, int jobs, Output& out, RunManifest& m) {
  const auto& p = cfg.params;
  const QuantumJumpEngine engine(cfg.atom, {.tol = p.tolerance});
  const CVector psi0 = basis_state(cfg.atom.n_levels(), p.initial_level);
  const auto records = detection_batch(engine, psi0, p.t_end, *p.seed0, p.n_traj, p.channels, jobs);

  std::vector<PeriodSegmentation> segs;
  for (int k = 0; k < p.n_traj; ++k) {
    segs.push_back(classify_periods({records[k], p.t_end}, p.t0_threshold, p.min_light));
    auto os = out.open(numbered("segments", k, ".csv"));
    write_segmentation_csv(os, segs.back());
  }
  const PeriodStats st = pooled_period_stats(segs);
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  m.summary = {{"n_traj", p.n_traj},
               {"T0", p.t0_threshold},
               {"T", p.min_light},
               {"mean_dark", opt(st.mean_dark)},
               {"mean_light", opt(st.mean_light)},
               {"dark_fraction", st.dark_fraction},
               {"complete_dark_periods", st.dark_durations.size()},
               {"complete_light_periods", st.light_durations.size()},
               {"mean_light_gap", opt(st.mean_light_gap)},
               {"light_photon_rate", opt(st.light_photon_rate)}};
  {
    auto os = out.open("durations.csv");
    os << "kind,duration\n";
    for (double d : st.dark_durations) os << "dark," << format_double(d) << '\n';
    for (double d : st.light_durations) os << "light," << format_double(d) << '\n';
  }
  auto os = out.open("stats.json");
  os << m.summary.dump(2) << '\n';
}

void run_spectrum(const ExperimentConfig& cfg, int jobs, Output& out, RunManifest& m) {
  const auto& p = cfg.params;
  const auto grid = delta_grid(p);
  SpectrumOptions so;
  so.channels = p.channels;
  so.tau_max = p.tau_max;
  so.jobs = jobs;
  const SpectrumResult s = emission_spectrum(cfg.atom, grid, so);

  std::vector<double> maxima;
  for (std::size_t i : local_maxima(s)) maxima.push_back(s.delta[i]);
  std::string maxima_str;
  for (double d : maxima) maxima_str += (maxima_str.empty() ? "" : " ") + format_double(d);

  std::vector<std::pair<std::string, std::string>> header{{"maxima", maxima_str}};
  m.summary = {{"coherent_weight", s.coherent_weight},
               {"total_power", s.total_power},
               {"coherent_fraction", s.coherent_weight / s.total_power},
               {"integrated_incoherent", s.integrated_incoherent},
               {"tau_max", s.tau_max},
               {"maxima", maxima}};
  if (p.decompose) {
    const auto d = decompose_center(cfg.atom, p.rate_scale, so);
    const auto h = decomposition_header("", d);
    header.insert(header.end(), h.begin(), h.end());
    m.summary["decomposition"] = decomposition_json(d);
  }
  auto os = out.open("spectrum.csv");
  write_spectrum_csv(os, s, header);
}

void run_light_period(const ExperimentConfig& cfg, int jobs, Output& out, RunManifest& m) {
  const auto& p = cfg.params;
  const auto grid = delta_grid(p);
  SpectrumOptions so;
  so.channels = p.channels;
  so.tau_max = p.tau_max;
  so.jobs = jobs;
  const SpectrumResult complete = emission_spectrum(cfg.atom, grid, so);
  const PeakDecomposition dc = decompose_center(cfg.atom, p.rate_scale, so);

  const AtomModel light_atom = subsystem(cfg.atom, p.light_levels);
  SpectrumOptions lo = so;
  lo.channels.clear();
  const SpectrumResult light = emission_spectrum(light_atom, grid, lo);
  const PeakDecomposition dl = decompose_center(light_atom, p.rate_scale, lo);

  {
    auto os = out.open("complete_spectrum.csv");
    write_spectrum_csv(os, complete, decomposition_header("", dc));
  }
  {
    auto os = out.open("light_period_spectrum.csv");
    write_spectrum_csv(os, light, decomposition_header("", dl));
  }
  m.summary = {{"complete", {{"coherent_weight", complete.coherent_weight},
                             {"total_power", complete.total_power},
                             {"decomposition", decomposition_json(dc)}}},
               {"light_period", {{"levels", p.light_levels},
                                 {"coherent_weight", light.coherent_weight},
                                 {"total_power", light.total_power},
                                 {"decomposition", decomposition_json(dl)}}}};
}

bool run_ergodicity(const ExperimentConfig& cfg, Output& out, RunManifest& m) {
  const auto& p = cfg.params;
  const CVector psi0 = basis_state(cfg.atom.n_levels(), p.initial_level);
  const auto rep = ergodicity_check(cfg.atom, psi0, p.t_end, split_seed(*p.seed0, 0));
  m.summary = {{"t_long", rep.t_long},       {"n_jumps", rep.n_jumps},
               {"time_rate", rep.time_rate}, {"ensemble_rate", rep.ensemble_rate},
               {"sigma", rep.sigma},         {"ratio", rep.ratio},
               {"within_3sigma", rep.within_3sigma}};
  auto os = out.open("report.json");
  os << m.summary.dump(2) << '\n';
  return rep.within_3sigma;
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest m;
  m.config_hash = config_hash(cfg);
  m.version = tool_version();
  m.experiment = to_string(cfg.experiment);
  m.seed0 = cfg.params.seed0;
  m.seed_origin = cfg.params.seed0 ? cfg.seed_origin : "none";
  m.jobs = std::max(1, opts.jobs);
  m.output_dir = opts.output_dir.value_or(cfg.output_dir);
  if (cfg.params.seed0) {
    const int n_seeds = cfg.experiment == Experiment::Ergodicity ? 1 : cfg.params.n_traj;
    for (int k = 0; k < n_seeds; ++k) m.seeds.push_back(split_seed(*cfg.params.seed0, k));
  }

  Output out(m.output_dir, m);
  bool ok = true;
  try {
    switch (cfg.experiment) {
      case Experiment::Trajectories: run_trajectories(cfg, m.jobs, out, m); break;
      case Experiment::CompareUnraveling: ok = run_unraveling(cfg, m.jobs, out, m); break;
      case Experiment::Periods: run_periods(cfg, m.jobs, out, m); break;
      case Experiment::Spectrum: run_spectrum(cfg, m.jobs, out, m); break;
      case Experiment::LightPeriodSpectrum: run_light_period(cfg, m.jobs, out, m); break;
      case Experiment::Ergodicity: ok = run_ergodicity(cfg, out, m); break;
    }
  } catch (const Error& e) {
    throw Error(e.kind(), e.code(), m.experiment + ": " + e.what());
  }
  m.checks_passed = ok;
  m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  {
    std::ofstream os(m.output_dir / "manifest.json", std::ios::binary);
    if (!os) throw ConfigError("OutputError", "cannot write manifest.json");
    os << m.to_json().dump(2) << '\n';
  }
  if (!ok && cfg.params.check)
    throw StatisticalError("CheckFailed", m.experiment + ": statistical self-check failed (see manifest.json)");
  return m;
}

}  // namespace qjump
