#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "qjump/batch.hpp"
#include "qjump/config.hpp"
#include "qjump/errors.hpp"
#include "qjump/periods.hpp"
#include "qjump/runner.hpp"

namespace {

// One line on stderr: "qjump: error <Code> (exit N): message".
int report(const qjump::Error& e) {
  const int code = static_cast<int>(e.kind());
  std::string msg = e.what();
  for (char& c : msg)
    if (c == '\n') c = ' ';
  std::fprintf(stderr, "qjump: error %s (exit %d): %s\n", e.code().c_str(), code, msg.c_str());
  return code;
}

qjump::ExperimentConfig load(const std::string& file) {
  qjump::ParseOptions po;
  po.seed_override = qjump::seed_from_env();
  return qjump::load_config(file, po);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qjump: quantum-jump trajectories, master equation, photon statistics and spectra"};
  app.set_version_flag("--version", qjump::tool_version());
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  std::string run_config;
  int jobs = 1;
  std::string out_dir;
  run->add_option("config", run_config, "experiment config (JSON)")->required();
  run->add_option("--jobs,-j", jobs, "worker threads")->check(CLI::Range(1, 4096));
  run->add_option("--out,-o", out_dir, "output directory (overrides output_dir)");

  auto* preset = app.add_subcommand("preset", "inspect shipped presets");
  preset->require_subcommand(1);
  auto* preset_list = preset->add_subcommand("list", "list preset names");
  auto* preset_show = preset->add_subcommand("show", "print a preset file");
  std::string preset_name;
  preset_show->add_option("name", preset_name)->required();

  auto* validate = app.add_subcommand("validate", "parse and check a config without running it");
  std::string validate_config;
  validate->add_option("config", validate_config, "experiment config (JSON)")->required();

  auto* segment = app.add_subcommand("segment", "classify light/dark periods of a trajectory file");
  std::string seg_input, seg_output;
  double t0 = 50.0, min_light = 0.0;
  std::vector<int> channels;
  segment->add_option("records", seg_input, "trajectory JSON-lines file")->required();
  segment->add_option("--T0", t0, "dark threshold T0")->capture_default_str();
  segment->add_option("--T", min_light, "minimum light-period length T")->capture_default_str();
  segment->add_option("--channels", channels, "detected channels (default: all)");
  segment->add_option("--out,-o", seg_output, "CSV output (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "qjump: error UsageError (exit 2): %s\n", e.what());
    return 2;
  }

  try {
    if (*run) {
      const auto cfg = load(run_config);
      qjump::RunOptions ro;
      ro.jobs = jobs;
      if (!out_dir.empty()) ro.output_dir = out_dir;
      const auto m = qjump::run_experiment(cfg, ro);
      std::printf("%s: %zu file(s) in %s (config %s, %.2f s)\n", m.experiment.c_str(), m.outputs.size(),
                  m.output_dir.string().c_str(), m.config_hash.c_str(), m.wall_clock_s);
      if (jobs > qjump::max_parallel_jobs())
        std::fprintf(stderr, "qjump: note: %d jobs requested, %d hardware threads available\n", jobs,
                     qjump::max_parallel_jobs());
    } else if (*preset_list) {
      for (const auto& p : qjump::list_presets())
        std::printf("%-24s %-22s %s\n", p.name.c_str(), p.experiment.c_str(), p.description.c_str());
    } else if (*preset_show) {
      const auto file = qjump::preset_directory() / (preset_name + ".json");
      std::ifstream in(file);
      if (!in) throw qjump::ConfigError("UnknownPreset", "no preset named \"" + preset_name + "\"");
      std::cout << in.rdbuf();
    } else if (*validate) {
      const auto cfg = load(validate_config);
      std::printf("ok: %s on %d level(s), config %s\n", qjump::to_string(cfg.experiment).c_str(),
                  cfg.atom.n_levels(), qjump::config_hash(cfg).c_str());
    } else if (*segment) {
      std::ifstream in(seg_input);
      if (!in) throw qjump::ConfigError("FileNotFound", "cannot read " + seg_input);
      const auto file = qjump::read_trajectory_jsonl(in);
      const auto seg = qjump::classify_periods(file.record(channels), t0, min_light);
      if (seg_output.empty()) {
        qjump::write_segmentation_csv(std::cout, seg);
      } else {
        std::ofstream os(seg_output);
        if (!os) throw qjump::ConfigError("OutputError", "cannot write " + seg_output);
        qjump::write_segmentation_csv(os, seg);
      }
    }
  } catch (const qjump::Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "qjump: error Internal (exit 3): %s\n", e.what());
    return 3;
  }
  return 0;
}
