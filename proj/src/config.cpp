#include "qjump/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "qjump/dynamics.hpp"
#include "qjump/errors.hpp"

namespace qjump {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Name {
  Experiment e;
  const char* s;
};
constexpr Name kNames[] = {{Experiment::Trajectories, "trajectories"},
                           {Experiment::CompareUnraveling, "compare_unraveling"},
                           {Experiment::Periods, "periods"},
                           {Experiment::Spectrum, "spectrum"},
                           {Experiment::LightPeriodSpectrum, "light_period_spectrum"},
                           {Experiment::Ergodicity, "ergodicity"}};

[[noreturn]] void schema(const std::string& path, const std::string& msg) {
  throw ConfigError("SchemaError", path + ": " + msg);
}
[[noreturn]] void range(const std::string& path, const std::string& msg) {
  throw ConfigError("RangeError", path + ": " + msg);
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!obj.is_object()) schema(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      schema(path + "." + key, "unknown key \"" + key + "\"");
  }
}

double get_number(const json& obj, const char* key, double fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) schema(path + "." + key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) range(path + "." + key, "not finite");
  return x;
}

long long get_int(const json& obj, const char* key, long long fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) schema(path + "." + key, "expected an integer");
  return v.get<long long>();
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) schema(path + "." + key, "expected true or false");
  return v.get<bool>();
}

std::vector<int> get_int_list(const json& obj, const char* key, std::vector<int> fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_array()) schema(path + "." + key, "expected an array of integers");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) schema(path + "." + key, "expected an array of integers");
    out.push_back(x.get<int>());
  }
  return out;
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("FileNotFound", "cannot read " + file.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("SchemaError", what + ": invalid JSON (byte " + std::to_string(e.byte) + ")");
  }
}

ExperimentParams parse_params(const json& p, Experiment exp, const AtomModel& atom) {
  const std::string path = "params";
  reject_unknown(p,
                 {"t_end", "n_traj", "seed0", "initial_level", "dense_samples", "n_times", "mc_factor", "T0", "T",
                  "channels", "delta_grid", "tau_max", "rate_scale", "decompose", "light_levels", "tolerance", "check"},
                 path);
  ExperimentParams out;
  out.t_end = get_number(p, "t_end", out.t_end, path);
  out.n_traj = static_cast<int>(get_int(p, "n_traj", out.n_traj, path));
  if (p.contains("seed0")) {
    const auto& s = p.at("seed0");
    if (!s.is_number_integer()) schema("params.seed0", "expected a non-negative integer");
    if (s.is_number_unsigned()) out.seed0 = s.get<std::uint64_t>();
    else if (s.get<long long>() < 0) range("params.seed0", "must be non-negative");
    else out.seed0 = static_cast<std::uint64_t>(s.get<long long>());
  }
  out.initial_level = static_cast<int>(get_int(p, "initial_level", out.initial_level, path));
  out.dense_samples = static_cast<int>(get_int(p, "dense_samples", out.dense_samples, path));
  out.n_times = static_cast<int>(get_int(p, "n_times", out.n_times, path));
  out.mc_factor = get_number(p, "mc_factor", out.mc_factor, path);
  out.t0_threshold = get_number(p, "T0", out.t0_threshold, path);
  out.min_light = get_number(p, "T", out.min_light, path);
  out.channels = get_int_list(p, "channels", out.channels, path);
  if (p.contains("delta_grid")) {
    const auto& g = p.at("delta_grid");
    reject_unknown(g, {"min", "max", "n"}, "params.delta_grid");
    out.delta_grid.min = get_number(g, "min", out.delta_grid.min, "params.delta_grid");
    out.delta_grid.max = get_number(g, "max", out.delta_grid.max, "params.delta_grid");
    out.delta_grid.n = static_cast<int>(get_int(g, "n", out.delta_grid.n, "params.delta_grid"));
  }
  if (p.contains("tau_max")) out.tau_max = get_number(p, "tau_max", 0.0, path);
  out.rate_scale = get_number(p, "rate_scale", out.rate_scale, path);
  out.decompose = get_bool(p, "decompose", out.decompose, path);
  out.light_levels = get_int_list(p, "light_levels", out.light_levels, path);
  out.tolerance = get_number(p, "tolerance", out.tolerance, path);
  out.check = get_bool(p, "check", out.check, path);

  const int n = atom.n_levels();
  if (!(out.t_end > 0.0)) range("params.t_end", "must be positive");
  if (out.n_traj < 1 || out.n_traj > 10'000'000) range("params.n_traj", "must lie in [1, 1e7]");
  if (exp == Experiment::CompareUnraveling && out.n_traj < 100)
    range("params.n_traj", "compare_unraveling needs at least 100 trajectories");
  if (out.initial_level < 0 || out.initial_level >= n) range("params.initial_level", "no such level");
  if (out.dense_samples < 0 || out.dense_samples > 1'000'000) range("params.dense_samples", "must lie in [0, 1e6]");
  if (out.n_times < 2 || out.n_times > 100'000) range("params.n_times", "must lie in [2, 1e5]");
  if (!(out.mc_factor > 0.0)) range("params.mc_factor", "must be positive");
  if (!(out.t0_threshold > 0.0)) range("params.T0", "must be positive");
  if (out.min_light < 0.0) range("params.T", "must be non-negative");
  const int n_ops = static_cast<int>(jump_operators(atom).size());
  for (int c : out.channels)
    if (c < 0 || c >= n_ops) range("params.channels", "channel " + std::to_string(c) + " does not exist");
  if (out.delta_grid.n < 1 || out.delta_grid.n > 1'000'000) range("params.delta_grid.n", "must lie in [1, 1e6]");
  if (out.delta_grid.max < out.delta_grid.min) range("params.delta_grid", "max < min");
  if (out.delta_grid.n == 1 && out.delta_grid.max != out.delta_grid.min)
    range("params.delta_grid", "a single point needs min == max");
  if (out.tau_max && !(*out.tau_max > 0.0)) range("params.tau_max", "must be positive");
  if (!(out.rate_scale > 0.0)) range("params.rate_scale", "must be positive");
  std::set<int> seen;
  if (out.light_levels.empty()) range("params.light_levels", "must not be empty");
  for (int lv : out.light_levels)
    if (lv < 0 || lv >= n || !seen.insert(lv).second) range("params.light_levels", "invalid or repeated level");
  if (!(out.tolerance > 0.0 && out.tolerance <= 1e-3)) range("params.tolerance", "must lie in (0, 1e-3]");
  return out;
}

json load_preset_document(const std::string& name, const fs::path& dir) {
  if (name.empty() || name.find_first_of("/\\") != std::string::npos || name.front() == '.')
    schema("preset", "invalid preset name \"" + name + "\"");
  const fs::path file = dir / (name + ".json");
  if (!fs::exists(file)) throw ConfigError("UnknownPreset", "preset: no preset named \"" + name + "\"");
  json doc = parse_json(read_file(file), "preset " + name);
  if (doc.contains("preset")) schema("preset", "presets cannot refer to other presets");
  return doc;
}

}  // namespace

std::string to_string(Experiment e) {
  for (const auto& n : kNames)
    if (n.e == e) return n.s;
  return "?";
}

Experiment experiment_from_string(const std::string& name) {
  for (const auto& n : kNames)
    if (name == n.s) return n.e;
  std::string known;
  for (const auto& n : kNames) known += std::string(known.empty() ? "" : ", ") + n.s;
  throw ConfigError("SchemaError", "experiment: unknown experiment \"" + name + "\" (known: " + known + ")");
}

bool is_stochastic(Experiment e) {
  return e == Experiment::Trajectories || e == Experiment::CompareUnraveling || e == Experiment::Periods ||
         e == Experiment::Ergodicity;
}

fs::path preset_directory() {
  if (const char* env = std::getenv("QJUMP_PRESET_DIR"); env && *env) return env;
  return QJUMP_PRESET_DIR;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* env = std::getenv("QJUMP_SEED");
  if (!env || !*env) return std::nullopt;
  const std::string s = env;
  if (s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("RangeError", "QJUMP_SEED: expected a non-negative decimal integer, got \"" + s + "\"");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError("RangeError", "QJUMP_SEED: value out of range");
  }
}

ExperimentConfig parse_config(const std::string& text, const ParseOptions& opts) {
  json doc = parse_json(text, "config");
  reject_unknown(doc, {"preset", "description", "atom", "experiment", "params", "output_dir"}, "config");

  ExperimentConfig cfg;
  fs::path atom_base = opts.base_dir;
  if (doc.contains("preset")) {
    if (!doc.at("preset").is_string()) schema("preset", "expected a string");
    const std::string name = doc.at("preset").get<std::string>();
    const fs::path dir = opts.preset_dir.value_or(preset_directory());
    json merged = load_preset_document(name, dir);
    reject_unknown(merged, {"description", "atom", "experiment", "params", "output_dir"}, "preset " + name);
    if (!doc.contains("atom")) atom_base = dir;
    for (const auto& [key, value] : doc.items()) {
      if (key == "preset") continue;
      if (key == "params" && merged.contains("params") && value.is_object()) merged["params"].merge_patch(value);
      else merged[key] = value;
    }
    doc = std::move(merged);
    cfg.preset = name;
    cfg.source = name;
  }

  if (!doc.contains("atom")) schema("atom", "missing (give an inline model, a file path, or a preset)");
  const json& atom_j = doc.at("atom");
  if (atom_j.is_string()) {
    fs::path file = atom_j.get<std::string>();
    if (file.is_relative()) file = atom_base / file;
    if (!fs::exists(file)) throw ConfigError("FileNotFound", "atom: file " + file.string() + " does not exist");
    cfg.atom = atom_from_json(parse_json(read_file(file), "atom file " + file.string()));
    if (!cfg.preset) cfg.source = file.string();
  } else if (atom_j.is_object()) {
    cfg.atom = atom_from_json(atom_j);
    if (!cfg.preset) cfg.source = "inline";
  } else {
    schema("atom", "expected an object or a file path");
  }

  if (!doc.contains("experiment")) schema("experiment", "missing");
  if (!doc.at("experiment").is_string()) schema("experiment", "expected a string");
  cfg.experiment = experiment_from_string(doc.at("experiment").get<std::string>());

  cfg.params = parse_params(doc.value("params", json::object()), cfg.experiment, cfg.atom);
  if (opts.seed_override) {
    cfg.params.seed0 = *opts.seed_override;
    cfg.seed_origin = "QJUMP_SEED";
  }
  if (is_stochastic(cfg.experiment) && !cfg.params.seed0)
    schema("params.seed0", "required for the stochastic experiment \"" + to_string(cfg.experiment) + "\"");

  if (doc.contains("output_dir")) {
    if (!doc.at("output_dir").is_string()) schema("output_dir", "expected a string");
    cfg.output_dir = doc.at("output_dir").get<std::string>();
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& file, const ParseOptions& opts) {
  ParseOptions o = opts;
  o.base_dir = file.has_parent_path() ? file.parent_path() : fs::path(".");
  return parse_config(read_file(file), o);
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& p = cfg.params;
  json params = {{"t_end", p.t_end},
                 {"n_traj", p.n_traj},
                 {"initial_level", p.initial_level},
                 {"dense_samples", p.dense_samples},
                 {"n_times", p.n_times},
                 {"mc_factor", p.mc_factor},
                 {"T0", p.t0_threshold},
                 {"T", p.min_light},
                 {"channels", p.channels},
                 {"delta_grid", {{"min", p.delta_grid.min}, {"max", p.delta_grid.max}, {"n", p.delta_grid.n}}},
                 {"rate_scale", p.rate_scale},
                 {"decompose", p.decompose},
                 {"light_levels", p.light_levels},
                 {"tolerance", p.tolerance},
                 {"check", p.check}};
  if (p.seed0) params["seed0"] = *p.seed0;
  if (p.tau_max) params["tau_max"] = *p.tau_max;
  json j = {{"atom", atom_to_json(cfg.atom)}, {"experiment", to_string(cfg.experiment)}, {"params", params}};
  if (cfg.preset) j["preset"] = *cfg.preset;
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config_to_json(cfg).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<PresetInfo> list_presets(const fs::path& dir) {
  std::vector<PresetInfo> out;
  if (!fs::is_directory(dir)) throw ConfigError("FileNotFound", "preset directory " + dir.string() + " not found");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    const json doc = parse_json(read_file(entry.path()), entry.path().string());
    if (!doc.contains("experiment")) continue;  // atom-only files
    out.push_back({entry.path().stem().string(), doc.value("experiment", ""), doc.value("description", "")});
  }
  std::sort(out.begin(), out.end(), [](const PresetInfo& a, const PresetInfo& b) { return a.name < b.name; });
  return out;
}

}  // namespace qjump
