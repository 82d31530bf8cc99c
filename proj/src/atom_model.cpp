#include "qjump/atom_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include "qjump/errors.hpp"

namespace qjump {

namespace {

bool in_range(int idx, int n) { return idx >= 0 && idx < n; }

std::string pair_str(int u, int l) {
  std::ostringstream os;
  os << "(" << u << " -> " << l << ")";
  return os.str();
}

}  // namespace

void AtomModel::validate() const {
  const int n = n_levels();
  if (n <= 0) throw ConfigError("RangeError", "atom model needs at least one level");

  std::set<std::pair<int, int>> seen;
  bool any_positive = false;
  for (const auto& ch : decay_channels) {
    if (!in_range(ch.upper, n) || !in_range(ch.lower, n))
      throw ConfigError("IndexOutOfRange",
                        "decay channel " + pair_str(ch.upper, ch.lower) + " references a missing level");
    if (ch.upper == ch.lower)
      throw ConfigError("IndexOutOfRange",
                        "decay channel " + pair_str(ch.upper, ch.lower) + " has upper == lower");
    if (!std::isfinite(ch.a_coeff)) throw ConfigError("NonFinite", "decay rate is not finite");
    if (ch.a_coeff < 0.0)
      throw ConfigError("NegativeRate", "decay channel " + pair_str(ch.upper, ch.lower) + " has A < 0");
    if (!seen.emplace(ch.upper, ch.lower).second)
      throw ConfigError("DuplicateChannel", "duplicate decay channel " + pair_str(ch.upper, ch.lower));
    any_positive = any_positive || ch.a_coeff > 0.0;
  }
  if (!any_positive && !closed)
    throw ConfigError("NoDecay", "model has no positive decay channel and is not marked closed");

  for (const auto& d : drives) {
    if (!in_range(d.upper, n) || !in_range(d.lower, n) || d.upper == d.lower)
      throw ConfigError("IndexOutOfRange", "drive " + pair_str(d.upper, d.lower) + " has invalid levels");
    if (!std::isfinite(d.rabi.real()) || !std::isfinite(d.rabi.imag()) || !std::isfinite(d.detuning))
      throw ConfigError("NonFinite", "drive " + pair_str(d.upper, d.lower) + " has non-finite entries");
  }
}

AtomModel AtomModel::with_levels(int n) {
  AtomModel atom;
  for (int i = 0; i < n; ++i) atom.level_labels.push_back(std::to_string(i));
  return atom;
}

CMatrix build_gamma(const AtomModel& atom) {
  atom.validate();
  const int n = atom.n_levels();
  CMatrix gamma = CMatrix::Zero(n, n);
  for (const auto& ch : atom.decay_channels) gamma(ch.upper, ch.upper) += 0.5 * ch.a_coeff;

  if (atom.cross_damping) {
    const auto& chans = atom.decay_channels;
    for (std::size_t p = 0; p < chans.size(); ++p) {
      for (std::size_t q = 0; q < chans.size(); ++q) {
        if (p == q || chans[p].lower != chans[q].lower) continue;
        gamma(chans[p].upper, chans[q].upper) += 0.5 * std::sqrt(chans[p].a_coeff * chans[q].a_coeff);
      }
    }
  }
  return gamma;
}

CMatrix build_h_atom(const AtomModel& atom) {
  atom.validate();
  const int n = atom.n_levels();
  CMatrix h = CMatrix::Zero(n, n);
  for (const auto& d : atom.drives) {
    h(d.upper, d.upper) -= d.detuning;
    h(d.upper, d.lower) += 0.5 * d.rabi;
    h(d.lower, d.upper) += 0.5 * std::conj(d.rabi);
  }
  return h;
}

CMatrix build_h_cond(const AtomModel& atom) {
  return build_h_atom(atom) - kI * build_gamma(atom);
}

CoarseGrainingReport validate_coarse_graining(const AtomModel& atom, double dt_seconds,
                                              std::optional<double> rate_unit_per_second) {
  CoarseGrainingReport rep;
  rep.dt_seconds = dt_seconds;
  const double unit = rate_unit_per_second.value_or(atom.rate_unit_per_second.value_or(1.0));

  double max_a = 0.0;
  for (const auto& ch : atom.decay_channels) max_a = std::max(max_a, ch.a_coeff);
  rep.max_rate_per_second = max_a * unit;
  rep.dt_times_rate = dt_seconds * rep.max_rate_per_second;

  rep.in_window = dt_seconds >= 1e-13 && dt_seconds <= 1e-10;
  rep.lifetime_ok = dt_seconds > 0.0 && rep.max_rate_per_second > 0.0 && rep.dt_times_rate <= 0.01;

  std::ostringstream os;
  os << "dt = " << dt_seconds << " s: "
     << (rep.in_window ? "inside" : "outside") << " [1e-13, 1e-10] s; "
     << "dt * max A = " << rep.dt_times_rate << (rep.lifetime_ok ? " <= 0.01" : " (needs <= 0.01)");
  if (rep.max_rate_per_second <= 0.0) os << "; no positive decay rate";
  rep.message = os.str();
  return rep;
}

AtomModel two_level(double a, double rabi, double detuning) {
  AtomModel atom;
  atom.level_labels = {"g", "e"};
  atom.decay_channels = {{1, 0, a}};
  atom.drives = {{1, 0, Complex{rabi, 0.0}, detuning}};
  atom.closed = a == 0.0;
  return atom;
}

AtomModel dehmelt_v(const DehmeltParams& p) {
  AtomModel atom;
  atom.level_labels = {"1", "2", "2'"};
  atom.decay_channels = {{1, 0, p.a_strong}, {2, 0, p.a_weak}};
  atom.drives = {{1, 0, Complex{p.rabi_strong, 0.0}, p.detuning_strong},
                 {2, 0, Complex{p.rabi_weak, 0.0}, p.detuning_weak}};
  return atom;
}

AtomModel lambda_system(double a0, double a1, double rabi0, double rabi1) {
  AtomModel atom;
  atom.level_labels = {"g0", "g1", "e"};
  atom.decay_channels = {{2, 0, a0}, {2, 1, a1}};
  if (rabi0 != 0.0) atom.drives.push_back({2, 0, Complex{rabi0, 0.0}, 0.0});
  if (rabi1 != 0.0) atom.drives.push_back({2, 1, Complex{rabi1, 0.0}, 0.0});
  return atom;
}

AtomModel subsystem(const AtomModel& atom, const std::vector<int>& keep) {
  atom.validate();
  const int n = atom.n_levels();
  std::vector<int> index(n, -1);
  AtomModel out;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const int lv = keep[k];
    if (!in_range(lv, n) || index[lv] >= 0)
      throw ConfigError("IndexOutOfRange", "subsystem: invalid or repeated level " + std::to_string(lv));
    index[lv] = static_cast<int>(k);
    out.level_labels.push_back(atom.level_labels[lv]);
  }
  for (const auto& ch : atom.decay_channels)
    if (index[ch.upper] >= 0 && index[ch.lower] >= 0)
      out.decay_channels.push_back({index[ch.upper], index[ch.lower], ch.a_coeff});
  for (const auto& d : atom.drives)
    if (index[d.upper] >= 0 && index[d.lower] >= 0)
      out.drives.push_back({index[d.upper], index[d.lower], d.rabi, d.detuning});
  out.cross_damping = atom.cross_damping;
  out.closed = atom.closed;
  out.rate_unit_per_second = atom.rate_unit_per_second;
  if (std::none_of(out.decay_channels.begin(), out.decay_channels.end(),
                   [](const DecayChannel& c) { return c.a_coeff > 0.0; }))
    out.closed = true;
  return out;
}

namespace {

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError("SchemaError", where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("SchemaError", where + ": unknown key \"" + key + "\"");
  }
}

template <class T>
T get_required(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("SchemaError", where + ": missing key \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("SchemaError", where + "." + key + ": wrong type");
  }
}

template <class T>
T get_or(const nlohmann::json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return get_required<T>(obj, key, where);
}

}  // namespace

AtomModel atom_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"levels", "channels", "drives", "cross_damping", "closed", "rate_unit_hz"}, "atom");
  AtomModel atom;

  if (!j.contains("levels")) throw ConfigError("SchemaError", "atom: missing key \"levels\"");
  const auto& levels = j.at("levels");
  if (!levels.is_array() || levels.empty()) throw ConfigError("SchemaError", "atom.levels: expected a non-empty array");
  for (const auto& l : levels) {
    if (l.is_string()) atom.level_labels.push_back(l.get<std::string>());
    else if (l.is_number_integer()) atom.level_labels.push_back(std::to_string(l.get<long long>()));
    else throw ConfigError("SchemaError", "atom.levels: labels must be strings or integers");
  }

  if (j.contains("channels")) {
    const auto& chans = j.at("channels");
    if (!chans.is_array()) throw ConfigError("SchemaError", "atom.channels: expected an array");
    for (std::size_t k = 0; k < chans.size(); ++k) {
      const std::string where = "atom.channels[" + std::to_string(k) + "]";
      reject_unknown(chans[k], {"upper", "lower", "A"}, where);
      atom.decay_channels.push_back({get_required<int>(chans[k], "upper", where),
                                     get_required<int>(chans[k], "lower", where),
                                     get_required<double>(chans[k], "A", where)});
    }
  }
  if (j.contains("drives")) {
    const auto& drives = j.at("drives");
    if (!drives.is_array()) throw ConfigError("SchemaError", "atom.drives: expected an array");
    for (std::size_t k = 0; k < drives.size(); ++k) {
      const std::string where = "atom.drives[" + std::to_string(k) + "]";
      reject_unknown(drives[k], {"upper", "lower", "rabi_re", "rabi_im", "detuning"}, where);
      DriveField d;
      d.upper = get_required<int>(drives[k], "upper", where);
      d.lower = get_required<int>(drives[k], "lower", where);
      d.rabi = Complex{get_or<double>(drives[k], "rabi_re", 0.0, where),
                       get_or<double>(drives[k], "rabi_im", 0.0, where)};
      d.detuning = get_or<double>(drives[k], "detuning", 0.0, where);
      atom.drives.push_back(d);
    }
  }
  atom.cross_damping = get_or<bool>(j, "cross_damping", false, "atom");
  atom.closed = get_or<bool>(j, "closed", false, "atom");
  if (j.contains("rate_unit_hz")) atom.rate_unit_per_second = get_required<double>(j, "rate_unit_hz", "atom");

  atom.validate();
  return atom;
}

nlohmann::json atom_to_json(const AtomModel& atom) {
  nlohmann::json j;
  j["levels"] = atom.level_labels;
  j["channels"] = nlohmann::json::array();
  for (const auto& ch : atom.decay_channels)
    j["channels"].push_back({{"upper", ch.upper}, {"lower", ch.lower}, {"A", ch.a_coeff}});
  j["drives"] = nlohmann::json::array();
  for (const auto& d : atom.drives)
    j["drives"].push_back({{"upper", d.upper},
                           {"lower", d.lower},
                           {"rabi_re", d.rabi.real()},
                           {"rabi_im", d.rabi.imag()},
                           {"detuning", d.detuning}});
  if (atom.cross_damping) j["cross_damping"] = true;
  if (atom.closed) j["closed"] = true;
  if (atom.rate_unit_per_second) j["rate_unit_hz"] = *atom.rate_unit_per_second;
  return j;
}

}  // namespace qjump
