#include "qjump/periods.hpp"

#include <cmath>

#include "qjump/dynamics.hpp"
#include "qjump/errors.hpp"
#include "qjump/master_equation.hpp"

namespace qjump {

std::string to_string(PeriodKind kind) { return kind == PeriodKind::Light ? "light" : "dark"; }

PeriodSegmentation classify_periods(const PhotonRecord& record, double t0, double min_light) {
  if (!(t0 > 0.0)) throw ConfigError("RangeError", "T0 must be positive");
  if (!(min_light >= 0.0)) throw ConfigError("RangeError", "T must be non-negative");
  const auto& d = record.detection_times;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] < 0.0 || d[i] > record.t_end || (i > 0 && !(d[i] > d[i - 1])))
      throw ConfigError("UnsortedRecord", "detection times must be strictly increasing within [0, t_end]");
  }

  PeriodSegmentation seg{t0, min_light, record.t_end, {}};
  auto& out = seg.segments;
  if (d.empty()) {
    if (record.t_end > 0.0) out.push_back({PeriodKind::Dark, 0.0, record.t_end, 0, false, true, 0.0});
    return seg;
  }

  double cursor = 0.0;
  std::size_t i = 0;
  while (i < d.size()) {
    std::size_t j = i;
    while (j + 1 < d.size() && d[j + 1] - d[j] < t0) ++j;

    const bool leading = (i == 0);
    if (d[i] > cursor) out.push_back({PeriodKind::Dark, cursor, d[i], 0, false, leading, 0.0});

    const double close = d[j] + t0;
    Segment light{PeriodKind::Light, d[i], std::min(close, record.t_end), static_cast<int>(j - i + 1), false, false,
                  d[j] - d[i]};
    // The start is only certain if a detection-free stretch of at least T0
    // precedes it inside the record.
    light.truncated = (leading && d[i] < t0) || close >= record.t_end;
    light.discarded = light.length() < min_light;
    out.push_back(light);

    cursor = light.t_end;
    i = j + 1;
  }
  if (cursor < record.t_end) out.push_back({PeriodKind::Dark, cursor, record.t_end, 0, false, true, 0.0});
  return seg;
}

namespace {

void accumulate(const PeriodSegmentation& seg, PeriodStats& st, double& dark_time, double& total_time,
                double& span_sum, long long& gap_count, double& complete_light_time, long long& complete_light_n) {
  total_time += seg.t_end;
  for (const auto& s : seg.segments) {
    if (s.kind == PeriodKind::Dark) {
      dark_time += s.length();
      if (!s.truncated) st.dark_durations.push_back(s.length());
    } else {
      span_sum += s.detection_span;
      gap_count += s.n_detections - 1;
      if (!s.truncated) {
        st.light_durations.push_back(s.length());
        complete_light_time += s.length();
        complete_light_n += s.n_detections;
      }
    }
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

PeriodStats pooled_period_stats(std::span<const PeriodSegmentation> segs) {
  PeriodStats st;
  double dark_time = 0.0, total_time = 0.0, span_sum = 0.0, light_time = 0.0;
  long long gap_count = 0, light_n = 0;
  for (const auto& seg : segs) accumulate(seg, st, dark_time, total_time, span_sum, gap_count, light_time, light_n);

  if (!st.dark_durations.empty()) st.mean_dark = mean_of(st.dark_durations);
  if (!st.light_durations.empty()) st.mean_light = mean_of(st.light_durations);
  st.dark_fraction = total_time > 0.0 ? dark_time / total_time : 0.0;
  if (gap_count > 0) st.mean_light_gap = span_sum / static_cast<double>(gap_count);
  st.light_detections = light_n;
  st.light_time = light_time;
  if (light_time > 0.0) st.light_photon_rate = static_cast<double>(light_n) / light_time;
  return st;
}

PeriodStats dark_period_stats(const PeriodSegmentation& seg) {
  return pooled_period_stats(std::span<const PeriodSegmentation>(&seg, 1));
}

std::vector<double> detection_gaps(const PhotonRecord& record) {
  std::vector<double> gaps;
  const auto& d = record.detection_times;
  for (std::size_t i = 1; i < d.size(); ++i) gaps.push_back(d[i] - d[i - 1]);
  return gaps;
}

Histogram waiting_time_histogram(const PhotonRecord& record, int bins) {
  if (record.detection_times.size() < 2) throw ConfigError("TooFewDetections", "need at least two detections");
  if (bins <= 0) throw ConfigError("RangeError", "bin count must be positive");
  const auto gaps = detection_gaps(record);
  const double top = *std::max_element(gaps.begin(), gaps.end());
  // All gaps equal (or a single gap): one bin of unit width around it.
  const double width = top > 0.0 ? top / bins : 1.0;

  Histogram h;
  h.n_samples = gaps.size();
  for (int b = 0; b <= bins; ++b) h.edges.push_back(b * width);
  std::vector<double> counts(bins, 0.0);
  for (double g : gaps) {
    const int b = std::min(bins - 1, static_cast<int>(g / width));
    counts[b] += 1.0;
  }
  for (double c : counts) h.density.push_back(c / (static_cast<double>(gaps.size()) * width));
  return h;
}

ErgodicityReport ergodicity_check(const AtomModel& atom, const CVector& psi0, double t_long, std::uint64_t seed) {
  if (!(t_long > 0.0)) throw ConfigError("RangeError", "t_long must be positive");
  const QuantumJumpEngine engine(atom);
  const auto times = simulate_detections(engine, psi0, t_long, seed);
  const CMatrix rho = steady_state(atom).rho;

  ErgodicityReport rep;
  rep.t_long = t_long;
  rep.n_jumps = static_cast<long long>(times.size());
  rep.time_rate = static_cast<double>(rep.n_jumps) / t_long;
  for (const auto& op : engine.jump_ops()) rep.ensemble_rate += (op.matrix.adjoint() * op.matrix * rho).trace().real();
  rep.sigma = std::sqrt(static_cast<double>(rep.n_jumps)) / t_long;

  if (rep.n_jumps == 0) {
    rep.ratio = rep.ensemble_rate == 0.0 ? 1.0 : 0.0;
    // Zero counts are consistent with an expected count below three.
    rep.within_3sigma = rep.ensemble_rate * t_long <= 3.0;
  } else {
    rep.ratio = rep.ensemble_rate > 0.0 ? rep.time_rate / rep.ensemble_rate : INFINITY;
    rep.within_3sigma = std::abs(rep.time_rate - rep.ensemble_rate) <= 3.0 * rep.sigma;
  }
  return rep;
}

}  // namespace qjump
