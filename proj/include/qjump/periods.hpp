#pragma once

// Light/dark period analysis of a photon detection record.
//
// A light period is a run of detections whose consecutive gaps are all
// shorter than T0. It opens at its first detection and closes T0 after its
// last one; the dark period that follows starts there and ends at the next
// detection. Light periods shorter than T are flagged `discarded` (kept in
// the output so downstream consumers decide). The stretch before the first
// detection and whatever reaches t_end are flagged `truncated`.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qjump/atom_model.hpp"
#include "qjump/types.hpp"

namespace qjump {

struct PhotonRecord {
  std::vector<double> detection_times;
  double t_end = 0.0;
};

enum class PeriodKind { Light, Dark };

struct Segment {
  PeriodKind kind = PeriodKind::Dark;
  double t_start = 0.0;
  double t_end = 0.0;
  int n_detections = 0;
  bool discarded = false;
  bool truncated = false;
  // Light segments only: last detection minus first detection.
  double detection_span = 0.0;

  double length() const { return t_end - t_start; }
};

struct PeriodSegmentation {
  double t0_threshold = 0.0;
  double min_light_length = 0.0;
  double t_end = 0.0;
  std::vector<Segment> segments;
};

/// Throws UnsortedRecord if detection times are not strictly increasing or
/// exceed t_end, RangeError for T0 <= 0 or T < 0.
PeriodSegmentation classify_periods(const PhotonRecord& record, double t0, double min_light);

struct PeriodStats {
  std::optional<double> mean_dark;   // over complete dark segments
  std::optional<double> mean_light;  // over complete light segments
  double dark_fraction = 0.0;        // total dark time / t_end
  std::vector<double> dark_durations;
  std::vector<double> light_durations;
  // Photon gaps inside light periods (all light segments, truncated or not).
  std::optional<double> mean_light_gap;
  std::optional<double> light_photon_rate;  // detections per unit light time
  long long light_detections = 0;
  double light_time = 0.0;
};

PeriodStats dark_period_stats(const PeriodSegmentation& seg);

/// Pools several segmentations (independent runs) into one set of stats.
PeriodStats pooled_period_stats(std::span<const PeriodSegmentation> segs);

struct Histogram {
  std::vector<double> edges;    // size = counts + 1
  std::vector<double> density;  // normalized to unit mass
  std::size_t n_samples = 0;
};

/// Consecutive detection gaps.
std::vector<double> detection_gaps(const PhotonRecord& record);

/// Histogram of consecutive gaps over [0, max gap] with `bins` equal bins.
/// Throws TooFewDetections with fewer than two detections.
Histogram waiting_time_histogram(const PhotonRecord& record, int bins);

/// Kolmogorov-Smirnov distance between samples and a reference CDF.
template <class Cdf>
double ks_distance(std::vector<double> samples, Cdf&& cdf);

struct ErgodicityReport {
  double t_long = 0.0;
  long long n_jumps = 0;
  double time_rate = 0.0;      // n_jumps / t_long
  double ensemble_rate = 0.0;  // sum_k tr[C_k^dagger C_k rho_ss]
  double sigma = 0.0;          // sqrt(n_jumps) / t_long
  double ratio = 1.0;          // time_rate / ensemble_rate (1 when both vanish)
  bool within_3sigma = false;
};

ErgodicityReport ergodicity_check(const AtomModel& atom, const CVector& psi0, double t_long, std::uint64_t seed);

std::string to_string(PeriodKind kind);

// ---------------------------------------------------------------------------

template <class Cdf>
double ks_distance(std::vector<double> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

}  // namespace qjump
