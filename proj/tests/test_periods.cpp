#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles/closed_forms.hpp"
#include "qjump/dynamics.hpp"
#include "qjump/errors.hpp"
#include "qjump/periods.hpp"

using namespace qjump;

namespace {

double total_length(const PeriodSegmentation& s) {
  double sum = 0.0;
  for (const auto& seg : s.segments) sum += seg.length();
  return sum;
}

void check_partition(const PeriodSegmentation& s) {
  REQUIRE_FALSE(s.segments.empty());
  CHECK(s.segments.front().t_start == 0.0);
  CHECK(s.segments.back().t_end == s.t_end);
  for (std::size_t i = 1; i < s.segments.size(); ++i) {
    CHECK(s.segments[i].t_start == s.segments[i - 1].t_end);
    CHECK(s.segments[i].kind != s.segments[i - 1].kind);
  }
  CHECK(total_length(s) == doctest::Approx(s.t_end).epsilon(1e-12));
}

}  // namespace

TEST_CASE("worked example: two bursts") {
  const auto s = classify_periods({{1, 2, 3, 60, 61}, 65}, 10.0, 0.0);
  check_partition(s);
  REQUIRE(s.segments.size() == 4);
  CHECK(s.segments[0].kind == PeriodKind::Dark);
  CHECK(s.segments[0].truncated);
  CHECK(s.segments[1].kind == PeriodKind::Light);
  CHECK(s.segments[1].t_start == 1.0);
  CHECK(s.segments[1].t_end == 13.0);
  CHECK(s.segments[1].n_detections == 3);
  CHECK(s.segments[1].truncated);  // fewer than T0 of silence before it
  CHECK(s.segments[2].kind == PeriodKind::Dark);
  CHECK(s.segments[2].t_start == 13.0);
  CHECK(s.segments[2].t_end == 60.0);
  CHECK_FALSE(s.segments[2].truncated);
  CHECK(s.segments[3].t_start == 60.0);
  CHECK(s.segments[3].t_end == 65.0);  // would close at 71
  CHECK(s.segments[3].truncated);
}

TEST_CASE("empty record and a single burst") {
  auto s = classify_periods({{}, 100}, 10.0, 0.0);
  REQUIRE(s.segments.size() == 1);
  CHECK(s.segments[0].kind == PeriodKind::Dark);
  CHECK(s.segments[0].length() == 100.0);

  PhotonRecord r;
  r.t_end = 100.0;
  for (int i = 0; i <= 100; ++i) r.detection_times.push_back(i);
  s = classify_periods(r, 2.0, 0.0);
  REQUIRE(s.segments.size() == 1);
  CHECK(s.segments[0].kind == PeriodKind::Light);
  CHECK(s.segments[0].n_detections == 101);
  const auto st = dark_period_stats(s);
  CHECK(st.dark_fraction == 0.0);
  CHECK_FALSE(st.mean_dark);
  CHECK(st.mean_light_gap == doctest::Approx(1.0));
}

TEST_CASE("gaps of T0 or more split light periods; short ones are discarded") {
  const auto s = classify_periods({{20, 21, 40, 41, 42, 80}, 200}, 10.0, 5.0);
  check_partition(s);
  std::vector<const Segment*> light;
  for (const auto& seg : s.segments)
    if (seg.kind == PeriodKind::Light) light.push_back(&seg);
  REQUIRE(light.size() == 3);
  CHECK(light[0]->length() == 11.0);
  CHECK(light[1]->length() == 12.0);
  CHECK(light[2]->length() == 10.0);
  // A dark segment starts T0 after the last detection, so the silent gap
  // around it is at least T0.
  for (std::size_t i = 1; i < s.segments.size(); ++i) {
    const auto& seg = s.segments[i];
    if (seg.kind != PeriodKind::Dark) continue;
    CHECK(seg.n_detections == 0);
    const auto& prev = s.segments[i - 1];
    CHECK(seg.t_end - (prev.t_start + prev.detection_span) >= s.t0_threshold);
  }
  const auto s2 = classify_periods({{20, 21, 40, 41, 42, 80}, 200}, 10.0, 11.5);
  int discarded = 0;
  for (const auto& seg : s2.segments) discarded += seg.discarded;
  CHECK(discarded == 2);
  CHECK(s2.segments.size() == s.segments.size());
}

TEST_CASE("within a light period every gap is below T0") {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> gap(0.2);
  PhotonRecord r;
  double t = 0.0;
  for (;;) {
    t += gap(rng);
    if (t > 1e4) break;
    r.detection_times.push_back(t);
  }
  r.t_end = 1e4;
  const auto s = classify_periods(r, 12.0, 0.0);
  check_partition(s);
  std::size_t k = 0;
  for (const auto& seg : s.segments) {
    if (seg.kind != PeriodKind::Light) continue;
    for (int i = 1; i < seg.n_detections; ++i)
      CHECK(r.detection_times[k + i] - r.detection_times[k + i - 1] < 12.0);
    if (k + seg.n_detections < r.detection_times.size())
      CHECK(r.detection_times[k + seg.n_detections] - r.detection_times[k + seg.n_detections - 1] >= 12.0);
    k += seg.n_detections;
  }
  CHECK(k == r.detection_times.size());
}

TEST_CASE("scale covariance") {
  const PhotonRecord r{{1.5, 2.0, 30.0, 31.0, 90.0}, 120.0};
  const double lambda = 3.25;
  PhotonRecord rs{{}, r.t_end * lambda};
  for (double t : r.detection_times) rs.detection_times.push_back(t * lambda);
  const auto a = classify_periods(r, 7.0, 2.0);
  const auto b = classify_periods(rs, 7.0 * lambda, 2.0 * lambda);
  REQUIRE(a.segments.size() == b.segments.size());
  for (std::size_t i = 0; i < a.segments.size(); ++i) {
    CHECK(b.segments[i].t_start == doctest::Approx(a.segments[i].t_start * lambda));
    CHECK(b.segments[i].t_end == doctest::Approx(a.segments[i].t_end * lambda));
    CHECK(b.segments[i].discarded == a.segments[i].discarded);
    CHECK(b.segments[i].truncated == a.segments[i].truncated);
  }
}

TEST_CASE("bad input") {
  CHECK_THROWS_AS(classify_periods({{2, 1}, 10}, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(classify_periods({{1, 1}, 10}, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(classify_periods({{11}, 10}, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(classify_periods({{1}, 10}, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(classify_periods({{1}, 10}, 1.0, -1.0), ConfigError);
  try {
    classify_periods({{2, 1}, 10}, 1.0, 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == "UnsortedRecord");
  }
}

TEST_CASE("dark statistics arithmetic") {
  // Dark periods of 5 and 15 between complete light periods.
  const auto s = classify_periods({{100, 101, 116, 117, 142, 143}, 200}, 10.0, 0.0);
  const auto st = dark_period_stats(s);
  REQUIRE(st.mean_dark);
  CHECK(st.dark_durations.size() == 2);
  CHECK(*st.mean_dark == doctest::Approx(10.0));
  REQUIRE(st.mean_light);
  CHECK(*st.mean_light == doctest::Approx(11.0));
  CHECK(st.dark_fraction == doctest::Approx((100.0 + 5.0 + 15.0 + 47.0) / 200.0));

  std::vector<PeriodSegmentation> two{s, s};
  const auto pooled = pooled_period_stats(two);
  CHECK(pooled.dark_durations.size() == 4);
  CHECK(*pooled.mean_dark == doctest::Approx(10.0));
}

TEST_CASE("waiting-time histogram") {
  SUBCASE("equal gaps fill one bin") {
    const auto h = waiting_time_histogram({{1, 2, 3, 4, 5}, 10}, 10);
    int occupied = 0;
    for (double d : h.density) occupied += d > 0;
    CHECK(occupied == 1);
    double mass = 0.0;
    for (std::size_t b = 0; b < h.density.size(); ++b) mass += h.density[b] * (h.edges[b + 1] - h.edges[b]);
    CHECK(mass == doctest::Approx(1.0));
  }
  SUBCASE("too few detections") {
    CHECK_THROWS_AS(waiting_time_histogram({{1}, 10}, 10), ConfigError);
  }
  SUBCASE("Poisson record gives exponential gaps") {
    std::mt19937_64 rng(99);
    const double rate = 2.5;
    std::exponential_distribution<double> gap(rate);
    PhotonRecord r;
    double t = 0.0;
    for (int i = 0; i < 100000; ++i) r.detection_times.push_back(t += gap(rng));
    r.t_end = t;
    CHECK(ks_distance(detection_gaps(r), [&](double x) { return 1 - std::exp(-rate * x); }) <= 0.02);
    const auto h = waiting_time_histogram(r, 50);
    CHECK(h.n_samples == 99999);
  }
  SUBCASE("two-level renewal record against the ground-state waiting law") {
    const oracle::TwoLevelWaiting ref{1.0, 3.0};
    const QuantumJumpEngine engine(two_level(1.0, 3.0));
    const auto times = simulate_detections(engine, basis_state(2, 0), 2.2e5, 808);
    PhotonRecord r{times, 2.2e5};
    REQUIRE(r.detection_times.size() > 100000);
    CHECK(ks_distance(detection_gaps(r), [&](double x) { return ref.cdf(x); }) <= 0.02);
  }
}

TEST_CASE("ergodicity") {
  SUBCASE("Rabi 3A over 1e5/A") {
    const auto rep = ergodicity_check(two_level(1.0, 3.0), basis_state(2, 0), 1e5, 1);
    CHECK(rep.ensemble_rate == doctest::Approx(oracle::emission_rate(3.0, 1.0)));
    CHECK(rep.within_3sigma);
    CHECK(std::abs(rep.ratio - 1.0) < 0.02);
  }
  SUBCASE("no drive from the ground state: both rates vanish") {
    const auto rep = ergodicity_check(two_level(1e-3, 0.0), basis_state(2, 0), 1e4, 1);
    CHECK(rep.n_jumps == 0);
    CHECK(rep.ensemble_rate == 0.0);
    CHECK(rep.ratio == 1.0);
    CHECK(rep.within_3sigma);
  }
  SUBCASE("two seeds agree within combined 3 sigma") {
    const auto a = ergodicity_check(two_level(1.0, 1.0, 0.5), basis_state(2, 0), 2e4, 10);
    const auto b = ergodicity_check(two_level(1.0, 1.0, 0.5), basis_state(2, 0), 2e4, 11);
    CHECK(std::abs(a.time_rate - b.time_rate) <= 3.0 * std::hypot(a.sigma, b.sigma));
  }
}
