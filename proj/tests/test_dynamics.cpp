#include "doctest.h"

#include <cmath>
#include <numbers>

#include "oracles/closed_forms.hpp"
#include "oracles/rk4.hpp"
#include "qjump/dynamics.hpp"
#include "qjump/errors.hpp"
#include "qjump/periods.hpp"
#include "qjump/propagator.hpp"

using namespace qjump;

namespace {

CMatrix two_level_h(double a, double w) {
  CMatrix h(2, 2);
  h << 0.0, w / 2, w / 2, Complex(0.0, -a / 2);
  return h;
}

}  // namespace

TEST_CASE("propagator agrees with RK4 away from and at the exceptional point") {
  for (double w : {0.3, 0.5, 1.0, 5.0}) {  // w = 0.5 is defective for A = 1
    const CMatrix h = two_level_h(1.0, w);
    const ConditionalPropagator prop(h);
    if (w == 0.5) CHECK_FALSE(prop.spectral());
    const CVector psi0 = basis_state(2, 0);
    for (double t : {0.1, 1.0, 4.0}) {
      const CVector ref = oracle::schrodinger(h, psi0, t, 1e-4);
      CHECK((prop.apply(psi0, t) - ref).norm() < 1e-9);
      CHECK((prop.orbit(psi0).at(t) - ref).norm() < 1e-9);
    }
  }
}

TEST_CASE("V-system propagator stays spectral and matches RK4") {
  const AtomModel atom = dehmelt_v({});
  const ConditionalPropagator prop(build_h_cond(atom));
  CHECK(prop.spectral());
  const CVector psi0 = basis_state(3, 0);
  const CVector ref = oracle::schrodinger(prop.generator(), psi0, 20.0, 1e-3);
  CHECK((prop.apply(psi0, 20.0) - ref).norm() < 1e-9);
}

TEST_CASE("free decay of the excited state") {
  const double a = 1.7;
  const CMatrix h = build_h_cond(two_level(a, 0.0));
  for (double t : {0.0, 0.3, 1.0, 5.0}) {
    const auto s = evolve_cond({basis_state(2, 1), 0.0}, h, t);
    CHECK(s.amplitudes.squaredNorm() == doctest::Approx(std::exp(-a * t)).epsilon(1e-9));
  }
  const auto half = evolve_cond({basis_state(2, 1), 0.0}, h, std::numbers::ln2 / a);
  CHECK(no_photon_probability(half) == doctest::Approx(0.5).epsilon(1e-9));

  const auto g = evolve_cond({basis_state(2, 0), 0.0}, h, 10.0);
  CHECK(g.amplitudes.squaredNorm() == doctest::Approx(1.0));
}

TEST_CASE("no_photon_probability is the squared norm, clamped") {
  CVector v(2);
  v << 0.6 * std::exp(-0.5), Complex(0.0, 0.8 * std::exp(-0.5));
  CHECK(no_photon_probability({v, 0.0}) == doctest::Approx(v.squaredNorm()));
  CHECK(no_photon_probability({basis_state(3, 2), 0.0}) == 1.0);
  CHECK(no_photon_probability({2.0 * basis_state(2, 0), 0.0}) == 1.0);
}

TEST_CASE("resonant drive: P0 against RK4 at tol 1e-8") {
  const CMatrix h = two_level_h(1.0, 1.0);
  for (double t : {0.5, 2.0, 7.0}) {
    const auto s = evolve_cond({basis_state(2, 0), 0.0}, h, t, 1e-8);
    const double ref = oracle::schrodinger(h, basis_state(2, 0), t, 1e-4).squaredNorm();
    CHECK(std::abs(s.amplitudes.squaredNorm() - ref) <= 1e-8 * ref);
  }
}

TEST_CASE("a growing norm is rejected") {
  CMatrix h = two_level_h(1.0, 1.0);
  h(1, 1) = Complex(0.0, 0.5);  // gain
  CHECK_THROWS_AS(evolve_cond({basis_state(2, 1), 0.0}, h, 1.0), NumericError);
}

TEST_CASE("waiting density") {
  SUBCASE("free decay") {
    const double a = 2.0;
    std::vector<double> t;
    for (int i = 0; i <= 400; ++i) t.push_back(i * 0.01);
    const auto wd = waiting_density(two_level(a, 0.0), basis_state(2, 1), t);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(wd.w1[i] == doctest::Approx(a * std::exp(-a * t[i])).epsilon(1e-9));
  }
  SUBCASE("ground state without drive") {
    const auto wd = waiting_density(two_level(1.0, 0.0), basis_state(2, 0), std::vector<double>{0.0, 1.0, 2.0});
    for (double w : wd.w1) CHECK(w == 0.0);
  }
  SUBCASE("Rabi 5A: closed form, mass balance, finite-difference slope") {
    const oracle::TwoLevelWaiting ref{1.0, 5.0};
    std::vector<double> t;
    for (int i = 0; i <= 20000; ++i) t.push_back(i * 1e-3);
    const auto wd = waiting_density(two_level(1.0, 5.0), basis_state(2, 0), t);
    double worst = 0.0, worst_fd = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      worst = std::max(worst, std::abs(wd.w1[i] - ref.density(t[i])));
      CHECK(wd.w1[i] >= -1e-9);
      if (i > 0 && i + 1 < t.size())
        worst_fd = std::max(worst_fd, std::abs(wd.w1[i] + (wd.p0[i + 1] - wd.p0[i - 1]) / (t[i + 1] - t[i - 1])));
    }
    CHECK(worst <= 1e-6);
    CHECK(worst_fd <= 1e-4);
    CHECK(std::abs(wd.mass_defect) <= 1e-6);
  }
}

TEST_CASE("jump-time inversion") {
  const double a = 1.3;
  const ConditionalPropagator prop(build_h_cond(two_level(a, 0.0)));
  const auto js = find_jump_time({basis_state(2, 1), 0.0}, prop, 0.5, 100.0);
  REQUIRE(js.t_jump);
  CHECK(std::abs(*js.t_jump - std::numbers::ln2 / a) <= 1e-8);

  // Ground state without drive never jumps.
  RandomStream rng(3);
  for (int i = 0; i < 20; ++i) CHECK_FALSE(sample_jump({basis_state(2, 0), 0.0}, prop, rng, 1e6).t_jump);

  // No crossing before t_max.
  CHECK_FALSE(find_jump_time({basis_state(2, 1), 0.0}, prop, 1e-3, 1.0).t_jump);
}

TEST_CASE("sampled jump times follow 1 - P0 (Rabi = A, 1e5 draws)") {
  const ConditionalPropagator prop(two_level_h(1.0, 1.0));
  const oracle::TwoLevelWaiting ref{1.0, 1.0};
  RandomStream rng(2024);
  std::vector<double> t;
  for (int i = 0; i < 100000; ++i) {
    const auto js = sample_jump({basis_state(2, 0), 0.0}, prop, rng, 1e9);
    REQUIRE(js.t_jump);
    t.push_back(*js.t_jump);
  }
  CHECK(ks_distance(t, [&](double x) { return ref.cdf(x); }) <= 0.01);
}

TEST_CASE("reset rule") {
  RandomStream rng(11);
  SUBCASE("two-level always lands in the ground state") {
    const auto ops = jump_operators(two_level(1.0, 1.0));
    CVector psi(2);
    psi << 0.3, Complex(0.0, 0.4);
    for (int i = 0; i < 100; ++i) {
      const auto r = reset_state({psi, 1.0}, ops, rng);
      CHECK(r.channel == 0);
      CHECK(std::abs(r.state.amplitudes(0)) == doctest::Approx(1.0));
      CHECK(r.state.t == 1.0);
    }
  }
  SUBCASE("V system with no weak amplitude picks the strong channel") {
    const auto ops = jump_operators(dehmelt_v({}));
    CVector psi(3);
    psi << 0.5, 0.5, 0.0;
    for (int i = 0; i < 100; ++i) CHECK(reset_state({psi, 0.0}, ops, rng).channel == 0);
  }
  SUBCASE("Lambda branching with equal rates") {
    const auto ops = jump_operators(lambda_system(1.0, 1.0));
    const int n = 100000;
    int first = 0;
    for (int i = 0; i < n; ++i) first += reset_state({basis_state(3, 2), 0.0}, ops, rng).channel == 0;
    CHECK(std::abs(first - n / 2.0) <= 3.0 * std::sqrt(n * 0.25));
  }
  SUBCASE("no decay path") {
    const auto ops = jump_operators(two_level(1.0, 1.0));
    CHECK_THROWS_AS(reset_state({basis_state(2, 0), 0.0}, ops, rng), NumericError);
  }
}

TEST_CASE("trajectory structure") {
  SUBCASE("undriven excited atom jumps exactly once") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto tr = simulate_trajectory(two_level(1.0, 0.0), basis_state(2, 1), 50.0, seed);
      REQUIRE(tr.jumps.size() == 1);
      CHECK(tr.jumps[0].post_state.isApprox(basis_state(2, 0)));
    }
  }
  SUBCASE("no decay path from the start: empty trajectory") {
    const auto tr = simulate_trajectory(two_level(1.0, 0.0), basis_state(2, 0), 50.0, 1);
    CHECK(tr.jumps.empty());
  }
  SUBCASE("bit-identical reruns, increasing jump times, unit post states, non-increasing sampled norms") {
    const QuantumJumpEngine engine(two_level(1.0, 3.0));
    TrajectoryOptions opts;
    for (int i = 0; i <= 2000; ++i) opts.sample_times.push_back(i * 0.01);
    const auto a = simulate_trajectory(engine, basis_state(2, 0), 20.0, 77, opts);
    const auto b = simulate_trajectory(engine, basis_state(2, 0), 20.0, 77, opts);
    REQUIRE(a.jumps.size() == b.jumps.size());
    REQUIRE(a.jumps.size() > 3);
    for (std::size_t k = 0; k < a.jumps.size(); ++k) {
      CHECK(a.jumps[k].t == b.jumps[k].t);
      CHECK(a.jumps[k].channel == b.jumps[k].channel);
      CHECK(std::abs(a.jumps[k].post_state.norm() - 1.0) < 1e-12);
      if (k > 0) CHECK(a.jumps[k].t > a.jumps[k - 1].t);
    }
    REQUIRE(a.samples.size() == opts.sample_times.size());
    std::size_t next_jump = 0;
    for (std::size_t i = 1; i < a.samples.size(); ++i) {
      bool jumped = false;
      while (next_jump < a.jumps.size() && a.jumps[next_jump].t <= a.samples[i].t) {
        jumped = jumped || a.jumps[next_jump].t > a.samples[i - 1].t;
        ++next_jump;
      }
      if (!jumped) CHECK(a.samples[i].norm2 <= a.samples[i - 1].norm2 * (1.0 + 1e-12));
      CHECK(std::abs(a.samples[i].state.norm() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("renewal gaps of the driven two-level atom follow w1 (1e5 jumps)") {
  const QuantumJumpEngine engine(two_level(1.0, 3.0));
  const oracle::TwoLevelWaiting ref{1.0, 3.0};
  const auto times = simulate_detections(engine, basis_state(2, 0), 2.2e5, 5);
  REQUIRE(times.size() > 100000);
  std::vector<double> gaps;
  double last = 0.0;
  for (double t : times) {
    gaps.push_back(t - last);
    last = t;
  }
  CHECK(ks_distance(gaps, [&](double x) { return ref.cdf(x); }) <= 0.01);
}

TEST_CASE("conditional density trace equals the conditional norm") {
  const CMatrix h = build_h_cond(two_level(1.0, 2.0, 0.3));
  CVector psi(2);
  psi << std::sqrt(0.3), Complex(0.0, std::sqrt(0.7));
  const CMatrix rho0 = psi * psi.adjoint();
  for (int i = 0; i < 100; ++i) {
    const double t = 0.05 * i;
    const double tr = evolve_conditional_density(rho0, h, t).rho0.trace().real();
    CHECK(std::abs(tr - evolve_cond({psi, 0.0}, h, t).amplitudes.squaredNorm()) <= 1e-10);
  }
  const CMatrix hd = build_h_cond(two_level(1.0, 0.0));
  const CMatrix mixed = CMatrix::Identity(2, 2) / 2.0;
  for (double t : {0.0, 0.5, 3.0}) {
    CHECK(evolve_conditional_density(basis_state(2, 1) * basis_state(2, 1).adjoint(), hd, t).rho0.trace().real() ==
          doctest::Approx(std::exp(-t)));
    CHECK(evolve_conditional_density(mixed, hd, t).rho0.trace().real() == doctest::Approx(0.5 * (1 + std::exp(-t))));
  }
}
