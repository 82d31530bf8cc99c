#include "doctest.h"

#include <random>

#include "qjump/atom_model.hpp"
#include "qjump/dynamics.hpp"
#include "qjump/errors.hpp"

using namespace qjump;

namespace {

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

template <class F>
std::string error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

}  // namespace

TEST_CASE("two-level damping and conditional Hamiltonian") {
  const double a = 0.7, w = 1.3;
  const AtomModel atom = two_level(a, w);
  const CMatrix g = build_gamma(atom);
  CHECK(max_abs(g - CMatrix{{0.0, 0.0}, {0.0, a / 2}}) == 0.0);

  CMatrix expect(2, 2);
  expect << 0.0, w / 2, w / 2, Complex(0.0, -a / 2);
  CHECK(max_abs(build_h_cond(atom) - expect) < 1e-15);
}

TEST_CASE("no channels gives zero damping") {
  AtomModel atom = AtomModel::with_levels(3);
  atom.closed = true;
  CHECK(build_gamma(atom).isZero(0.0));
}

TEST_CASE("undriven, undamped model is Hermitian with detuning on the diagonal") {
  AtomModel atom = two_level(0.0, 0.0, 0.4);
  CHECK(atom.closed);
  const CMatrix h = build_h_cond(atom);
  CHECK(max_abs(h - h.adjoint()) == 0.0);
  CHECK(h(1, 1).real() == doctest::Approx(-0.4));
}

TEST_CASE("V system damping by hand") {
  DehmeltParams p;
  p.a_weak = 0.01;
  const AtomModel atom = dehmelt_v(p);
  const CMatrix g = build_gamma(atom);
  CMatrix expect = CMatrix::Zero(3, 3);
  expect(1, 1) = p.a_strong / 2;
  expect(2, 2) = p.a_weak / 2;
  CHECK(max_abs(g - expect) == 0.0);

  const CMatrix h = build_h_cond(atom);
  CHECK(h(1, 1) == Complex(0.0, -p.a_strong / 2));
  CHECK(h(1, 0) == Complex(p.rabi_strong / 2, 0.0));
  CHECK(h(2, 0) == Complex(p.rabi_weak / 2, 0.0));
  CHECK(h(2, 1) == Complex(0.0, 0.0));
}

TEST_CASE("cross damping couples channels sharing a lower level") {
  AtomModel atom = AtomModel::with_levels(3);
  atom.decay_channels = {{1, 0, 0.5}, {2, 0, 2.0}};
  atom.cross_damping = true;
  const CMatrix g = build_gamma(atom);
  CHECK(g(1, 2).real() == doctest::Approx(0.5 * std::sqrt(0.5 * 2.0)));
  CHECK(g(2, 1).real() == doctest::Approx(0.5));
  CHECK(jump_operators(atom).size() == 1);
}

TEST_CASE("damping is Hermitian PSD and equals half the sum of C^dagger C (random models)") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    AtomModel atom = AtomModel::with_levels(n);
    atom.cross_damping = trial % 2 == 1;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && rng() % 3 == 0) atom.decay_channels.push_back({i, j, u(rng)});
    if (atom.decay_channels.empty()) atom.decay_channels.push_back({1, 0, 1.0});
    atom.drives.push_back({1, 0, Complex(u(rng), u(rng)), u(rng) - 1.0});

    const CMatrix g = build_gamma(atom);
    const double scale = std::max(1.0, g.norm());
    CHECK(max_abs(g - g.adjoint()) <= 1e-12 * scale);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * scale);

    CMatrix sum = CMatrix::Zero(n, n);
    for (const auto& op : jump_operators(atom)) sum += 0.5 * op.matrix.adjoint() * op.matrix;
    CHECK(max_abs(sum - g) <= 1e-12);

    const CMatrix h = build_h_cond(atom);
    CHECK(max_abs((h - h.adjoint()) / 2.0 - (-kI * g)) <= 1e-15 * scale);
  }
}

TEST_CASE("a zero-rate channel changes nothing") {
  AtomModel a = two_level(1.0, 2.0);
  a.level_labels.push_back("x");
  AtomModel b = a;
  b.decay_channels.push_back({2, 0, 0.0});
  CHECK(max_abs(build_gamma(a) - build_gamma(b)) == 0.0);
  CHECK(max_abs(build_h_cond(a) - build_h_cond(b)) == 0.0);
}

TEST_CASE("validation errors") {
  AtomModel base = two_level(1.0, 1.0);
  auto with = [&](auto mutate) {
    AtomModel m = base;
    mutate(m);
    return error_code([&] { build_gamma(m); });
  };
  CHECK(with([](AtomModel& m) { m.decay_channels[0].upper = 5; }) == "IndexOutOfRange");
  CHECK(with([](AtomModel& m) { m.decay_channels[0].lower = 1; }) == "IndexOutOfRange");
  CHECK(with([](AtomModel& m) { m.decay_channels[0].a_coeff = -1.0; }) == "NegativeRate");
  CHECK(with([](AtomModel& m) { m.decay_channels.push_back({1, 0, 2.0}); }) == "DuplicateChannel");
  CHECK(with([](AtomModel& m) { m.decay_channels[0].a_coeff = 0.0; }) == "NoDecay");
  CHECK(with([](AtomModel& m) { m.drives[0].detuning = NAN; }) == "NonFinite");
  CHECK(with([](AtomModel& m) { m.drives[0].upper = 0; }) == "IndexOutOfRange");
  CHECK(with([](AtomModel&) {}) == "none");
}

TEST_CASE("coarse-graining report") {
  AtomModel atom = two_level(1.0, 0.0);
  atom.rate_unit_per_second = 1e8;
  auto r = validate_coarse_graining(atom, 1e-11);
  CHECK(r.in_window);
  CHECK(r.lifetime_ok);
  CHECK(r.dt_times_rate == doctest::Approx(1e-3));
  CHECK(r.pass());

  r = validate_coarse_graining(atom, 1e-9);
  CHECK_FALSE(r.in_window);
  CHECK_FALSE(r.pass());

  r = validate_coarse_graining(atom, 1e-10, 1e9);
  CHECK(r.in_window);
  CHECK_FALSE(r.lifetime_ok);
  CHECK(r.dt_times_rate == doctest::Approx(0.1));
}

TEST_CASE("JSON round trip and schema errors") {
  AtomModel atom = dehmelt_v({});
  atom.drives[0].rabi = Complex(0.3, -0.2);
  atom.rate_unit_per_second = 1e8;
  const AtomModel back = atom_from_json(atom_to_json(atom));
  CHECK(back.level_labels == atom.level_labels);
  CHECK(max_abs(build_h_cond(back) - build_h_cond(atom)) == 0.0);
  CHECK(back.rate_unit_per_second == atom.rate_unit_per_second);

  auto j = atom_to_json(atom);
  j["omega_typo"] = 1;
  CHECK(error_code([&] { atom_from_json(j); }) == "SchemaError");
  j = atom_to_json(atom);
  j["channels"][0]["A"] = "fast";
  CHECK(error_code([&] { atom_from_json(j); }) == "SchemaError");
  j = atom_to_json(atom);
  j["channels"][0]["A"] = -1.0;
  CHECK(error_code([&] { atom_from_json(j); }) == "NegativeRate");
}

TEST_CASE("subsystem keeps only internal channels and drives") {
  const AtomModel v = dehmelt_v({});
  const AtomModel s = subsystem(v, {0, 1});
  CHECK(s.n_levels() == 2);
  CHECK(s.decay_channels.size() == 1);
  CHECK(s.drives.size() == 1);
  CHECK(max_abs(build_h_cond(s) - build_h_cond(two_level(1.0, 0.5))) == 0.0);

  const AtomModel dark = subsystem(v, {2});
  CHECK(dark.closed);
  CHECK(error_code([&] { subsystem(v, {0, 0}); }) == "IndexOutOfRange");
}
