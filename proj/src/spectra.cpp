#include "qjump/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "qjump/dynamics.hpp"
#include "qjump/errors.hpp"
#include "qjump/master_equation.hpp"

namespace qjump {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMaxPanels = 4'000'000;

std::vector<JumpOperator> selected_ops(const AtomModel& atom, const std::vector<int>& channels) {
  auto ops = jump_operators(atom);
  if (channels.empty()) return ops;
  std::vector<JumpOperator> out;
  for (int c : channels) {
    if (c < 0 || c >= static_cast<int>(ops.size()))
      throw ConfigError("IndexOutOfRange", "radiating channel index out of range");
    out.push_back(ops[c]);
  }
  return out;
}

// m_k = int_0^1 u^k exp(i theta u) du, k = 0..3.
void filon_moments(double theta, Complex e, Complex m[4]) {
  if (std::abs(theta) < 1.0) {
    Complex term{1.0, 0.0};  // (i theta)^j / j!
    for (int k = 0; k < 4; ++k) m[k] = 0.0;
    for (int j = 0; j < 40; ++j) {
      for (int k = 0; k < 4; ++k) m[k] += term / static_cast<double>(j + k + 1);
      term *= kI * theta / static_cast<double>(j + 1);
      if (std::abs(term) < 1e-18) break;
    }
    return;
  }
  const Complex inv = 1.0 / (kI * theta);
  m[0] = (e - 1.0) * inv;
  m[1] = (e - m[0]) * inv;
  m[2] = (e - 2.0 * m[1]) * inv;
  m[3] = (e - 3.0 * m[2]) * inv;
}

double transform_one(const CorrelationSamples& s, double delta) {
  Complex acc{0.0, 0.0};
  Complex phase{1.0, 0.0};
  const std::size_t panels = s.tau.empty() ? 0 : s.tau.size() - 1;
  for (std::size_t j = 0; j < panels; ++j) {
    if (j % 32 == 0) phase = std::polar(1.0, delta * s.tau[j]);
    const double h = s.tau[j + 1] - s.tau[j];
    const double theta = delta * h;
    const Complex e = std::polar(1.0, theta);
    Complex m[4];
    filon_moments(theta, e, m);

    const Complex f0 = s.f[j], f1 = s.f[j + 1];
    const Complex d0 = h * s.df[j], d1 = h * s.df[j + 1];
    const Complex c2 = -3.0 * f0 - 2.0 * d0 + 3.0 * f1 - d1;
    const Complex c3 = 2.0 * f0 + d0 - 2.0 * f1 + d1;
    acc += h * phase * (f0 * m[0] + d0 * m[1] + c2 * m[2] + c3 * m[3]);
    phase *= e;
  }
  return acc.real() / kPi;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) sum += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return sum;
}

}  // namespace

CorrelationSamples sample_correlation(const AtomModel& atom, const SpectrumOptions& opts) {
  const CMatrix l = build_liouvillian(atom).liouvillian;
  const CMatrix rho = steady_state(atom).rho;
  const auto ops = selected_ops(atom, opts.channels);

  CorrelationSamples out;
  std::vector<CVector> x, x_inf, probe;
  std::vector<double> probe_norm;
  for (const auto& op : ops) {
    const CMatrix& c = op.matrix;
    const Complex mean_c = (c * rho).trace();
    out.coherent_weight += std::norm(mean_c);
    out.total_power += (c.adjoint() * c * rho).trace().real();
    const CMatrix start = rho * c.adjoint();
    x.push_back(vectorize(start));
    x_inf.push_back(start.trace() * vectorize(rho));
    probe.push_back(vectorize(c.transpose()));
    probe_norm.push_back(c.norm());
  }
  if (!(out.total_power > 1e-300))
    throw NumericError("NoEmission", "selected channels carry no steady-state emission");
  const double scale = out.total_power;

  auto record = [&](double tau) {
    Complex f{-out.coherent_weight, 0.0}, df{0.0, 0.0};
    for (std::size_t k = 0; k < x.size(); ++k) {
      f += probe[k].cwiseProduct(x[k]).sum();
      df += probe[k].cwiseProduct(l * x[k]).sum();
    }
    out.tau.push_back(tau);
    out.f.push_back(f);
    out.df.push_back(df);
  };
  auto residual = [&]() {
    double r = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) r += probe_norm[k] * (x[k] - x_inf[k]).norm();
    return r;
  };
  auto fourth_derivative_bound = [&]() {
    double m4 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) m4 += probe_norm[k] * (l * (l * (l * (l * x[k])))).norm();
    return m4;
  };

  std::map<int, CMatrix> step_cache;  // exp(L 2^e)
  auto propagate = [&](double h, int exponent, bool exact_power) {
    const CMatrix* step = nullptr;
    CMatrix custom;
    if (exact_power) {
      auto it = step_cache.find(exponent);
      if (it == step_cache.end()) {
        const CMatrix arg = l * h;
        it = step_cache.emplace(exponent, arg.exp()).first;
      }
      step = &it->second;
    } else {
      const CMatrix arg = l * h;
      custom = arg.exp();
      step = &custom;
    }
    for (auto& xk : x) xk = (*step) * xk;
  };

  double tau = 0.0;
  record(tau);
  const double target_err = opts.step_tol * scale;
  for (;;) {
    const bool done_auto = !opts.tau_max && residual() <= opts.convergence * scale;
    const bool done_fixed = opts.tau_max && tau >= *opts.tau_max;
    if (done_auto || done_fixed) break;
    if (out.tau.size() > kMaxPanels)
      throw NumericError("CorrelationNotConverged", "correlation did not decay within the panel budget");

    const double m4 = fourth_derivative_bound();
    const double h_target = m4 > 0.0 ? std::pow(384.0 * target_err / m4, 0.25) : 1e6;
    int exponent = static_cast<int>(std::floor(std::log2(h_target)));
    exponent = std::clamp(exponent, -40, 40);
    double h = std::ldexp(1.0, exponent);
    bool exact_power = true;
    if (opts.tau_max && tau + h > *opts.tau_max) {
      h = *opts.tau_max - tau;
      exact_power = false;
    }
    propagate(h, exponent, exact_power);
    tau = exact_power ? tau + h : *opts.tau_max;
    record(tau);
  }
  if (opts.tau_max && residual() > opts.convergence * scale)
    throw NumericError("CorrelationNotConverged",
                       "correlation has not decayed to the required level by tau_max = " + std::to_string(*opts.tau_max));
  return out;
}

std::vector<double> correlation_transform_serial(const CorrelationSamples& samples,
                                                 std::span<const double> delta_grid) {
  std::vector<double> out(delta_grid.size());
  for (std::size_t i = 0; i < delta_grid.size(); ++i) out[i] = transform_one(samples, delta_grid[i]);
  return out;
}

std::vector<double> correlation_transform(const CorrelationSamples& samples, std::span<const double> delta_grid,
                                          int jobs) {
  std::vector<double> out(delta_grid.size());
  const long long n = static_cast<long long>(delta_grid.size());
#pragma omp parallel for schedule(static) num_threads(std::max(1, jobs))
  for (long long i = 0; i < n; ++i) out[i] = transform_one(samples, delta_grid[i]);
  return out;
}

SpectrumResult emission_spectrum(const AtomModel& atom, std::span<const double> delta_grid,
                                 const SpectrumOptions& opts) {
  const auto samples = sample_correlation(atom, opts);
  SpectrumResult res;
  res.delta.assign(delta_grid.begin(), delta_grid.end());
  res.incoherent = correlation_transform(samples, delta_grid, opts.jobs);
  res.coherent_weight = samples.coherent_weight;
  res.total_power = samples.total_power;
  res.integrated_incoherent = trapezoid(res.delta, res.incoherent);
  res.tau_max = samples.tau.back();
  return res;
}

// Derived once from the regression theorem on the two-level Bloch system:
// with D = A^2 + 2 W^2 + 4 d^2 and s the Laplace variable,
//   F(s) = 4 A W^4 (2 A^2 + 4 A s + W^2 + 2 s^2)
//          / ( D^2 (4 s^3 + 8 A s^2 + (5 A^2 + 4 W^2 + 4 d^2) s + A (A^2 + 2 W^2 + 4 d^2)) )
// is the transform of f(tau), and S(Delta) = Re F(-i Delta) / pi. At
// resonance this reduces to the familiar real form
//   S = 4 A^2 W^4 (2A^2 + 2Delta^2 + W^2)
//       / (pi (A^2 + 4Delta^2)(A^2 + 2W^2)(A^4 + 5A^2Delta^2 + 4A^2W^2 + 4Delta^4 - 8Delta^2W^2 + 4W^4)).
// Steady state: rho_ee = W^2 / D, |<sigma>|^2 A = A W^2 (A^2 + 4 d^2) / D^2.
SpectrumResult mollow_oracle(double rabi, double a, double detuning, std::span<const double> delta_grid) {
  if (!(a > 0.0)) throw ConfigError("RangeError", "mollow_oracle needs a positive decay rate");
  const double w2 = rabi * rabi;
  const double d2 = detuning * detuning;
  const double big_d = a * a + 2.0 * w2 + 4.0 * d2;

  SpectrumResult res;
  res.delta.assign(delta_grid.begin(), delta_grid.end());
  for (double delta : delta_grid) {
    const Complex s = -kI * delta;
    const Complex num = 4.0 * a * w2 * w2 * (2.0 * a * a + 4.0 * a * s + w2 + 2.0 * s * s);
    const Complex den = big_d * big_d *
                        (4.0 * s * s * s + 8.0 * a * s * s + (5.0 * a * a + 4.0 * w2 + 4.0 * d2) * s + a * big_d);
    res.incoherent.push_back((num / den).real() / kPi);
  }
  res.total_power = a * w2 / big_d;
  res.coherent_weight = a * w2 * (a * a + 4.0 * d2) / (big_d * big_d);
  res.integrated_incoherent = trapezoid(res.delta, res.incoherent);
  return res;
}

std::vector<std::size_t> local_maxima(const SpectrumResult& s) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i + 1 < s.incoherent.size(); ++i)
    if (s.incoherent[i] > s.incoherent[i - 1] && s.incoherent[i] > s.incoherent[i + 1]) idx.push_back(i);
  return idx;
}

namespace {

// Sum of Lorentzians centred at zero, parameters stored as logs
// (log amplitude, log width) per component; residuals are relative.
struct LorentzFit {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const std::vector<double>* delta = nullptr;
  const std::vector<double>* value = nullptr;
  int n_params = 4;

  int inputs() const { return n_params; }
  int values() const { return static_cast<int>(delta->size()); }

  static double model(const Eigen::VectorXd& p, double d) {
    double s = 0.0;
    for (Eigen::Index c = 0; c + 1 < p.size(); c += 2) {
      const double amp = std::exp(p(c)), w = std::exp(p(c + 1));
      s += amp / kPi * w / (w * w + d * d);
    }
    return s;
  }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& fvec) const {
    for (std::size_t i = 0; i < delta->size(); ++i) {
      const double y = (*value)[i];
      fvec(static_cast<Eigen::Index>(i)) = (model(p, (*delta)[i]) - y) / y;
    }
    return 0;
  }
};

Eigen::VectorXd fit_lorentzians(const std::vector<double>& delta, const std::vector<double>& value,
                                Eigen::VectorXd start) {
  LorentzFit f;
  f.delta = &delta;
  f.value = &value;
  f.n_params = static_cast<int>(start.size());
  Eigen::NumericalDiff<LorentzFit> numdiff(f);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LorentzFit>> lm(numdiff);
  lm.parameters.maxfev = 4000;
  lm.parameters.xtol = 1e-12;
  lm.parameters.ftol = 1e-12;
  lm.minimize(start);
  return start;
}

double max_abs_residual(const Eigen::VectorXd& p, const std::vector<double>& delta, const std::vector<double>& value) {
  double r = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) r = std::max(r, std::abs(LorentzFit::model(p, delta[i]) - value[i]));
  return r;
}

// First grid point (ascending delta) where value drops below `level`.
double crossing(const std::vector<double>& delta, const std::vector<double>& value, double level) {
  for (std::size_t i = 0; i < delta.size(); ++i)
    if (value[i] <= level) return delta[i];
  return delta.back();
}

}  // namespace

PeakDecomposition decompose_center(const AtomModel& atom, double rate_scale, const SpectrumOptions& opts) {
  if (!(rate_scale > 0.0)) throw ConfigError("RangeError", "rate scale must be positive");
  std::vector<double> grid{0.0};
  constexpr int kPoints = 180;
  // Beyond about half the rate scale the broad part stops looking Lorentzian.
  const double top = std::log10(0.5);
  for (int i = 0; i < kPoints; ++i) {
    const double x = -6.0 + (top + 6.0) * i / (kPoints - 1);
    grid.push_back(rate_scale * std::pow(10.0, x));
  }
  const SpectrumResult spec = emission_spectrum(atom, grid, opts);

  // Points with a meaningful positive density only.
  const double s0 = spec.incoherent.front();
  if (!(s0 > 0.0)) throw NumericError("FitFailure", "spectrum has no positive line center");
  std::vector<double> d, v;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (spec.incoherent[i] > 1e-9 * s0) {
      d.push_back(grid[i]);
      v.push_back(spec.incoherent[i]);
    }
  }

  // Starting guesses from half-maximum crossings.
  const double w_center = std::max(crossing(d, v, 0.5 * s0), 1e-6 * rate_scale);
  const double probe = std::sqrt(w_center * rate_scale);
  double plateau = v.back();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] >= probe) {
      plateau = v[i];
      break;
    }
  const double w_broad = std::max(crossing(d, v, 0.5 * plateau), 2.0 * w_center);

  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::VectorXd p(4);
    const double narrow_amp = std::max(kPi * w_center * (s0 - plateau), 1e-6 * kPi * w_broad * plateau);
    p << std::log(kPi * w_broad * plateau), std::log(w_broad), std::log(narrow_amp), std::log(w_center);
    starts.push_back(p);
  }
  {
    Eigen::VectorXd p(4);
    p << std::log(kPi * w_center * s0), std::log(w_center), std::log(1e-3 * kPi * w_center * s0),
        std::log(0.01 * w_center);
    starts.push_back(p);
  }
  {
    Eigen::VectorXd p(4);
    p << std::log(0.5 * kPi * w_center * s0), std::log(w_center), std::log(0.5 * kPi * w_center * s0),
        std::log(3.0 * w_center);
    starts.push_back(p);
  }

  Eigen::VectorXd best;
  double best_res = INFINITY;
  for (const auto& s : starts) {
    const Eigen::VectorXd p = fit_lorentzians(d, v, s);
    if (!p.allFinite()) continue;
    const double r = max_abs_residual(p, d, v);
    if (r < best_res) {
      best_res = r;
      best = p;
    }
  }
  if (best.size() == 0) throw NumericError("FitFailure", "line-center fit did not converge");

  PeakDecomposition out;
  double a1 = std::exp(best(0)), w1 = std::exp(best(1)), a2 = std::exp(best(2)), w2 = std::exp(best(3));
  if (w2 > w1) {
    std::swap(a1, a2);
    std::swap(w1, w2);
  }
  out.broad_amplitude = a1;
  out.broad_width = w1;
  out.narrow_amplitude = a2;
  out.narrow_width = w2;
  out.coherent_weight = spec.coherent_weight;
  out.center_height = s0;
  out.max_residual = best_res / s0;
  if (out.max_residual > 0.05)
    throw NumericError("FitFailure", "line-center fit residual exceeds 5% of the center height");
  out.narrow_present = out.narrow_width < 0.1 * out.broad_width && out.narrow_height() > best_res;
  return out;
}

DehmeltSpectrum dehmelt_complete_spectrum(const DehmeltParams& preset, std::span<const double> delta_grid, int jobs) {
  const AtomModel atom = dehmelt_v(preset);
  SpectrumOptions opts;
  opts.channels = {0};
  opts.jobs = jobs;
  return {emission_spectrum(atom, delta_grid, opts), decompose_center(atom, preset.a_strong, opts)};
}

DehmeltSpectrum light_period_spectrum(const DehmeltParams& preset, std::span<const double> delta_grid, int jobs) {
  const AtomModel atom = two_level(preset.a_strong, preset.rabi_strong, preset.detuning_strong);
  SpectrumOptions opts;
  opts.channels = {0};
  opts.jobs = jobs;
  return {emission_spectrum(atom, delta_grid, opts), decompose_center(atom, preset.a_strong, opts)};
}

std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> g;
  if (n == 1) return {lo};
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

}  // namespace qjump
