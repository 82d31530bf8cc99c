#pragma once

// Resonance-fluorescence spectra in the laser frame, Delta = w - w_L.
//
// For the selected radiating channels k the incoherent spectrum is
//   S(Delta) = (1/pi) Re int_0^inf f(tau) exp(i Delta tau) dtau,
//   f(tau)   = sum_k <C_k^dagger(0) C_k(tau)>_ss - |<C_k>_ss|^2,
// evaluated with the quantum regression theorem. The elastic (Rayleigh)
// part is the separate scalar sum_k |<C_k>_ss|^2, so that
//   int S dDelta + coherent_weight = total_power = sum_k <C_k^dagger C_k>_ss.
//
// f is sampled on an adaptive tau grid (exact propagation with exp(L h)),
// interpolated by cubic Hermite polynomials using the exact derivative
// f'(tau) = tr[C L X(tau)], and each panel is integrated against
// exp(i Delta tau) in closed form (Filon-type quadrature). The rule is exact
// in the oscillatory factor, so any Delta grid, uniform or not, is allowed.

#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "qjump/atom_model.hpp"
#include "qjump/types.hpp"

namespace qjump {

struct SpectrumResult {
  std::vector<double> delta;
  std::vector<double> incoherent;
  double coherent_weight = 0.0;
  double total_power = 0.0;
  double integrated_incoherent = 0.0;  // trapezoid over the grid
  double tau_max = 0.0;
};

struct SpectrumOptions {
  std::vector<int> channels;       // radiating channels; empty = all
  std::optional<double> tau_max;   // default: integrate until converged
  double convergence = 1e-6;       // |f(tau_max)| bound relative to f-scale g(0)
  double step_tol = 1e-9;          // Hermite interpolation error per panel, relative to g(0)
  int jobs = 1;
};

/// Correlation samples on the adaptive grid; f and its first derivative.
struct CorrelationSamples {
  std::vector<double> tau;
  std::vector<Complex> f;
  std::vector<Complex> df;
  double coherent_weight = 0.0;
  double total_power = 0.0;
};

/// Throws NoEmission when the selected channels carry no steady-state power,
/// CorrelationNotConverged when f has not decayed by tau_max (or by the
/// internal horizon when tau_max is not given).
CorrelationSamples sample_correlation(const AtomModel& atom, const SpectrumOptions& opts = {});

/// Filon-Hermite transform (1/pi) Re int f exp(i Delta tau) dtau for every
/// Delta. OpenMP over the Delta grid; the serial version is the reference.
std::vector<double> correlation_transform(const CorrelationSamples& samples, std::span<const double> delta_grid,
                                          int jobs);
std::vector<double> correlation_transform_serial(const CorrelationSamples& samples,
                                                 std::span<const double> delta_grid);

SpectrumResult emission_spectrum(const AtomModel& atom, std::span<const double> delta_grid,
                                 const SpectrumOptions& opts = {});

/// Closed-form resonance-fluorescence spectrum of a driven two-level atom
/// (Rabi |rabi|, decay a, detuning detuning), photon-flux normalization.
SpectrumResult mollow_oracle(double rabi, double a, double detuning, std::span<const double> delta_grid);

/// Indices of strict local maxima of the incoherent part.
std::vector<std::size_t> local_maxima(const SpectrumResult& s);

struct PeakDecomposition {
  // Lorentzians (amplitude / pi) * width / (width^2 + Delta^2); widths are HWHM.
  double broad_amplitude = 0.0;
  double broad_width = 0.0;
  double narrow_amplitude = 0.0;
  double narrow_width = 0.0;
  double coherent_weight = 0.0;
  double center_height = 0.0;  // S(0)
  double max_residual = 0.0;   // max |fit - S| over the fit grid, relative to S(0)
  bool narrow_present = false;

  double narrow_height() const {
    return narrow_width > 0.0 ? narrow_amplitude / (std::numbers::pi * narrow_width) : 0.0;
  }
};

/// Fits the line center of a resonant spectrum as broad + narrow Lorentzian
/// on a logarithmic Delta grid from 1e-6 to 0.5 times `rate_scale`. The
/// narrow component counts as present when it is at least ten times
/// narrower than the broad one and its height exceeds the largest absolute
/// fit residual. Throws FitFailure if that residual exceeds 5% of S(0).
PeakDecomposition decompose_center(const AtomModel& atom, double rate_scale, const SpectrumOptions& opts = {});

struct DehmeltSpectrum {
  SpectrumResult spectrum;
  PeakDecomposition decomposition;
};

/// Complete spectrum of the strong 1-2 line of the V system.
DehmeltSpectrum dehmelt_complete_spectrum(const DehmeltParams& preset, std::span<const double> delta_grid,
                                          int jobs = 1);

/// Light-period spectrum, approximated by the two-level subsystem {1, 2}
/// with the metastable level removed (the limit of a long light period).
DehmeltSpectrum light_period_spectrum(const DehmeltParams& preset, std::span<const double> delta_grid,
                                      int jobs = 1);

/// Uniform grid helper: n points on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, int n);

}  // namespace qjump
