#pragma once

#include "qjump/types.hpp"

namespace qjump {

/// Exact propagator U(t) = exp(-i H t) for a time-independent, generally
/// non-Hermitian generator H (the conditional Hamiltonian).
///
/// When H has a well-conditioned eigenbasis the action is evaluated
/// spectrally, U(t) = V exp(-i D t) V^-1, which costs O(n^2) per time point.
/// Near an exceptional point (defective H, e.g. a resonant two-level atom at
/// Rabi frequency A/2) the eigenbasis is ill-conditioned and evaluation
/// falls back to a Pade scaling-and-squaring matrix exponential.
class ConditionalPropagator {
 public:
  explicit ConditionalPropagator(CMatrix h, double tol = 1e-10);

  int dim() const { return static_cast<int>(h_.rows()); }
  const CMatrix& generator() const { return h_; }
  /// Gamma = i (H - H^dagger) / 2, the anti-Hermitian part of H up to -i.
  const CMatrix& damping() const { return gamma_; }
  /// Largest eigenvalue of the damping matrix (fastest norm decay rate / 2).
  double max_damping() const { return max_damping_; }
  bool spectral() const { return spectral_; }
  double eigenbasis_condition() const { return condition_; }

  CMatrix matrix(double t) const;
  CVector apply(const CVector& psi, double t) const;

  /// Evolution of a fixed initial vector, with the expansion coefficients
  /// precomputed so each time point costs one diagonal scaling.
  class Orbit {
   public:
    CVector at(double s) const;
    const CVector& start() const { return psi0_; }

   private:
    friend class ConditionalPropagator;
    const ConditionalPropagator* prop_ = nullptr;
    CVector psi0_;
    CVector coeffs_;
    mutable CVector work_;
  };

  Orbit orbit(const CVector& psi) const;

 private:
  CMatrix h_;
  CMatrix gamma_;
  double max_damping_ = 0.0;
  bool spectral_ = false;
  double condition_ = 0.0;
  CVector eigenvalues_;
  CMatrix v_;
  CMatrix v_inv_;
};

}  // namespace qjump
