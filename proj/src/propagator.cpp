#include "qjump/propagator.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "qjump/errors.hpp"

namespace qjump {

ConditionalPropagator::ConditionalPropagator(CMatrix h, double tol) : h_(std::move(h)) {
  if (h_.rows() != h_.cols() || h_.rows() == 0)
    throw NumericError("ShapeError", "propagator generator must be a non-empty square matrix");
  if (!h_.allFinite()) throw NumericError("StepFailure", "generator has non-finite entries");

  gamma_ = (kI * (h_ - h_.adjoint())) * 0.5;
  Eigen::SelfAdjointEigenSolver<CMatrix> gsolver(gamma_, Eigen::EigenvaluesOnly);
  max_damping_ = std::max(0.0, gsolver.eigenvalues().maxCoeff());

  Eigen::ComplexEigenSolver<CMatrix> solver(h_);
  if (solver.info() == Eigen::Success) {
    CMatrix v = solver.eigenvectors();
    for (Eigen::Index k = 0; k < v.cols(); ++k) v.col(k).normalize();
    Eigen::JacobiSVD<CMatrix> svd(v);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    condition_ = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
    // Spectral evaluation loses roughly condition * eps of relative accuracy.
    if (condition_ * std::numeric_limits<double>::epsilon() * 100.0 <= tol) {
      spectral_ = true;
      eigenvalues_ = solver.eigenvalues();
      v_ = v;
      v_inv_ = v.inverse();
    }
  }
}

CMatrix ConditionalPropagator::matrix(double t) const {
  if (spectral_) {
    CVector phases(eigenvalues_.size());
    for (Eigen::Index k = 0; k < phases.size(); ++k) phases(k) = std::exp(-kI * eigenvalues_(k) * t);
    return v_ * phases.asDiagonal() * v_inv_;
  }
  CMatrix arg = (-kI * t) * h_;
  CMatrix u = arg.exp();
  if (!u.allFinite()) throw NumericError("StepFailure", "matrix exponential overflowed");
  return u;
}

CVector ConditionalPropagator::apply(const CVector& psi, double t) const {
  if (spectral_) return orbit(psi).at(t);
  return matrix(t) * psi;
}

ConditionalPropagator::Orbit ConditionalPropagator::orbit(const CVector& psi) const {
  Orbit o;
  o.prop_ = this;
  o.psi0_ = psi;
  if (spectral_) {
    o.coeffs_ = v_inv_ * psi;
    o.work_.resize(psi.size());
  }
  return o;
}

CVector ConditionalPropagator::Orbit::at(double s) const {
  if (!prop_->spectral_) return prop_->matrix(s) * psi0_;
  const auto& lambda = prop_->eigenvalues_;
  for (Eigen::Index k = 0; k < coeffs_.size(); ++k) {
    // exp(-i lambda s) with Im(lambda) <= 0 never overflows.
    const Complex z = -kI * lambda(k) * s;
    work_(k) = coeffs_(k) * std::exp(z.real()) * Complex{std::cos(z.imag()), std::sin(z.imag())};
  }
  return prop_->v_ * work_;
}

}  // namespace qjump
