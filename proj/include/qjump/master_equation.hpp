#pragma once

// Ensemble description: the Lindblad (optical Bloch) master equation
//   d rho/dt = -i [H_A, rho] + sum_k ( C_k rho C_k^dagger - 1/2 {C_k^dagger C_k, rho} )
// in dense vectorized form. Matrices are vectorized column by column, so
// vec(X Y Z) = (Z^T kron X) vec(Y).

#include <cstdint>
#include <span>
#include <vector>

#include "qjump/atom_model.hpp"
#include "qjump/types.hpp"

namespace qjump {

struct DensityMatrix {
  CMatrix rho;
  double t = 0.0;
};

struct Superoperator {
  CMatrix liouvillian;  // n^2 x n^2
  int n = 0;
};

CVector vectorize(const CMatrix& m);
CMatrix unvectorize(const CVector& v, int n);

Superoperator build_liouvillian(const AtomModel& atom);

/// Generator of rho -> U_cond rho U_cond^dagger, i.e. the Liouvillian without
/// the C rho C^dagger feeding terms.
CMatrix conditional_generator(const AtomModel& atom);

struct DensityCheck {
  double hermiticity = 0.0;  // |rho - rho^dagger| / max(1, |rho|)
  double trace_error = 0.0;  // |tr rho - 1|
  double min_eigenvalue = 0.0;
};

DensityCheck check_density(const CMatrix& rho);

/// Density matrices at each time of `t_grid` (starting from rho0 at t = 0).
/// Propagation uses the exact exponential of the Liouvillian per grid
/// interval. Throws StepFailure when an output drifts from unit trace by more
/// than `tol` or violates Hermiticity (1e-10) / positivity (-1e-8).
std::vector<DensityMatrix> solve_master(const AtomModel& atom, const CMatrix& rho0,
                                        std::span<const double> t_grid, double tol = 1e-8);

/// Unique stationary state from the null space of the Liouvillian.
/// Throws DegenerateSteadyState if the null space is not one-dimensional.
DensityMatrix steady_state(const AtomModel& atom);

/// g(tau) = tr[A exp(L tau)(B rho_ss)] = <A(tau) B(0)> in the steady state.
std::vector<Complex> two_time_correlation(const AtomModel& atom, const CMatrix& op_a, const CMatrix& op_b,
                                          std::span<const double> tau_grid);

/// Half the trace norm of a - b.
double trace_distance(const CMatrix& a, const CMatrix& b);

struct UnravelingReport {
  std::vector<double> t;
  std::vector<double> trace_distance;
  std::vector<double> mc_error;
  std::vector<CMatrix> averaged;
  std::vector<CMatrix> master;
  double max_trace_distance = 0.0;
  double mc_error_estimate = 0.0;  // max over the grid
  int n_traj = 0;
  bool consistent(double factor = 4.0) const { return max_trace_distance <= factor * mc_error_estimate; }
};

/// Average of normalized trajectory projectors against the master solution.
/// `mc_error(t)` is the standard error of the averaged matrix in Frobenius
/// norm, sqrt(sum_ij Var(rho_ij) / n_traj), estimated from the sample.
UnravelingReport compare_unraveling(const AtomModel& atom, const CVector& psi0, std::span<const double> t_grid,
                                    int n_traj, std::uint64_t seed0, int jobs = 1);

}  // namespace qjump
