#include "qjump/master_equation.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "qjump/batch.hpp"
#include "qjump/dynamics.hpp"
#include "qjump/errors.hpp"

namespace qjump {

CVector vectorize(const CMatrix& m) {
  return Eigen::Map<const CVector>(m.data(), m.size());
}

CMatrix unvectorize(const CVector& v, int n) {
  return Eigen::Map<const CMatrix>(v.data(), n, n);
}

namespace {

CMatrix kron(const CMatrix& a, const CMatrix& b) { return Eigen::kroneckerProduct(a, b).eval(); }

// -i [H, .] - 1/2 {K, .} for a general (possibly non-Hermitian) generator
// rho -> -i (G rho - rho G^dagger), G = H - i K / 2.
CMatrix sandwich_generator(const CMatrix& g) {
  const int n = static_cast<int>(g.rows());
  const CMatrix id = CMatrix::Identity(n, n);
  return -kI * kron(id, g) + kI * kron(g.conjugate(), id);
}

}  // namespace

Superoperator build_liouvillian(const AtomModel& atom) {
  const int n = atom.n_levels();
  CMatrix l = conditional_generator(atom);
  for (const auto& op : jump_operators(atom)) l += kron(op.matrix.conjugate(), op.matrix);
  return {l, n};
}

CMatrix conditional_generator(const AtomModel& atom) {
  // U_cond rho U_cond^dagger evolves as -i (H_cond rho - rho H_cond^dagger).
  return sandwich_generator(build_h_cond(atom));
}

DensityCheck check_density(const CMatrix& rho) {
  DensityCheck c;
  const double scale = std::max(1.0, rho.norm());
  c.hermiticity = (rho - rho.adjoint()).norm() / scale;
  c.trace_error = std::abs(rho.trace() - Complex{1.0, 0.0});
  const CMatrix herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
  c.min_eigenvalue = es.eigenvalues().minCoeff();
  return c;
}

std::vector<DensityMatrix> solve_master(const AtomModel& atom, const CMatrix& rho0, std::span<const double> t_grid,
                                        double tol) {
  const int n = atom.n_levels();
  if (rho0.rows() != n || rho0.cols() != n) throw ConfigError("RangeError", "rho0 has the wrong dimension");
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    if (t_grid[i] < 0.0 || (i > 0 && !(t_grid[i] > t_grid[i - 1])))
      throw ConfigError("RangeError", "solve_master: time grid must be non-negative and increasing");

  const CMatrix l = build_liouvillian(atom).liouvillian;
  CVector x = vectorize(rho0);
  double t_prev = 0.0;
  double cached_dt = -1.0;
  CMatrix step;

  std::vector<DensityMatrix> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    const double dt = t - t_prev;
    if (dt > 0.0) {
      if (std::abs(dt - cached_dt) > 1e-13 * std::max(1.0, dt)) {
        const CMatrix arg = l * dt;
        step = arg.exp();
        cached_dt = dt;
      }
      x = step * x;
    }
    t_prev = t;
    CMatrix rho = unvectorize(x, n);
    if (!rho.allFinite()) throw NumericError("StepFailure", "master equation produced non-finite values");
    const DensityCheck chk = check_density(rho);
    if (chk.trace_error > tol || chk.hermiticity > 1e-10 || chk.min_eigenvalue < -1e-8)
      throw NumericError("StepFailure", "master equation output violates density-matrix invariants");
    out.push_back({std::move(rho), t});
  }
  return out;
}

DensityMatrix steady_state(const AtomModel& atom) {
  const int n = atom.n_levels();
  const CMatrix l = build_liouvillian(atom).liouvillian;
  Eigen::JacobiSVD<CMatrix> svd(l, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double scale = std::max(1.0, sv(0));
  int null_dim = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) <= 1e-10 * scale) ++null_dim;
  if (null_dim != 1)
    throw NumericError("DegenerateSteadyState",
                       "Liouvillian null space has dimension " + std::to_string(null_dim) + " (expected 1)");

  CMatrix rho = unvectorize(svd.matrixV().col(sv.size() - 1), n);
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double residual = (l * vectorize(rho)).norm();
  if (residual > 1e-10 * scale) throw NumericError("StepFailure", "steady-state residual too large");
  return {rho, 0.0};
}

std::vector<Complex> two_time_correlation(const AtomModel& atom, const CMatrix& op_a, const CMatrix& op_b,
                                          std::span<const double> tau_grid) {
  const CMatrix l = build_liouvillian(atom).liouvillian;
  const CMatrix rho = steady_state(atom).rho;
  CVector x = vectorize(op_b * rho);
  // tr[A X] = sum_ij A_ji X_ij = vec(A^T) . vec(X)
  const CVector a_t = vectorize(op_a.transpose());

  std::vector<Complex> g;
  double t_prev = 0.0;
  for (double tau : tau_grid) {
    if (tau < t_prev) throw ConfigError("RangeError", "two_time_correlation: tau grid must be non-decreasing from 0");
    if (tau > t_prev) {
      const CMatrix arg = l * (tau - t_prev);
      x = arg.exp() * x;
      t_prev = tau;
    }
    g.push_back(a_t.transpose() * x);
  }
  return g;
}

double trace_distance(const CMatrix& a, const CMatrix& b) {
  const CMatrix d = a - b;
  const CMatrix herm = 0.5 * (d + d.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

UnravelingReport compare_unraveling(const AtomModel& atom, const CVector& psi0, std::span<const double> t_grid,
                                    int n_traj, std::uint64_t seed0, int jobs) {
  if (n_traj < 100) throw ConfigError("RangeError", "compare_unraveling needs at least 100 trajectories");
  const QuantumJumpEngine engine(atom);
  const CMatrix rho0 = psi0 * psi0.adjoint();
  const auto master = solve_master(atom, rho0, t_grid);
  const auto avg = average_projectors(engine, psi0, t_grid, seed0, n_traj, jobs);

  UnravelingReport rep;
  rep.n_traj = n_traj;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double td = trace_distance(avg.mean[i], master[i].rho);
    const double err = std::sqrt(avg.var_sum[i] / n_traj);
    rep.t.push_back(t_grid[i]);
    rep.trace_distance.push_back(td);
    rep.mc_error.push_back(err);
    rep.averaged.push_back(avg.mean[i]);
    rep.master.push_back(master[i].rho);
    rep.max_trace_distance = std::max(rep.max_trace_distance, td);
    rep.mc_error_estimate = std::max(rep.mc_error_estimate, err);
  }
  return rep;
}

}  // namespace qjump
