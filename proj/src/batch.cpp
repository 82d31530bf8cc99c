#include "qjump/batch.hpp"

#include <algorithm>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qjump/errors.hpp"

namespace qjump {

namespace {

// Exceptions must not leave an OpenMP region; the first failure (by index)
// is captured and rethrown after the loop.
class FirstError {
 public:
  explicit FirstError(int n) : errors_(n) {}
  void capture(int i) { errors_[i] = std::current_exception(); }
  void rethrow() const {
    for (const auto& e : errors_)
      if (e) std::rethrow_exception(e);
  }

 private:
  std::vector<std::exception_ptr> errors_;
};

int clamp_jobs(int jobs) { return std::max(1, jobs); }

struct BlockSum {
  std::vector<CMatrix> sum;
  std::vector<double> sum_sq;  // sum of |entry|^2 over all entries
};

BlockSum projector_block(const QuantumJumpEngine& engine, const CVector& psi0, std::span<const double> t_grid,
                         std::uint64_t seed0, int begin, int end) {
  const int n = engine.propagator().dim();
  const double t_end = t_grid.empty() ? 0.0 : t_grid.back();
  BlockSum block{std::vector<CMatrix>(t_grid.size(), CMatrix::Zero(n, n)), std::vector<double>(t_grid.size(), 0.0)};
  for (int k = begin; k < end; ++k) {
    std::size_t idx = 0;
    simulate_jumps(
        engine, psi0, t_end, split_seed(seed0, static_cast<std::uint64_t>(k)), [](double, int, const CVector&) {},
        t_grid, [&](const StateSample& s) {
          const CMatrix proj = s.state * s.state.adjoint();
          block.sum[idx] += proj;
          block.sum_sq[idx] += proj.cwiseAbs2().sum();
          ++idx;
        });
    if (idx != t_grid.size()) throw NumericError("SamplingError", "trajectory produced an incomplete sample grid");
  }
  return block;
}

ProjectorAverage finish_average(std::span<const double> t_grid, const std::vector<BlockSum>& blocks, int n_traj, int n) {
  ProjectorAverage avg;
  avg.t.assign(t_grid.begin(), t_grid.end());
  avg.n_traj = n_traj;
  avg.mean.assign(t_grid.size(), CMatrix::Zero(n, n));
  avg.var_sum.assign(t_grid.size(), 0.0);
  std::vector<double> sum_sq(t_grid.size(), 0.0);
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      avg.mean[i] += b.sum[i];
      sum_sq[i] += b.sum_sq[i];
    }
  }
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    avg.mean[i] /= static_cast<double>(n_traj);
    if (n_traj > 1) {
      const double var = (sum_sq[i] - n_traj * avg.mean[i].cwiseAbs2().sum()) / (n_traj - 1);
      avg.var_sum[i] = std::max(0.0, var);
    }
  }
  return avg;
}

}  // namespace

int max_parallel_jobs() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::vector<Trajectory> run_trajectory_batch_serial(const QuantumJumpEngine& engine, const CVector& psi0,
                                                    double t_end, std::uint64_t seed0, int n_traj,
                                                    const TrajectoryOptions& opts) {
  std::vector<Trajectory> out;
  out.reserve(std::max(0, n_traj));
  for (int k = 0; k < n_traj; ++k)
    out.push_back(simulate_trajectory(engine, psi0, t_end, split_seed(seed0, static_cast<std::uint64_t>(k)), opts));
  return out;
}

std::vector<Trajectory> run_trajectory_batch(const QuantumJumpEngine& engine, const CVector& psi0, double t_end,
                                             std::uint64_t seed0, int n_traj, const TrajectoryOptions& opts,
                                             int jobs) {
  std::vector<Trajectory> out(std::max(0, n_traj));
  FirstError errors(n_traj);
#pragma omp parallel for schedule(dynamic, 1) num_threads(clamp_jobs(jobs))
  for (int k = 0; k < n_traj; ++k) {
    try {
      out[k] = simulate_trajectory(engine, psi0, t_end, split_seed(seed0, static_cast<std::uint64_t>(k)), opts);
    } catch (...) {
      errors.capture(k);
    }
  }
  errors.rethrow();
  return out;
}

ProjectorAverage average_projectors_serial(const QuantumJumpEngine& engine, const CVector& psi0,
                                           std::span<const double> t_grid, std::uint64_t seed0, int n_traj) {
  const int n_blocks = (n_traj + kReductionBlock - 1) / kReductionBlock;
  std::vector<BlockSum> blocks;
  for (int b = 0; b < n_blocks; ++b)
    blocks.push_back(projector_block(engine, psi0, t_grid, seed0, b * kReductionBlock,
                                     std::min(n_traj, (b + 1) * kReductionBlock)));
  return finish_average(t_grid, blocks, n_traj, engine.propagator().dim());
}

ProjectorAverage average_projectors(const QuantumJumpEngine& engine, const CVector& psi0,
                                    std::span<const double> t_grid, std::uint64_t seed0, int n_traj, int jobs) {
  const int n_blocks = (n_traj + kReductionBlock - 1) / kReductionBlock;
  std::vector<BlockSum> blocks(n_blocks);
  FirstError errors(n_blocks);
#pragma omp parallel for schedule(dynamic, 1) num_threads(clamp_jobs(jobs))
  for (int b = 0; b < n_blocks; ++b) {
    try {
      blocks[b] = projector_block(engine, psi0, t_grid, seed0, b * kReductionBlock,
                                  std::min(n_traj, (b + 1) * kReductionBlock));
    } catch (...) {
      errors.capture(b);
    }
  }
  errors.rethrow();
  return finish_average(t_grid, blocks, n_traj, engine.propagator().dim());
}

std::vector<std::vector<double>> detection_batch_serial(const QuantumJumpEngine& engine, const CVector& psi0,
                                                        double t_end, std::uint64_t seed0, int n_traj,
                                                        std::span<const int> detect_channels) {
  std::vector<std::vector<double>> out;
  for (int k = 0; k < n_traj; ++k)
    out.push_back(simulate_detections(engine, psi0, t_end, split_seed(seed0, static_cast<std::uint64_t>(k)),
                                      detect_channels));
  return out;
}

std::vector<std::vector<double>> detection_batch(const QuantumJumpEngine& engine, const CVector& psi0,
                                                 double t_end, std::uint64_t seed0, int n_traj,
                                                 std::span<const int> detect_channels, int jobs) {
  std::vector<std::vector<double>> out(std::max(0, n_traj));
  FirstError errors(n_traj);
#pragma omp parallel for schedule(dynamic, 1) num_threads(clamp_jobs(jobs))
  for (int k = 0; k < n_traj; ++k) {
    try {
      out[k] = simulate_detections(engine, psi0, t_end, split_seed(seed0, static_cast<std::uint64_t>(k)),
                                   detect_channels);
    } catch (...) {
      errors.capture(k);
    }
  }
  errors.rethrow();
  return out;
}

}  // namespace qjump
