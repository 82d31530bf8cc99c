#pragma once

// Batches of independent trajectories. Each kernel comes in an OpenMP
// version and a serial reference; both produce bit-identical results for any
// thread count because trajectory k always uses split_seed(seed0, k) and
// reductions run over fixed blocks in index order.

#include <cstdint>
#include <span>
#include <vector>

#include "qjump/dynamics.hpp"

namespace qjump {

/// Number of trajectories summed together before blocks are combined.
inline constexpr int kReductionBlock = 64;

std::vector<Trajectory> run_trajectory_batch(const QuantumJumpEngine& engine, const CVector& psi0, double t_end,
                                             std::uint64_t seed0, int n_traj, const TrajectoryOptions& opts,
                                             int jobs);
std::vector<Trajectory> run_trajectory_batch_serial(const QuantumJumpEngine& engine, const CVector& psi0,
                                                    double t_end, std::uint64_t seed0, int n_traj,
                                                    const TrajectoryOptions& opts);

struct ProjectorAverage {
  std::vector<double> t;
  std::vector<CMatrix> mean;     // average of |psi><psi| / <psi|psi>
  std::vector<double> var_sum;   // sum_ij sample variance of entry (i, j)
  int n_traj = 0;
};

ProjectorAverage average_projectors(const QuantumJumpEngine& engine, const CVector& psi0,
                                    std::span<const double> t_grid, std::uint64_t seed0, int n_traj, int jobs);
ProjectorAverage average_projectors_serial(const QuantumJumpEngine& engine, const CVector& psi0,
                                           std::span<const double> t_grid, std::uint64_t seed0, int n_traj);

/// Detection times of `n_traj` independent runs (seeds split from seed0).
std::vector<std::vector<double>> detection_batch(const QuantumJumpEngine& engine, const CVector& psi0,
                                                 double t_end, std::uint64_t seed0, int n_traj,
                                                 std::span<const int> detect_channels, int jobs);
std::vector<std::vector<double>> detection_batch_serial(const QuantumJumpEngine& engine, const CVector& psi0,
                                                        double t_end, std::uint64_t seed0, int n_traj,
                                                        std::span<const int> detect_channels);

/// Number of OpenMP threads actually available (1 without OpenMP).
int max_parallel_jobs();

}  // namespace qjump
