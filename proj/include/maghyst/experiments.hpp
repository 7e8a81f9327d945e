#pragma once

#include <string>
#include <vector>

#include "maghyst/forward.hpp"
#include "maghyst/inverse.hpp"
#include "maghyst/material.hpp"
#include "maghyst/types.hpp"

namespace maghyst {

/// Benchmark material with K identical-shape pinning cells:
/// a_s,k = 50 A/m, j_s,k = 1.545 T / K, chi_k = 140 * (k-1)/(K-1) A/m
/// (chi_1 = 0 when K = 1), vacuum mu0. Total saturation is 1.545 T for any K.
[[nodiscard]] MaterialModel benchmark_material(int num_cells, int dim = 2);

/// Unidirectional excitation sample: H(t) = 500 * [sin(5/2 pi t), 0] A/m at
/// t = i/(n-1). Returned vectors are 2-D.
[[nodiscard]] Vec excitation_uni(int i, int n);

/// Rotational excitation sample: H(t) = Hm(t) * [sin(5 pi t), cos(5 pi t)],
/// Hm(t) = 500 * min(t, 0.75) A/m at t = i/(n-1).
[[nodiscard]] Vec excitation_rot(int i, int n);

/// A named input sequence for loop runs: either field samples H^i (forward
/// mode) or flux-density samples B^i (inverse mode), at t^i = i/(n-1).
struct ExcitationSequence {
  enum class Kind { Uni, Rot, File };
  Kind kind = Kind::Uni;
  std::vector<Vec> samples;

  [[nodiscard]] int steps() const { return static_cast<int>(samples.size()); }
};

[[nodiscard]] ExcitationSequence make_uni_excitation(int steps);
[[nodiscard]] ExcitationSequence make_rot_excitation(int steps);
[[nodiscard]] ExcitationSequence make_file_excitation(std::vector<Vec> samples);

[[nodiscard]] const char* to_string(ExcitationSequence::Kind k);

/// One record per time step of a hysteresis loop.
struct TrajectoryStep {
  double t = 0.0;
  Vec h;
  Vec b;
  std::vector<Vec> j;  ///< all partial polarizations after the step
  int newton_iters = 0;
  int backtracks = 0;
  double wall_time = 0.0;  ///< seconds spent in this step's solve
};

struct Trajectory {
  int dim = 0;
  std::vector<TrajectoryStep> steps;
  double total_wall_time = 0.0;  ///< seconds over all solves, measured once around the loop
  long total_newton_iters = 0;
  long total_backtracks = 0;

  [[nodiscard]] std::vector<Vec> h_samples() const;
  [[nodiscard]] std::vector<Vec> b_samples() const;
};

/// Drive the material through the excitation starting from the demagnetized
/// state. Forward mode consumes H samples and records B; inverse mode consumes
/// B samples and records H. Every recorded step satisfies
/// B = mu0*H + sum_k J_k up to round-off by construction.
/// Solver failures abort with the failing step index in the message.
[[nodiscard]] Trajectory run_loop(const MaterialModel& model, const SolverConfig& cfg,
                                  const ExcitationSequence& excitation, OperatorMode mode,
                                  DirectionMethod method = DirectionMethod::Schur);

/// sum_i |a_i - b_i|^2 / sum_i |b_i|^2 (squared relative deviation of a
/// trajectory `a` from reference `b`; not square-rooted).
[[nodiscard]] double relative_error_sq(const std::vector<Vec>& a, const std::vector<Vec>& b);

/// Dissipated energy of one state transition: sum_k chi_k * |J_k' - J_k|.
/// Non-negative; zero when no polarization moved.
[[nodiscard]] double dissipation_increment(const MaterialModel& model,
                                           const MagnetizationState& before,
                                           const MagnetizationState& after);

struct EpsSweepRow {
  double eps = 0.0;
  double err_forward = 0.0;  ///< relative_error_sq of B vs. tiny-eps reference
  double err_inverse = 0.0;  ///< relative_error_sq of H vs. tiny-eps reference
};

/// Regularization accuracy sweep on the K-cell benchmark material: reference
/// trajectories are produced at eps = 1e-14, tol = 1e-12 (forward pass over
/// the excitation, then an inverse replay of the reference B). Each run in
/// `eps_list` (positive, descending) uses tol = eps. The forward error
/// compares B^eps against the reference B; the inverse error replays the
/// row's own forward B (inverse inputs always come from a forward run at the
/// same eps and tol) and compares the recovered H against the reference H.
[[nodiscard]] std::vector<EpsSweepRow> eps_sweep(int num_cells,
                                                 const ExcitationSequence& excitation,
                                                 const std::vector<double>& eps_list);

enum class BenchMethod { Forward, InverseDense, InverseSchur };

[[nodiscard]] const char* to_string(BenchMethod m);

struct BenchRow {
  int num_cells = 0;
  BenchMethod method = BenchMethod::Forward;
  double time_ms = 0.0;     ///< monotonic wall time over the whole loop
  double mean_iters = 0.0;  ///< forward: per cell solve; inverse: per step
};

/// Wall-time benchmark over the excitation at eps = tol = 1e-8. For the
/// inverse methods the input B trajectory is generated by an untimed forward
/// run at identical settings. A short untimed loop warms caches and the clock
/// before the first measurement.
[[nodiscard]] std::vector<BenchRow> bench(const std::vector<int>& k_list,
                                          const std::vector<BenchMethod>& methods,
                                          const ExcitationSequence& excitation);

}  // namespace maghyst
