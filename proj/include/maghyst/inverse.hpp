#pragma once

#include <vector>

#include "maghyst/core_model.hpp"
#include "maghyst/forward.hpp"
#include "maghyst/material.hpp"
#include "maghyst/types.hpp"

namespace maghyst {

/// How the coupled (K*d)x(K*d) Newton system of the inverse operator is solved.
enum class DirectionMethod { Dense, Schur };

[[nodiscard]] constexpr const char* to_string(DirectionMethod m) {
  return m == DirectionMethod::Dense ? "dense" : "schur";
}

/// Instrumentation for the O(K) direction solver: one factorization per block,
/// one multiply per block to build the aggregate right-hand side, one d x d
/// Schur solve, and one multiply per block to recover the block directions.
struct BlockOpCounters {
  long factorizations = 0;   ///< d x d block inversions
  long block_multiplies = 0; ///< d x d block-matrix * vector products
  long schur_solves = 0;     ///< d x d aggregate solves
};

/// Reusable buffers so per-step and per-iteration work in hot loops does not
/// allocate once the buffers have grown to the model's cell count.
struct InverseWorkspace {
  std::vector<Mat> block_inv;
  std::vector<Vec> block_y;
  std::vector<Vec> delta;
  std::vector<Vec> j_trial;
  std::vector<double> dense_a;  ///< (K*d)^2 system matrix, row-major
  std::vector<double> dense_x;  ///< K*d right-hand side / solution
  std::vector<int> dense_piv;   ///< K*d row-interchange record
  std::vector<Vec> js;          ///< rounded iterates J_k,p + D_k
  std::vector<Vec> delta_iter;  ///< accepted displacements D_k
  InverseObjectiveEval eval;        ///< accepted-point evaluation
  InverseObjectiveEval eval_trial;  ///< trial-point evaluation
};

/// Solve [nu0 * coupling + blockdiag(blocks)] * delta = rhs by assembling the
/// full (K*d)x(K*d) matrix and factoring it with general-purpose LU with
/// partial pivoting (the structure-blind O((K*d)^3) baseline the O(K)
/// elimination is measured against). The coupling adds nu0*I between every
/// pair of blocks. `rhs` is the desired right-hand side; Newton callers pass
/// the negated objective gradient.
[[nodiscard]] std::vector<Vec> dense_newton_direction(const std::vector<Mat>& blocks, double nu0,
                                                      const std::vector<Vec>& rhs);

/// Same system solved in Theta(K) block operations plus one d x d aggregate
/// (Schur-complement) solve: eliminate each block against its inverse, solve
/// [I + nu0 * sum_k blocks_k^-1] for the aggregate direction sum_k delta_k,
/// then recover the block directions. Bitwise-independent of K ordering and
/// equal to the dense solution up to round-off.
[[nodiscard]] std::vector<Vec> schur_newton_direction(const std::vector<Mat>& blocks, double nu0,
                                                      const std::vector<Vec>& rhs,
                                                      BlockOpCounters* counters = nullptr);

struct InverseStats {
  int newton_iters = 0;
  int backtracks = 0;
  bool converged = false;
  double wall_time = 0.0;  ///< optional, filled by the loop harness
};

struct InverseResult {
  Vec h;
  MagnetizationState state;  ///< updated polarizations J_k
  InverseStats stats;
};

/// Inverse hysteresis operator: given flux density B and the prior state,
/// minimize the coupled objective over all K polarizations by damped Newton
/// with Armijo backtracking (direction from `method`), then return
/// H = nu0 * (B - sum_k J_k) and the updated state. Stopping rule and step
/// capping mirror the forward cell solver; abs_tol = 0 selects the automatic
/// floor 1e-14 * nu0 * max(|B|, sum_k j_s,k).
/// Throws SolverError on non-convergence or a line-search stall.
[[nodiscard]] InverseResult evaluate_inverse(const MaterialModel& model, const SolverConfig& cfg,
                                             const Vec& b, const MagnetizationState& state,
                                             DirectionMethod method = DirectionMethod::Schur,
                                             InverseWorkspace* ws = nullptr,
                                             NewtonTrace* trace = nullptr,
                                             BlockOpCounters* counters = nullptr);

/// Operator Jacobian dH/dB of one inverse step, computed by the same block
/// elimination in Theta(K): nu0 * [I + nu0 * sum_k (hess g_k)^-1]^-1 with the
/// per-cell Hessians evaluated at the converged state. At matched points this
/// is exactly the matrix inverse of forward_jacobian.
[[nodiscard]] Mat inverse_jacobian(const MaterialModel& model, const SolverConfig& cfg,
                                   const MagnetizationState& state_prev,
                                   const MagnetizationState& state_conv);

}  // namespace maghyst
