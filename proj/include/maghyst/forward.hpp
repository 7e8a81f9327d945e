#pragma once

#include <vector>

#include "maghyst/core_model.hpp"
#include "maghyst/material.hpp"
#include "maghyst/types.hpp"

namespace maghyst {

struct CellSolveStats {
  int newton_iters = 0;
  int backtracks = 0;
  bool converged = false;
};

struct ForwardStats {
  std::vector<CellSolveStats> cells;
  long total_newton_iters = 0;
  long total_backtracks = 0;
  double wall_time = 0.0;  ///< optional, filled by the loop harness
};

/// Per-iteration audit trail of a damped Newton solve. Optional; used by
/// tests to verify the Armijo inequality, monotone descent and the exact
/// stopping rule on every accepted step.
struct NewtonTrace {
  struct Step {
    double f_before = 0.0;
    double f_after = 0.0;
    double slope = 0.0;  ///< <grad, delta> at the accepted iterate (negative)
    double tau = 0.0;    ///< accepted step length
    double grad_norm_after = 0.0;
    double f_noise = 0.0;  ///< rounding-noise bound of one objective evaluation
    int backtracks = 0;
  };
  double grad_norm0 = 0.0;
  double threshold = 0.0;  ///< max(tol * grad_norm0, abs_tol) actually used
  std::vector<Step> steps;
};

struct CellSolveResult {
  Vec j;
  CellSolveStats stats;
};

/// Minimize the per-cell forward objective F(J) = U(J) - <H,J> + chi|J - J_prev|_eps
/// by damped Newton with Armijo backtracking, starting from J_prev.
/// Stops when |grad F| <= max(tol * |grad F(J0)|, abs_tol); abs_tol = 0 selects
/// the automatic floor 1e-14 * a_s. The first trial step is capped so that
/// |J + tau*delta| <= (1 - 1e-9) * j_s stays inside the saturation ball.
/// When the requested Armijo decrease is smaller than the rounding error of an
/// objective evaluation (recorded as Step::f_noise), a trial is instead
/// accepted if it shrinks the gradient norm, which keeps the endgame moving
/// once objective differences drop below floating-point resolution.
/// Internally the iterate is parameterized by the displacement J - J_prev so
/// that pinning-scale steps (|J - J_prev| ~ sqrt(eps)) stay resolvable even
/// when they are far below one ulp of |J_prev|.
/// Throws SolverError on non-convergence within max_newton or a line-search stall.
[[nodiscard]] CellSolveResult newton_solve_cell(const PinningCell& cell, const Vec& h,
                                                const Vec& j_prev, const SolverConfig& cfg,
                                                NewtonTrace* trace = nullptr);

struct ForwardResult {
  Vec b;
  MagnetizationState state;  ///< updated polarizations J_k
  ForwardStats stats;
};

/// Forward hysteresis operator: solve all K cells independently at field H and
/// return B = mu0*H + sum_k J_k together with the updated state. Cells are
/// evaluated in index order; they share no mutable state, so the result does
/// not depend on evaluation order (up to floating-point summation order).
[[nodiscard]] ForwardResult evaluate_forward(const MaterialModel& model, const SolverConfig& cfg,
                                             const Vec& h, const MagnetizationState& state);

/// Operator Jacobian dB/dH of one forward step: mu0*I + sum_k [hess F_k(J_k)]^-1,
/// with each per-cell Hessian evaluated at the converged polarization in
/// `state_conv` and centered at the prior state `state_prev`. Symmetric
/// positive definite with every eigenvalue >= mu0.
[[nodiscard]] Mat forward_jacobian(const MaterialModel& model, const SolverConfig& cfg,
                                   const MagnetizationState& state_prev,
                                   const MagnetizationState& state_conv);

}  // namespace maghyst
