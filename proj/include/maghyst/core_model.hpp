#pragma once

#include <vector>

#include "maghyst/material.hpp"
#include "maghyst/types.hpp"

namespace maghyst {

// ---------------------------------------------------------------------------
// Regularized norm |x|_eps = sqrt(|x|^2 + eps)
// ---------------------------------------------------------------------------

/// Smoothed Euclidean norm. Infinitely differentiable for eps > 0 and squeezed
/// between |x| and |x| + sqrt(eps). Throws for eps <= 0.
[[nodiscard]] double smooth_norm(const Vec& x, double eps);

/// Gradient x / |x|_eps (well defined at x = 0 for eps > 0).
[[nodiscard]] Vec smooth_norm_grad(const Vec& x, double eps);

/// Hessian I/|x|_eps - x x^T/|x|_eps^3; symmetric positive semdefinite with
/// eigenvalues eps/|x|_eps^3 (along x) and 1/|x|_eps (orthogonal complement).
[[nodiscard]] Mat smooth_norm_hess(const Vec& x, double eps);

// ---------------------------------------------------------------------------
// Pinning-cell energy density (isotropic, saturating)
//   U(J) = -(2 a_s j_s / pi) * log(cos(pi |J| / (2 j_s))),  |J| < j_s
// ---------------------------------------------------------------------------

/// True if |J| lies strictly inside the cell's saturation ball.
[[nodiscard]] bool energy_in_domain(const PinningCell& cell, const Vec& j);

/// Energy value; 0 at J = 0, diverging as |J| -> j_s.
/// Throws std::domain_error for |J| >= j_s (callers treat that as +infinity).
[[nodiscard]] double energy_value(const PinningCell& cell, const Vec& j);

/// Gradient a_s * tan(pi r / (2 j_s)) * J/r with the analytic r -> 0 limit
/// a_s * pi/(2 j_s) * J used below r < 1e-12 * j_s.
[[nodiscard]] Vec energy_grad(const PinningCell& cell, const Vec& j);

/// Hessian (u'(r)/r) (I - n n^T) + u''(r) n n^T with n = J/r; symmetric and
/// uniformly positive definite: hess >= gamma*I, gamma = a_s*pi/(2 j_s).
[[nodiscard]] Mat energy_hess(const PinningCell& cell, const Vec& j);

// ---------------------------------------------------------------------------
// Fused per-cell evaluation
//   U(J) + chi * |J - J_prev|_eps  with  dj = J - J_prev
// ---------------------------------------------------------------------------

/// Value, gradient and Hessian of one cell's share of a solver objective,
/// computed in a single pass: the trigonometric factors of U and the smoothed
/// norm of the pinning term are each evaluated once and shared between the
/// three outputs. This is the hot-path form of energy_* + smooth_norm_*;
/// the standalone functions remain for callers needing individual pieces.
struct CellTerms {
  double value = 0.0;
  Vec grad;
  Mat hess;
  /// |grad U| + |hess U * J| (= u'(r) + u''(r) r, the radial direction being
  /// an eigendirection of hess U): the energy share of the rounding-noise
  /// bound of a gradient evaluated at the rounded point J.
  double grad_noise_scale = 0.0;
};

/// Fused evaluation at J = j with displacement dj = J - J_prev.
/// Throws std::domain_error outside |J| < j_s and std::invalid_argument for
/// eps <= 0.
[[nodiscard]] CellTerms cell_terms(const PinningCell& cell, const Vec& j, const Vec& dj,
                                   double eps);

/// Counterpart for line-search trials: returns false (leaving `out`
/// unspecified) instead of throwing when |J| >= j_s, since a trial step past
/// saturation is an ordinary reject, not an error. Still throws
/// std::invalid_argument for eps <= 0.
[[nodiscard]] bool cell_terms_checked(const PinningCell& cell, const Vec& j, const Vec& dj,
                                      double eps, CellTerms& out);

// ---------------------------------------------------------------------------
// Per-cell forward objective
//   F(J) = U(J) - <H, J> + chi * |J - J_prev|_eps
// ---------------------------------------------------------------------------

struct ObjectiveEval {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

/// Value, gradient and Hessian of the forward cell objective at J.
/// Throws std::domain_error outside |J| < j_s.
[[nodiscard]] ObjectiveEval forward_objective(const PinningCell& cell, const Vec& h,
                                              const Vec& j_prev, double eps, const Vec& j);

/// Value-only evaluation for line searches (same domain error behaviour).
[[nodiscard]] double forward_objective_value(const PinningCell& cell, const Vec& h,
                                             const Vec& j_prev, double eps, const Vec& j);

// ---------------------------------------------------------------------------
// Coupled inverse objective over all K cells
//   G(J_1..J_K) = nu0/2 |B - sum_k J_k|^2 + sum_k [ U_k(J_k) + chi_k |J_k - J_k,p|_eps ]
// ---------------------------------------------------------------------------

/// Hessian blocks hold only the per-cell part d2(U_k + chi_k |.|_eps); the
/// field coupling adds nu0*I between every pair of blocks and is returned
/// separately as `nu0` so O(K) solvers can exploit the structure.
struct InverseObjectiveEval {
  double value = 0.0;
  std::vector<Vec> grad;        ///< block gradients, one per cell
  std::vector<Mat> hess_blocks; ///< per-cell Hessian blocks (without coupling)
  double nu0 = 0.0;             ///< rank-d coupling weight between all blocks
};

/// Value, block gradients and block Hessians of the inverse objective.
/// Throws std::domain_error if any |J_k| >= j_s,k.
[[nodiscard]] InverseObjectiveEval inverse_objective(const MaterialModel& model, const Vec& b,
                                                     const MagnetizationState& state, double eps,
                                                     const std::vector<Vec>& j_all);

/// Value-only evaluation for line searches.
[[nodiscard]] double inverse_objective_value(const MaterialModel& model, const Vec& b,
                                             const MagnetizationState& state, double eps,
                                             const std::vector<Vec>& j_all);

}  // namespace maghyst
