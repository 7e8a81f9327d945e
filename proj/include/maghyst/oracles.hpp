#pragma once

#include <vector>

#include "maghyst/material.hpp"
#include "maghyst/types.hpp"

namespace maghyst {

/// Regularization and tolerance used by the tiny-regularization reference
/// proxy for the unregularized operators.
inline constexpr double kReferenceEps = 1e-14;
inline constexpr double kReferenceTol = 1e-12;

/// Exact scalar (1-D) solution of the unregularized cell problem, a play
/// operator composed with the inverse anhysteretic curve g(y) = (2 j_s/pi) *
/// atan(y / a_s):
///   |h - u'(j_prev)| <= chi  ->  j_prev            (pinned)
///    h - u'(j_prev)  >  chi  ->  g(h - chi)        (moved up)
///    h - u'(j_prev)  < -chi  ->  g(h + chi)        (moved down)
/// where u'(j) = a_s * tan(pi j / (2 j_s)). Requires |j_prev| < j_s.
[[nodiscard]] double scalar_play_exact(const PinningCell& cell, double h, double j_prev);

/// Pinning predicate of the unregularized problem: the polarization stays at
/// J_prev exactly when |H - grad U(J_prev)| <= chi (every one-sided
/// directional derivative of the objective at J_prev is then non-negative).
[[nodiscard]] bool is_stuck(const PinningCell& cell, const Vec& h, const Vec& j_prev);

/// Reference proxy for the unregularized operator: the regularized solver run
/// at eps = 1e-14, tol = 1e-12. Returns the K minimizing polarizations for
/// `input` = H (Forward) or `input` = B (Inverse).
[[nodiscard]] std::vector<Vec> reference_unregularized(const MaterialModel& model,
                                                       const Vec& input,
                                                       const MagnetizationState& state,
                                                       OperatorMode mode);

}  // namespace maghyst
