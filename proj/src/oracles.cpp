#include "maghyst/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "maghyst/core_model.hpp"
#include "maghyst/forward.hpp"
#include "maghyst/inverse.hpp"

namespace maghyst {

namespace {

double anhysteretic_field(const PinningCell& cell, double j) {
  return cell.a_s * std::tan(M_PI * j / (2.0 * cell.j_s));
}

double anhysteretic_inverse(const PinningCell& cell, double y) {
  return (2.0 * cell.j_s / M_PI) * std::atan(y / cell.a_s);
}

}  // namespace

double scalar_play_exact(const PinningCell& cell, double h, double j_prev) {
  cell.validate();
  if (!(std::abs(j_prev) < cell.j_s))
    throw std::domain_error("scalar_play_exact: |j_prev| must be < j_s");
  const double drive = h - anhysteretic_field(cell, j_prev);
  if (std::abs(drive) <= cell.chi) return j_prev;
  return drive > 0.0 ? anhysteretic_inverse(cell, h - cell.chi)
                     : anhysteretic_inverse(cell, h + cell.chi);
}

bool is_stuck(const PinningCell& cell, const Vec& h, const Vec& j_prev) {
  return (h - energy_grad(cell, j_prev)).norm() <= cell.chi;
}

std::vector<Vec> reference_unregularized(const MaterialModel& model, const Vec& input,
                                         const MagnetizationState& state, OperatorMode mode) {
  SolverConfig cfg;
  cfg.eps = kReferenceEps;
  cfg.tol = kReferenceTol;
  if (mode == OperatorMode::Forward) {
    return evaluate_forward(model, cfg, input, state).state.j_prev;
  }
  return evaluate_inverse(model, cfg, input, state).state.j_prev;
}

}  // namespace maghyst
