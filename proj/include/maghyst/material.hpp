#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "maghyst/types.hpp"

namespace maghyst {

/// One pinning cell of the hysteresis model: a partial polarization J_k with
/// saturation magnitude j_s, anhysteretic shape parameter a_s and pinning
/// strength chi (chi = 0 gives a purely anhysteretic, loss-free cell).
struct PinningCell {
  double a_s = 0.0;  ///< anhysteretic field scale [A/m]
  double j_s = 0.0;  ///< saturation polarization of this cell [T]
  double chi = 0.0;  ///< pinning strength (coercive-field-like) [A/m]

  void validate() const {
    if (!(a_s > 0.0)) throw std::invalid_argument("PinningCell: a_s must be > 0");
    if (!(j_s > 0.0)) throw std::invalid_argument("PinningCell: j_s must be > 0");
    if (!(chi >= 0.0)) throw std::invalid_argument("PinningCell: chi must be >= 0");
  }

  /// Strong-convexity constant of the cell energy: gamma = a_s*pi/(2*j_s).
  [[nodiscard]] double convexity_gamma() const { return a_s * M_PI / (2.0 * j_s); }
};

/// Material description: vacuum permeability plus K pinning cells acting in
/// parallel, B = mu0*H + sum_k J_k. The spatial dimension is fixed per model.
struct MaterialModel {
  double mu0 = 4.0 * M_PI * 1e-7;  ///< [T*m/A]
  int dim = 2;                     ///< spatial dimension d in {1,2,3}
  std::vector<PinningCell> cells;

  [[nodiscard]] std::size_t num_cells() const { return cells.size(); }
  [[nodiscard]] double nu0() const { return 1.0 / mu0; }

  void validate() const {
    if (!(mu0 > 0.0)) throw std::invalid_argument("MaterialModel: mu0 must be > 0");
    if (dim < 1 || dim > Vec::kMaxDim)
      throw std::invalid_argument("MaterialModel: dim must be 1, 2 or 3");
    if (cells.empty()) throw std::invalid_argument("MaterialModel: needs at least one cell");
    for (const auto& c : cells) c.validate();
  }
};

/// Hysteresis memory: previous partial polarizations J_k,p, one per cell.
struct MagnetizationState {
  std::vector<Vec> j_prev;

  [[nodiscard]] static MagnetizationState demagnetized(const MaterialModel& model) {
    MagnetizationState s;
    s.j_prev.assign(model.num_cells(), Vec(model.dim));
    return s;
  }

  /// Sum of all partial polarizations.
  [[nodiscard]] Vec total_polarization(int dim) const {
    Vec j(dim);
    for (const auto& jk : j_prev) j += jk;
    return j;
  }

  /// Every |J_k| must stay strictly inside its cell's saturation ball.
  void validate_against(const MaterialModel& model) const {
    if (j_prev.size() != model.num_cells())
      throw std::invalid_argument("MagnetizationState: cell count mismatch");
    for (std::size_t k = 0; k < j_prev.size(); ++k) {
      if (j_prev[k].dim() != model.dim)
        throw std::invalid_argument("MagnetizationState: dimension mismatch");
      if (!(j_prev[k].norm() < model.cells[k].j_s))
        throw std::domain_error("MagnetizationState: |J_k| must be < j_s (cell " +
                                std::to_string(k) + ")");
    }
  }
};

/// Newton/line-search parameters shared by the forward and inverse solvers.
struct SolverConfig {
  double eps = 1e-8;      ///< norm regularization parameter (> 0)
  double tol = 1e-8;      ///< relative gradient-norm stopping tolerance
  double abs_tol = 0.0;   ///< absolute gradient floor; 0 = auto (1e-14 * gradient scale)
  double rho = 0.5;       ///< backtracking shrink factor, 0 < rho < 1
  double sigma = 0.1;     ///< Armijo slope fraction, 0 < sigma < 1/2
  int max_newton = 100;   ///< Newton iteration cap per solve
  int max_backtracks = 60;  ///< backtracking cap per line search

  void validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("SolverConfig: eps must be > 0");
    if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be > 0");
    if (!(abs_tol >= 0.0)) throw std::invalid_argument("SolverConfig: abs_tol must be >= 0");
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("SolverConfig: need 0 < rho < 1");
    if (!(sigma > 0.0 && sigma < 0.5))
      throw std::invalid_argument("SolverConfig: need 0 < sigma < 1/2");
    if (max_newton < 1) throw std::invalid_argument("SolverConfig: max_newton must be >= 1");
    if (max_backtracks < 0)
      throw std::invalid_argument("SolverConfig: max_backtracks must be >= 0");
  }
};

/// Which operator a loop or reference computation evaluates.
enum class OperatorMode { Forward, Inverse };

[[nodiscard]] constexpr const char* to_string(OperatorMode m) {
  return m == OperatorMode::Forward ? "forward" : "inverse";
}

/// Thrown when a Newton solve fails to converge or a line search stalls.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace maghyst
