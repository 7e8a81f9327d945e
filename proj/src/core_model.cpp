#include "maghyst/core_model.hpp"

#include <cmath>
#include <stdexcept>

namespace maghyst {

namespace {

// Below this fraction of j_s the gradient/Hessian switch to their r -> 0
// analytic limits to avoid 0/0 in J/r.
constexpr double kRadiusSwitch = 1e-12;

void check_eps(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("smooth_norm: eps must be > 0");
}

}  // namespace

double smooth_norm(const Vec& x, double eps) {
  check_eps(eps);
  return std::sqrt(x.norm_sq() + eps);
}

Vec smooth_norm_grad(const Vec& x, double eps) {
  check_eps(eps);
  const double n = std::sqrt(x.norm_sq() + eps);
  return (1.0 / n) * x;
}

Mat smooth_norm_hess(const Vec& x, double eps) {
  check_eps(eps);
  const double n2 = x.norm_sq() + eps;
  const double n = std::sqrt(n2);
  Mat h = Mat::outer(x, x);
  h *= -1.0 / (n2 * n);
  h.add_diag(1.0 / n);
  return h;
}

bool energy_in_domain(const PinningCell& cell, const Vec& j) {
  return j.norm() < cell.j_s;
}

double energy_value(const PinningCell& cell, const Vec& j) {
  const double r = j.norm();
  if (!(r < cell.j_s)) throw std::domain_error("energy_value: |J| must be < j_s");
  const double c = std::cos(M_PI * r / (2.0 * cell.j_s));
  return -(2.0 * cell.a_s * cell.j_s / M_PI) * std::log(c);
}

Vec energy_grad(const PinningCell& cell, const Vec& j) {
  const double r = j.norm();
  if (!(r < cell.j_s)) throw std::domain_error("energy_grad: |J| must be < j_s");
  if (r < kRadiusSwitch * cell.j_s) {
    // u'(r)/r -> a_s * pi/(2 j_s) as r -> 0
    return (cell.a_s * M_PI / (2.0 * cell.j_s)) * j;
  }
  const double up = cell.a_s * std::tan(M_PI * r / (2.0 * cell.j_s));
  return (up / r) * j;
}

Mat energy_hess(const PinningCell& cell, const Vec& j) {
  const double r = j.norm();
  if (!(r < cell.j_s)) throw std::domain_error("energy_hess: |J| must be < j_s");
  const double gamma = cell.a_s * M_PI / (2.0 * cell.j_s);
  if (r < kRadiusSwitch * cell.j_s) {
    Mat h(j.dim());
    h.add_diag(gamma);
    return h;
  }
  const double theta = M_PI * r / (2.0 * cell.j_s);
  const double up_over_r = cell.a_s * std::tan(theta) / r;
  const double c = std::cos(theta);
  const double upp = gamma / (c * c);  // u''(r) = a_s * pi/(2 j_s) * sec^2
  // (up/r) I + (upp - up/r) n n^T
  Mat h = Mat::outer(j, j);
  h *= (upp - up_over_r) / (r * r);
  h.add_diag(up_over_r);
  return h;
}

bool cell_terms_checked(const PinningCell& cell, const Vec& j, const Vec& dj, double eps,
                        CellTerms& out) {
  check_eps(eps);
  const double r = j.norm();
  if (!(r < cell.j_s)) return false;

  // Everything derives from t = tan(theta): u' = a_s t, u'' = gamma (1 + t^2)
  // (= gamma sec^2), and U = (a_s j_s / pi) log(1 + t^2) (= -c1 log cos).
  const double gamma = cell.a_s * M_PI / (2.0 * cell.j_s);
  const double theta = M_PI * r / (2.0 * cell.j_s);
  const double t = std::tan(theta);

  out.value = (cell.a_s * cell.j_s / M_PI) * std::log1p(t * t);
  const double upp = gamma * (1.0 + t * t);
  if (r < kRadiusSwitch * cell.j_s) {
    // r -> 0 limits: u'(r)/r -> gamma and u''(r) -> gamma.
    out.grad = gamma * j;
    out.hess = Mat(j.dim());
    out.hess.add_diag(gamma);
    out.grad_noise_scale = 2.0 * gamma * r;
  } else {
    const double up = cell.a_s * t;  // u'(r) = |grad U|
    const double up_over_r = up / r;
    out.grad = up_over_r * j;
    // (up/r) I + (upp - up/r) n n^T
    out.hess = Mat::outer(j, j);
    out.hess *= (upp - up_over_r) / (r * r);
    out.hess.add_diag(up_over_r);
    out.grad_noise_scale = up + upp * r;  // hess U * J = u''(r) J exactly
  }
  if (cell.chi > 0.0) {
    const double n2 = dj.norm_sq() + eps;
    const double n = std::sqrt(n2);
    const double cn = cell.chi / n;
    out.value += cell.chi * n;
    out.grad += cn * dj;
    Mat sm = Mat::outer(dj, dj);
    sm *= -cn / n2;
    sm.add_diag(cn);
    out.hess += sm;
  }
  return true;
}

CellTerms cell_terms(const PinningCell& cell, const Vec& j, const Vec& dj, double eps) {
  CellTerms out;
  if (!cell_terms_checked(cell, j, dj, eps, out))
    throw std::domain_error("cell_terms: |J| must be < j_s");
  return out;
}

ObjectiveEval forward_objective(const PinningCell& cell, const Vec& h, const Vec& j_prev,
                                double eps, const Vec& j) {
  CellTerms t = cell_terms(cell, j, j - j_prev, eps);
  ObjectiveEval out;
  out.value = t.value - h.dot(j);
  t.grad -= h;
  out.grad = t.grad;
  out.hess = t.hess;
  return out;
}

double forward_objective_value(const PinningCell& cell, const Vec& h, const Vec& j_prev,
                               double eps, const Vec& j) {
  double v = energy_value(cell, j) - h.dot(j);
  if (cell.chi > 0.0) v += cell.chi * smooth_norm(j - j_prev, eps);
  return v;
}

InverseObjectiveEval inverse_objective(const MaterialModel& model, const Vec& b,
                                       const MagnetizationState& state, double eps,
                                       const std::vector<Vec>& j_all) {
  const std::size_t K = model.num_cells();
  if (j_all.size() != K) throw std::invalid_argument("inverse_objective: cell count mismatch");

  InverseObjectiveEval out;
  out.nu0 = model.nu0();
  out.grad.reserve(K);
  out.hess_blocks.reserve(K);

  Vec residual = b;  // B - sum_k J_k
  for (const auto& jk : j_all) residual -= jk;

  out.value = 0.5 * out.nu0 * residual.norm_sq();
  const Vec field_grad = -out.nu0 * residual;  // identical for every block

  for (std::size_t k = 0; k < K; ++k) {
    CellTerms t = cell_terms(model.cells[k], j_all[k], j_all[k] - state.j_prev[k], eps);
    out.value += t.value;
    t.grad += field_grad;
    out.grad.push_back(std::move(t.grad));
    out.hess_blocks.push_back(t.hess);
  }
  return out;
}

double inverse_objective_value(const MaterialModel& model, const Vec& b,
                               const MagnetizationState& state, double eps,
                               const std::vector<Vec>& j_all) {
  const std::size_t K = model.num_cells();
  Vec residual = b;
  double v = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const PinningCell& cell = model.cells[k];
    residual -= j_all[k];
    v += energy_value(cell, j_all[k]);
    if (cell.chi > 0.0) v += cell.chi * smooth_norm(j_all[k] - state.j_prev[k], eps);
  }
  return v + 0.5 * model.nu0() * residual.norm_sq();
}

}  // namespace maghyst
