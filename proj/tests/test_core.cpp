#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "maghyst/core_model.hpp"
#include "maghyst/material.hpp"
#include "test_utils.hpp"

using namespace maghyst;
using test_utils::fd_gradient;
using test_utils::fd_hessian;
using test_utils::frobenius_diff;
using test_utils::min_eigenvalue;
using test_utils::random_vec;
using test_utils::sym_eigenvalues;

namespace {

PinningCell benchmark_cell() { return PinningCell{50.0, 1.545, 140.0}; }

}  // namespace

TEST_CASE("smooth_norm: frozen values") {
  CHECK(smooth_norm(Vec{0.0, 0.0}, 1e-8) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(smooth_norm(Vec{3.0, 4.0}, 1e-8) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(smooth_norm(Vec{1.0, 0.0}, 1e-2) ==
        doctest::Approx(std::sqrt(1.01)).epsilon(1e-14));  // 1.0049875621120890
}

TEST_CASE("smooth_norm: sandwich bound |x| <= |x|_eps <= |x| + sqrt(eps)") {
  std::mt19937 rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 1 + trial % 3;
    const Vec x = random_vec(rng, dim, -5.0, 5.0);
    for (double eps : {1e-2, 1e-6, 1e-10}) {
      const double n = smooth_norm(x, eps);
      CHECK(n >= x.norm());
      CHECK(n <= x.norm() + std::sqrt(eps));
    }
  }
}

TEST_CASE("smooth_norm: rejects eps <= 0") {
  CHECK_THROWS_AS((void)smooth_norm(Vec{1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)smooth_norm(Vec{1.0}, -1e-8), std::invalid_argument);
  CHECK_THROWS_AS((void)smooth_norm_grad(Vec{1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)smooth_norm_hess(Vec{1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("smooth_norm_grad: matches finite differences and is zero at origin") {
  const double eps = 1e-4;
  auto f = [eps](const Vec& x) { return smooth_norm(x, eps); };

  const Vec origin_grad = smooth_norm_grad(Vec{0.0, 0.0, 0.0}, eps);
  CHECK(origin_grad.norm() == doctest::Approx(0.0));

  std::mt19937 rng(102);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec x = random_vec(rng, 2, -2.0, 2.0);
    const Vec g = smooth_norm_grad(x, eps);
    const Vec g_fd = fd_gradient(f, x);
    CHECK((g - g_fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
    CHECK(g.norm() < 1.0);  // |grad| = |x|/|x|_eps < 1
  }
}

TEST_CASE("smooth_norm_hess: frozen eigenvalues at (1,0), eps = 1e-2") {
  const Mat h = smooth_norm_hess(Vec{1.0, 0.0}, 1e-2);
  const auto eig = sym_eigenvalues(h);
  // eps/|x|_eps^3 along x, 1/|x|_eps orthogonal to x
  CHECK(eig[0] == doctest::Approx(0.009851853368415736).epsilon(1e-12));
  CHECK(eig[1] == doctest::Approx(0.9950371902099893).epsilon(1e-12));
}

TEST_CASE("smooth_norm_hess: PSD and matches finite differences") {
  std::mt19937 rng(103);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 3;
    const Vec x = random_vec(rng, dim, -2.0, 2.0);
    for (double eps : {1e-2, 1e-6}) {
      const Mat h = smooth_norm_hess(x, eps);
      CHECK(min_eigenvalue(h) >= -1e-12 * h.frobenius_norm());
      const Mat h_fd =
          fd_hessian([eps](const Vec& y) { return smooth_norm_grad(y, eps); }, x);
      // Absolute floor covers cancellation noise of the finite differences
      // when the exact Hessian itself is nearly zero (1-D, small eps).
      CHECK(frobenius_diff(h, h_fd) <= 1e-5 * h.frobenius_norm() + 1e-9);
    }
  }
}

TEST_CASE("energy_value: zero at origin, frozen gradient at j_s/2") {
  const PinningCell cell = benchmark_cell();
  CHECK(energy_value(cell, Vec{0.0, 0.0}) == doctest::Approx(0.0));

  // 1-D gradient at J = j_s/2: a_s * tan(pi/4) = a_s = 50
  const Vec g = energy_grad(cell, Vec{cell.j_s / 2.0});
  CHECK(g[0] == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("energy_value: diverges toward the saturation ball boundary") {
  const PinningCell cell = benchmark_cell();
  const double v_mid = energy_value(cell, Vec{0.9 * cell.j_s, 0.0});
  const double v_edge = energy_value(cell, Vec{0.999999 * cell.j_s, 0.0});
  const double v_edge9 = energy_value(cell, Vec{(1.0 - 1e-9) * cell.j_s, 0.0});
  // The ratio v(r)/v(0.9 j_s) is independent of a_s and j_s: it reaches
  // ~7.2x at 0.999999 j_s and passes 10x by (1 - 1e-9) j_s.
  CHECK(v_edge >= 7.0 * v_mid);
  CHECK(v_edge9 >= 10.0 * v_mid);
}

TEST_CASE("energy: domain violation at and beyond |J| = j_s") {
  const PinningCell cell = benchmark_cell();
  CHECK_THROWS_AS((void)energy_value(cell, Vec{cell.j_s, 0.0}), std::domain_error);
  CHECK_THROWS_AS((void)energy_grad(cell, Vec{1.1 * cell.j_s, 0.0}), std::domain_error);
  CHECK_THROWS_AS((void)energy_hess(cell, Vec{cell.j_s, 0.0}), std::domain_error);
  CHECK(energy_in_domain(cell, Vec{0.99 * cell.j_s, 0.0}));
  CHECK_FALSE(energy_in_domain(cell, Vec{cell.j_s, 0.0}));
}

TEST_CASE("energy_grad: finite differences and the r -> 0 limit") {
  const PinningCell cell = benchmark_cell();
  auto f = [&cell](const Vec& j) { return energy_value(cell, j); };

  std::mt19937 rng(104);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 3;
    Vec j = random_vec(rng, dim, -0.5, 0.5);
    const Vec g = energy_grad(cell, j);
    const Vec g_fd = fd_gradient(f, j);
    CHECK((g - g_fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
  }

  // Tiny radius: grad ~ a_s * pi/(2 j_s) * J, continuous across the switch.
  const double gamma = cell.a_s * M_PI / (2.0 * cell.j_s);
  const Vec j_tiny{1e-13 * cell.j_s, 0.0};
  const Vec g_tiny = energy_grad(cell, j_tiny);
  CHECK(g_tiny[0] == doctest::Approx(gamma * j_tiny[0]).epsilon(1e-10));
  const Vec j_small{1e-11 * cell.j_s, 0.0};  // just above the switch
  const Vec g_small = energy_grad(cell, j_small);
  CHECK(g_small[0] == doctest::Approx(gamma * j_small[0]).epsilon(1e-10));
}

TEST_CASE("energy_hess: strong convexity hess >= gamma * I (eigenvalue check)") {
  const PinningCell cell = benchmark_cell();
  const double gamma = cell.a_s * M_PI / (2.0 * cell.j_s);
  CHECK(gamma == doctest::Approx(50.8348).epsilon(1e-5));

  std::mt19937 rng(105);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + trial % 3;
    Vec j = random_vec(rng, dim, -0.6, 0.6);
    const Mat h = energy_hess(cell, j);
    CHECK(min_eigenvalue(h) >= gamma * (1.0 - 1e-10));
    const Mat h_fd = fd_hessian([&cell](const Vec& y) { return energy_grad(cell, y); }, j);
    CHECK(frobenius_diff(h, h_fd) <= 1e-5 * h.frobenius_norm());
  }

  // At the origin the Hessian is exactly gamma * I.
  const Mat h0 = energy_hess(cell, Vec{0.0, 0.0});
  CHECK(h0(0, 0) == doctest::Approx(gamma).epsilon(1e-12));
  CHECK(h0(1, 1) == doctest::Approx(gamma).epsilon(1e-12));
  CHECK(h0(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("forward_objective: gradient zero at origin for H = 0, J_prev = 0") {
  const PinningCell cell = benchmark_cell();
  const double eps = 1e-8;
  const ObjectiveEval eval =
      forward_objective(cell, Vec{0.0, 0.0}, Vec{0.0, 0.0}, eps, Vec{0.0, 0.0});
  CHECK(eval.grad.norm() == doctest::Approx(0.0));
  // The smoothed norm of a zero displacement is sqrt(eps), so the objective
  // carries a constant offset chi * sqrt(eps) even at the minimizer.
  CHECK(eval.value == doctest::Approx(cell.chi * std::sqrt(eps)).epsilon(1e-12));
}

TEST_CASE("forward_objective: finite differences at a generic point") {
  const PinningCell cell = benchmark_cell();
  const Vec h{100.0, 50.0};
  const Vec j_prev{0.0, 0.0};
  const double eps = 1e-8;
  const Vec j{0.3, 0.1};

  const ObjectiveEval eval = forward_objective(cell, h, j_prev, eps, j);
  auto f = [&](const Vec& y) { return forward_objective_value(cell, h, j_prev, eps, y); };
  const Vec g_fd = fd_gradient(f, j);
  CHECK((eval.grad - g_fd).norm() <= 1e-6 * eval.grad.norm());

  const Mat h_fd = fd_hessian(
      [&](const Vec& y) { return forward_objective(cell, h, j_prev, eps, y).grad; }, j);
  CHECK(frobenius_diff(eval.hess, h_fd) <= 1e-5 * eval.hess.frobenius_norm());

  CHECK(eval.value == doctest::Approx(f(j)).epsilon(1e-14));
}

TEST_CASE("forward_objective: strong convexity along random pairs") {
  const PinningCell cell = benchmark_cell();
  const double gamma = cell.a_s * M_PI / (2.0 * cell.j_s);
  const Vec h{120.0, -40.0};
  const Vec j_prev{0.1, -0.2};
  const double eps = 1e-8;

  std::mt19937 rng(106);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec a = random_vec(rng, 2, -0.7, 0.7);
    const Vec b = random_vec(rng, 2, -0.7, 0.7);
    const ObjectiveEval ea = forward_objective(cell, h, j_prev, eps, a);
    const double fb = forward_objective_value(cell, h, j_prev, eps, b);
    const Vec diff = b - a;
    const double quad = ea.value + ea.grad.dot(diff) + 0.5 * gamma * diff.norm_sq();
    CHECK(fb >= quad - 1e-10 * std::max(1.0, std::abs(fb)));
  }
}

TEST_CASE("inverse_objective: zero state, B = 0 has zero gradient") {
  MaterialModel model;
  model.dim = 2;
  model.cells = {PinningCell{50.0, 0.5, 0.0}, PinningCell{50.0, 0.5, 70.0},
                 PinningCell{50.0, 0.545, 140.0}};
  const MagnetizationState state = MagnetizationState::demagnetized(model);
  const std::vector<Vec> j_all(model.num_cells(), Vec(2));

  const double eps = 1e-8;
  const InverseObjectiveEval eval = inverse_objective(model, Vec{0.0, 0.0}, state, eps, j_all);
  // Constant smoothing offset: each cell contributes chi_k * sqrt(eps).
  double chi_sum = 0.0;
  for (const auto& c : model.cells) chi_sum += c.chi;
  CHECK(eval.value == doctest::Approx(chi_sum * std::sqrt(eps)).epsilon(1e-12));
  for (const auto& g : eval.grad) CHECK(g.norm() == doctest::Approx(0.0));
  CHECK(eval.nu0 == doctest::Approx(model.nu0()).epsilon(1e-15));
}

TEST_CASE("inverse_objective: K = 1 matches the forward objective structure") {
  // With one cell and H := nu0 * (B - J), the block gradient of the coupled
  // objective equals the forward cell gradient at that H.
  MaterialModel model;
  model.dim = 2;
  model.cells = {benchmark_cell()};
  MagnetizationState state = MagnetizationState::demagnetized(model);
  state.j_prev[0] = Vec{0.05, -0.1};

  const Vec b{0.9, 0.4};
  const Vec j{0.3, 0.2};
  const double eps = 1e-8;
  const InverseObjectiveEval ie = inverse_objective(model, b, state, eps, {j});

  const Vec h_implied = model.nu0() * (b - j);
  const ObjectiveEval fe = forward_objective(model.cells[0], h_implied, state.j_prev[0], eps, j);
  CHECK((ie.grad[0] - fe.grad).norm() <= 1e-9 * std::max(1.0, fe.grad.norm()));
}

TEST_CASE("inverse_objective: finite differences on the stacked variable") {
  MaterialModel model;
  model.dim = 2;
  model.cells = {PinningCell{50.0, 0.4, 0.0}, PinningCell{50.0, 0.3, 60.0},
                 PinningCell{60.0, 0.5, 140.0}};
  MagnetizationState state = MagnetizationState::demagnetized(model);
  state.j_prev[1] = Vec{0.02, 0.03};

  const Vec b{0.5, -0.2};
  const double eps = 1e-8;
  std::vector<Vec> j_all = {Vec{0.1, 0.05}, Vec{-0.04, 0.06}, Vec{0.2, -0.1}};

  const InverseObjectiveEval eval = inverse_objective(model, b, state, eps, j_all);
  CHECK(eval.value ==
        doctest::Approx(inverse_objective_value(model, b, state, eps, j_all)).epsilon(1e-14));

  // Per-block finite differences of the value against the block gradients.
  for (std::size_t k = 0; k < model.num_cells(); ++k) {
    auto fk = [&](const Vec& y) {
      std::vector<Vec> tmp = j_all;
      tmp[k] = y;
      return inverse_objective_value(model, b, state, eps, tmp);
    };
    const Vec g_fd = fd_gradient(fk, j_all[k]);
    CHECK((eval.grad[k] - g_fd).norm() <= 1e-5 * std::max(1.0, eval.grad[k].norm()));

    // Block Hessian + coupling: d grad_k / d J_k = hess_k + nu0 * I.
    const Mat h_fd = fd_hessian(
        [&](const Vec& y) {
          std::vector<Vec> tmp = j_all;
          tmp[k] = y;
          return inverse_objective(model, b, state, eps, tmp).grad[k];
        },
        j_all[k]);
    Mat expected = eval.hess_blocks[k];
    expected.add_diag(eval.nu0);
    CHECK(frobenius_diff(expected, h_fd) <= 1e-5 * expected.frobenius_norm());
  }
}

TEST_CASE("inverse_objective: domain violation when a cell saturates") {
  MaterialModel model;
  model.dim = 2;
  model.cells = {benchmark_cell()};
  const MagnetizationState state = MagnetizationState::demagnetized(model);
  const std::vector<Vec> j_bad = {Vec{model.cells[0].j_s, 0.0}};
  CHECK_THROWS_AS((void)inverse_objective(model, Vec{0.0, 0.0}, state, 1e-8, j_bad),
                  std::domain_error);
}

TEST_CASE("material and config validation") {
  CHECK_THROWS_AS((PinningCell{-1.0, 1.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((PinningCell{1.0, 0.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((PinningCell{1.0, 1.0, -2.0}.validate()), std::invalid_argument);

  MaterialModel empty;
  empty.cells.clear();
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  SolverConfig bad;
  bad.rho = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SolverConfig{};
  bad.sigma = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SolverConfig{};
  bad.eps = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  SolverConfig good;
  CHECK_NOTHROW(good.validate());
  CHECK(good.rho == doctest::Approx(0.5));
  CHECK(good.sigma == doctest::Approx(0.1));
  CHECK(good.tol == doctest::Approx(1e-8));
  CHECK(good.eps == doctest::Approx(1e-8));
}
