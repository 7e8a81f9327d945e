#include "maghyst/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace maghyst {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double sample_time(int i, int n) {
  if (n < 2) throw std::invalid_argument("excitation: need at least 2 samples");
  if (i < 0 || i >= n) throw std::invalid_argument("excitation: sample index out of range");
  return static_cast<double>(i) / static_cast<double>(n - 1);
}

}  // namespace

MaterialModel benchmark_material(int num_cells, int dim) {
  if (num_cells < 1) throw std::invalid_argument("benchmark_material: need at least one cell");
  MaterialModel m;
  m.dim = dim;
  m.cells.reserve(static_cast<std::size_t>(num_cells));
  const double total_saturation = 1.545;  // [T]
  for (int k = 1; k <= num_cells; ++k) {
    PinningCell cell;
    cell.a_s = 50.0;
    cell.j_s = total_saturation / num_cells;
    cell.chi = num_cells == 1
                   ? 0.0
                   : 140.0 * static_cast<double>(k - 1) / static_cast<double>(num_cells - 1);
    m.cells.push_back(cell);
  }
  m.validate();
  return m;
}

Vec excitation_uni(int i, int n) {
  const double t = sample_time(i, n);
  return Vec{500.0 * std::sin(2.5 * M_PI * t), 0.0};
}

Vec excitation_rot(int i, int n) {
  const double t = sample_time(i, n);
  const double hm = 500.0 * std::min(t, 0.75);
  return Vec{hm * std::sin(5.0 * M_PI * t), hm * std::cos(5.0 * M_PI * t)};
}

ExcitationSequence make_uni_excitation(int steps) {
  ExcitationSequence e;
  e.kind = ExcitationSequence::Kind::Uni;
  e.samples.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) e.samples.push_back(excitation_uni(i, steps));
  return e;
}

ExcitationSequence make_rot_excitation(int steps) {
  ExcitationSequence e;
  e.kind = ExcitationSequence::Kind::Rot;
  e.samples.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) e.samples.push_back(excitation_rot(i, steps));
  return e;
}

ExcitationSequence make_file_excitation(std::vector<Vec> samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("make_file_excitation: need at least 2 samples");
  ExcitationSequence e;
  e.kind = ExcitationSequence::Kind::File;
  e.samples = std::move(samples);
  return e;
}

const char* to_string(ExcitationSequence::Kind k) {
  switch (k) {
    case ExcitationSequence::Kind::Uni:
      return "uni";
    case ExcitationSequence::Kind::Rot:
      return "rot";
    default:
      return "file";
  }
}

std::vector<Vec> Trajectory::h_samples() const {
  std::vector<Vec> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.h);
  return out;
}

std::vector<Vec> Trajectory::b_samples() const {
  std::vector<Vec> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.b);
  return out;
}

Trajectory run_loop(const MaterialModel& model, const SolverConfig& cfg,
                    const ExcitationSequence& excitation, OperatorMode mode,
                    DirectionMethod method) {
  model.validate();
  cfg.validate();
  const int n = excitation.steps();
  if (n < 2) throw std::invalid_argument("run_loop: need at least 2 excitation samples");

  Trajectory traj;
  traj.dim = model.dim;
  traj.steps.reserve(static_cast<std::size_t>(n));

  MagnetizationState state = MagnetizationState::demagnetized(model);
  InverseWorkspace ws;  // reused across steps so hot iterations never allocate

  const auto loop_start = Clock::now();
  for (int i = 0; i < n; ++i) {
    const Vec& input = excitation.samples[static_cast<std::size_t>(i)];
    if (input.dim() != model.dim)
      throw std::invalid_argument("run_loop: excitation dimension mismatch");

    TrajectoryStep step;
    step.t = sample_time(i, n);
    const auto step_start = Clock::now();
    try {
      if (mode == OperatorMode::Forward) {
        ForwardResult res = evaluate_forward(model, cfg, input, state);
        step.h = input;
        step.b = res.b;
        step.newton_iters = static_cast<int>(res.stats.total_newton_iters);
        step.backtracks = static_cast<int>(res.stats.total_backtracks);
        state = std::move(res.state);
      } else {
        InverseResult res = evaluate_inverse(model, cfg, input, state, method, &ws);
        step.h = res.h;
        step.b = input;
        step.newton_iters = res.stats.newton_iters;
        step.backtracks = res.stats.backtracks;
        state = std::move(res.state);
      }
    } catch (const SolverError& e) {
      throw SolverError("run_loop: step " + std::to_string(i) + ": " + e.what());
    }
    step.wall_time = seconds_since(step_start);
    step.j = state.j_prev;
    traj.total_newton_iters += step.newton_iters;
    traj.total_backtracks += step.backtracks;
    traj.steps.push_back(std::move(step));
  }
  traj.total_wall_time = seconds_since(loop_start);
  return traj;
}

double relative_error_sq(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("relative_error_sq: sequences must be equal-length, non-empty");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]).norm_sq();
    den += b[i].norm_sq();
  }
  if (den == 0.0)
    throw std::invalid_argument("relative_error_sq: reference sequence is identically zero");
  return num / den;
}

double dissipation_increment(const MaterialModel& model, const MagnetizationState& before,
                             const MagnetizationState& after) {
  if (before.j_prev.size() != model.num_cells() || after.j_prev.size() != model.num_cells())
    throw std::invalid_argument("dissipation_increment: cell count mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < model.num_cells(); ++k)
    d += model.cells[k].chi * (after.j_prev[k] - before.j_prev[k]).norm();
  return d;
}

std::vector<EpsSweepRow> eps_sweep(int num_cells, const ExcitationSequence& excitation,
                                   const std::vector<double>& eps_list) {
  if (eps_list.empty()) throw std::invalid_argument("eps_sweep: eps_list must be non-empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw std::invalid_argument("eps_sweep: eps values must be > 0");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
      throw std::invalid_argument("eps_sweep: eps_list must be strictly descending");
  }

  const MaterialModel model = benchmark_material(num_cells);

  SolverConfig ref_cfg;
  ref_cfg.eps = 1e-14;
  ref_cfg.tol = 1e-12;
  const Trajectory ref_forward = run_loop(model, ref_cfg, excitation, OperatorMode::Forward);
  const ExcitationSequence b_input = make_file_excitation(ref_forward.b_samples());
  const Trajectory ref_inverse = run_loop(model, ref_cfg, b_input, OperatorMode::Inverse);
  const std::vector<Vec> b_ref = ref_forward.b_samples();
  const std::vector<Vec> h_ref = ref_inverse.h_samples();

  std::vector<EpsSweepRow> rows;
  rows.reserve(eps_list.size());
  for (double eps : eps_list) {
    SolverConfig cfg;
    cfg.eps = eps;
    cfg.tol = eps;  // tolerance is tied to the regularization level
    EpsSweepRow row;
    row.eps = eps;
    const Trajectory fwd = run_loop(model, cfg, excitation, OperatorMode::Forward);
    row.err_forward = relative_error_sq(fwd.b_samples(), b_ref);
    // Inverse-mode inputs are always the B-trajectory of a forward run at the
    // same (eps, tol), so each row replays its own forward output.
    const Trajectory inv =
        run_loop(model, cfg, make_file_excitation(fwd.b_samples()), OperatorMode::Inverse);
    row.err_inverse = relative_error_sq(inv.h_samples(), h_ref);
    rows.push_back(row);
  }
  return rows;
}

const char* to_string(BenchMethod m) {
  switch (m) {
    case BenchMethod::Forward:
      return "forward";
    case BenchMethod::InverseDense:
      return "inverse-dense";
    default:
      return "inverse-schur";
  }
}

std::vector<BenchRow> bench(const std::vector<int>& k_list,
                            const std::vector<BenchMethod>& methods,
                            const ExcitationSequence& excitation) {
  if (k_list.empty() || methods.empty())
    throw std::invalid_argument("bench: k_list and methods must be non-empty");

  SolverConfig cfg;
  cfg.eps = 1e-8;
  cfg.tol = 1e-8;

  // Untimed warm-up of all three code paths so the first measured rows pay no
  // cold-cache penalty.
  {
    const MaterialModel warm = benchmark_material(2);
    ExcitationSequence short_exc = excitation;
    short_exc.samples.resize(std::min<std::size_t>(short_exc.samples.size(), 50));
    const Trajectory wf = run_loop(warm, cfg, short_exc, OperatorMode::Forward);
    const ExcitationSequence wb = make_file_excitation(wf.b_samples());
    (void)run_loop(warm, cfg, wb, OperatorMode::Inverse, DirectionMethod::Dense);
    (void)run_loop(warm, cfg, wb, OperatorMode::Inverse, DirectionMethod::Schur);
  }

  std::vector<BenchRow> rows;
  rows.reserve(k_list.size() * methods.size());
  for (int K : k_list) {
    const MaterialModel model = benchmark_material(K);
    const int n = excitation.steps();

    // Inverse runs replay the flux densities of an identical forward run;
    // generating them is not part of any timed measurement.
    ExcitationSequence b_input;
    const bool needs_b = std::any_of(methods.begin(), methods.end(), [](BenchMethod m) {
      return m != BenchMethod::Forward;
    });
    if (needs_b)
      b_input =
          make_file_excitation(run_loop(model, cfg, excitation, OperatorMode::Forward).b_samples());

    for (BenchMethod method : methods) {
      BenchRow row;
      row.num_cells = K;
      row.method = method;
      Trajectory traj;
      switch (method) {
        case BenchMethod::Forward:
          traj = run_loop(model, cfg, excitation, OperatorMode::Forward);
          row.mean_iters = static_cast<double>(traj.total_newton_iters) /
                           (static_cast<double>(n) * static_cast<double>(K));
          break;
        case BenchMethod::InverseDense:
          traj = run_loop(model, cfg, b_input, OperatorMode::Inverse, DirectionMethod::Dense);
          row.mean_iters = static_cast<double>(traj.total_newton_iters) / static_cast<double>(n);
          break;
        case BenchMethod::InverseSchur:
          traj = run_loop(model, cfg, b_input, OperatorMode::Inverse, DirectionMethod::Schur);
          row.mean_iters = static_cast<double>(traj.total_newton_iters) / static_cast<double>(n);
          break;
      }
      row.time_ms = traj.total_wall_time * 1e3;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace maghyst
