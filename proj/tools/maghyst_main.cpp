// Command-line driver for the hysteresis material-point engine.
//
// Subcommands:
//   loop       run one hysteresis loop (forward or inverse) and write CSV
//   sweep-eps  regularization accuracy sweep, CSV: eps,err_forward,err_inverse
//   roundtrip  forward loop + inverse replay, JSON deviation summary
//   bench      wall-time/iteration table, CSV: K,method,time_ms,mean_iters
//
// Exit codes: 0 success, 1 solver failure, 2 bad arguments or bad input files.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "maghyst/csv.hpp"
#include "maghyst/experiments.hpp"
#include "maghyst/material.hpp"
#include "maghyst/oracles.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
  int num_cells = 20;
  int steps = 500;
  std::string excitation = "uni";
  std::string out_path;
  std::string config_path;
  std::string material_path;
  std::optional<double> eps;
  std::optional<double> tol;
  std::optional<double> abs_tol;
  std::optional<double> rho;
  std::optional<double> sigma;
  std::optional<int> max_newton;
  std::optional<int> max_backtracks;
};

void add_common_options(CLI::App* cmd, CommonOpts& o, bool with_k = true) {
  if (with_k)
    cmd->add_option("--K", o.num_cells, "Number of pinning cells of the benchmark material")
        ->check(CLI::PositiveNumber);
  cmd->add_option("--steps", o.steps, "Number of equidistant samples on [0,1]")
      ->check(CLI::Range(2, 10000000));
  cmd->add_option("--excitation", o.excitation, "Excitation shape")
      ->check(CLI::IsMember({"uni", "rot"}));
  cmd->add_option("--out", o.out_path, "Output file (default: stdout)");
  cmd->add_option("--config", o.config_path, "JSON file with solver settings");
  cmd->add_option("--material", o.material_path,
                  "JSON material description (overrides --K benchmark construction)");
  cmd->add_option("--eps", o.eps, "Norm regularization parameter");
  cmd->add_option("--tol", o.tol, "Relative gradient stopping tolerance");
  cmd->add_option("--abs-tol", o.abs_tol, "Absolute gradient floor (0 = auto)");
  cmd->add_option("--rho", o.rho, "Backtracking shrink factor");
  cmd->add_option("--sigma", o.sigma, "Armijo slope fraction");
  cmd->add_option("--max-newton", o.max_newton, "Newton iteration cap per solve");
  cmd->add_option("--max-backtracks", o.max_backtracks, "Backtracking cap per line search");
}

json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

/// Defaults, then optional JSON config file, then explicit flags; the CLI
/// flags always win.
maghyst::SolverConfig resolve_config(const CommonOpts& o) {
  maghyst::SolverConfig cfg;
  if (!o.config_path.empty()) {
    const json j = load_json_file(o.config_path);
    if (!j.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    cfg.eps = j.value("eps", cfg.eps);
    cfg.tol = j.value("tol", cfg.tol);
    cfg.abs_tol = j.value("abs_tol", cfg.abs_tol);
    cfg.rho = j.value("rho", cfg.rho);
    cfg.sigma = j.value("sigma", cfg.sigma);
    cfg.max_newton = j.value("max_newton", cfg.max_newton);
    cfg.max_backtracks = j.value("max_backtracks", cfg.max_backtracks);
  }
  if (o.eps) cfg.eps = *o.eps;
  if (o.tol) cfg.tol = *o.tol;
  if (o.abs_tol) cfg.abs_tol = *o.abs_tol;
  if (o.rho) cfg.rho = *o.rho;
  if (o.sigma) cfg.sigma = *o.sigma;
  if (o.max_newton) cfg.max_newton = *o.max_newton;
  if (o.max_backtracks) cfg.max_backtracks = *o.max_backtracks;
  cfg.validate();
  return cfg;
}

maghyst::MaterialModel resolve_material(const CommonOpts& o) {
  if (o.material_path.empty()) return maghyst::benchmark_material(o.num_cells);
  const json j = load_json_file(o.material_path);
  if (!j.is_object() || !j.contains("cells") || !j["cells"].is_array())
    throw std::invalid_argument("material file must hold an object with a 'cells' array");
  maghyst::MaterialModel m;
  m.mu0 = j.value("mu0", m.mu0);
  m.dim = j.value("dim", 2);
  for (const auto& c : j["cells"]) {
    maghyst::PinningCell cell;
    cell.a_s = c.value("a_s", 0.0);
    cell.j_s = c.value("j_s", 0.0);
    cell.chi = c.value("chi", 0.0);
    m.cells.push_back(cell);
  }
  m.validate();
  return m;
}

maghyst::ExcitationSequence resolve_excitation(const CommonOpts& o) {
  if (o.excitation == "rot") return maghyst::make_rot_excitation(o.steps);
  return maghyst::make_uni_excitation(o.steps);
}

/// Stream the payload to --out or stdout.
void emit(const CommonOpts& o, const std::string& payload) {
  if (o.out_path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream os(o.out_path);
  if (!os) throw std::invalid_argument("cannot open output file: " + o.out_path);
  os << payload;
}

int run_loop_cmd(const CommonOpts& o, const std::string& mode, const std::string& method,
                 const std::string& input_b_path) {
  const maghyst::SolverConfig cfg = resolve_config(o);
  const maghyst::MaterialModel model = resolve_material(o);

  maghyst::OperatorMode op_mode =
      mode == "inverse" ? maghyst::OperatorMode::Inverse : maghyst::OperatorMode::Forward;
  maghyst::DirectionMethod dir =
      method == "dense" ? maghyst::DirectionMethod::Dense : maghyst::DirectionMethod::Schur;

  maghyst::ExcitationSequence exc;
  if (op_mode == maghyst::OperatorMode::Inverse) {
    if (input_b_path.empty())
      throw std::invalid_argument("loop --mode inverse requires --input-b <loop.csv>");
    std::ifstream is(input_b_path);
    if (!is) throw std::invalid_argument("cannot open file: " + input_b_path);
    try {
      exc = maghyst::make_file_excitation(maghyst::read_b_samples_csv(is));
    } catch (const std::runtime_error& e) {
      throw std::invalid_argument(e.what());
    }
  } else {
    exc = resolve_excitation(o);
  }

  const maghyst::Trajectory traj = maghyst::run_loop(model, cfg, exc, op_mode, dir);
  std::ostringstream os;
  maghyst::write_trajectory_csv(os, traj);
  emit(o, os.str());
  return 0;
}

int run_sweep_cmd(const CommonOpts& o, std::vector<double> eps_list) {
  if (eps_list.empty())
    eps_list = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  if (!o.material_path.empty())
    throw std::invalid_argument("sweep-eps always uses the --K benchmark material");
  const maghyst::ExcitationSequence exc = resolve_excitation(o);
  const auto rows = maghyst::eps_sweep(o.num_cells, exc, eps_list);
  std::ostringstream os;
  maghyst::write_eps_sweep_csv(os, rows);
  emit(o, os.str());
  return 0;
}

int run_roundtrip_cmd(const CommonOpts& o) {
  const maghyst::SolverConfig cfg = resolve_config(o);
  const maghyst::MaterialModel model = resolve_material(o);
  const maghyst::ExcitationSequence exc = resolve_excitation(o);

  const maghyst::Trajectory fwd =
      maghyst::run_loop(model, cfg, exc, maghyst::OperatorMode::Forward);
  const maghyst::ExcitationSequence b_input = maghyst::make_file_excitation(fwd.b_samples());
  const maghyst::Trajectory inv =
      maghyst::run_loop(model, cfg, b_input, maghyst::OperatorMode::Inverse);

  double h_max = 0.0;
  for (const auto& s : fwd.steps) h_max = std::max(h_max, s.h.norm());
  double dev_max = 0.0;
  double dev_sum = 0.0;
  for (std::size_t i = 0; i < fwd.steps.size(); ++i) {
    const double dev = (inv.steps[i].h - fwd.steps[i].h).norm();
    dev_max = std::max(dev_max, dev);
    dev_sum += dev;
  }
  const double dev_mean = dev_sum / static_cast<double>(fwd.steps.size());

  json j;
  j["excitation"] = to_string(exc.kind);
  j["K"] = model.num_cells();
  j["steps"] = o.steps;
  j["eps"] = cfg.eps;
  j["tol"] = cfg.tol;
  j["max_rel_err"] = h_max > 0.0 ? dev_max / h_max : 0.0;
  j["mean_rel_err"] = h_max > 0.0 ? dev_mean / h_max : 0.0;
  j["rel_err_sq"] = maghyst::relative_error_sq(inv.h_samples(), fwd.h_samples());
  emit(o, j.dump(2) + "\n");
  return 0;
}

int run_bench_cmd(const CommonOpts& o, const std::vector<int>& k_list,
                  const std::vector<std::string>& method_names) {
  std::vector<maghyst::BenchMethod> methods;
  for (const auto& name : method_names) {
    if (name == "forward")
      methods.push_back(maghyst::BenchMethod::Forward);
    else if (name == "inverse-dense")
      methods.push_back(maghyst::BenchMethod::InverseDense);
    else if (name == "inverse-schur")
      methods.push_back(maghyst::BenchMethod::InverseSchur);
    else
      throw std::invalid_argument("unknown bench method: " + name);
  }
  const maghyst::ExcitationSequence exc = resolve_excitation(o);
  const auto rows = maghyst::bench(k_list, methods, exc);
  std::ostringstream os;
  maghyst::write_bench_csv(os, rows);
  emit(o, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-based vector hysteresis engine (forward B(H) / inverse H(B))"};
  app.require_subcommand(1);

  CommonOpts loop_opts;
  std::string loop_mode = "forward";
  std::string loop_method = "schur";
  std::string loop_input_b;
  CLI::App* loop = app.add_subcommand("loop", "Run one hysteresis loop and write CSV");
  add_common_options(loop, loop_opts);
  loop->add_option("--mode", loop_mode, "Operator to evaluate")
      ->check(CLI::IsMember({"forward", "inverse"}));
  loop->add_option("--method", loop_method, "Inverse Newton direction solver")
      ->check(CLI::IsMember({"dense", "schur"}));
  loop->add_option("--input-b", loop_input_b, "Loop CSV whose B columns drive inverse mode");

  CommonOpts sweep_opts;
  std::vector<double> sweep_eps_list;
  CLI::App* sweep = app.add_subcommand("sweep-eps", "Regularization accuracy sweep (CSV)");
  add_common_options(sweep, sweep_opts);
  sweep->add_option("--eps-list", sweep_eps_list,
                    "Descending regularization values (default 1e-2..1e-8)")
      ->delimiter(',');

  CommonOpts rt_opts;
  CLI::App* roundtrip =
      app.add_subcommand("roundtrip", "Forward loop + inverse replay, JSON deviations");
  add_common_options(roundtrip, rt_opts);

  CommonOpts bench_opts;
  std::vector<int> bench_k = {5, 10, 20, 50, 100};
  std::vector<std::string> bench_methods = {"forward", "inverse-dense", "inverse-schur"};
  CLI::App* bench_cmd = app.add_subcommand("bench", "Wall-time/iteration benchmark (CSV)");
  add_common_options(bench_cmd, bench_opts, /*with_k=*/false);
  bench_cmd->add_option("--K", bench_k, "Cell counts to benchmark (comma separated)")
      ->delimiter(',');
  bench_cmd->add_option("--methods", bench_methods, "Solvers to time (comma separated)")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
    if (loop->parsed()) return run_loop_cmd(loop_opts, loop_mode, loop_method, loop_input_b);
    if (sweep->parsed()) return run_sweep_cmd(sweep_opts, sweep_eps_list);
    if (roundtrip->parsed()) return run_roundtrip_cmd(rt_opts);
    if (bench_cmd->parsed()) return run_bench_cmd(bench_opts, bench_k, bench_methods);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help/error text
    return code == 0 ? 0 : 2;
  } catch (const maghyst::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
