#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "maghyst/experiments.hpp"
#include "maghyst/types.hpp"

namespace maghyst {

/// Full-precision decimal rendering (17 significant digits), enough to
/// round-trip any double exactly.
[[nodiscard]] std::string format_full(double x);

/// Component suffixes for field columns: x, y, z.
[[nodiscard]] std::string component_name(const std::string& base, int i);

/// Loop trajectory CSV. Header for d = 2:
///   i,t,Hx,Hy,Bx,By,iters,backtracks,time_s
/// (d = 1 and d = 3 drop/add the component columns accordingly.)
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Sweep CSV with header: eps,err_forward,err_inverse
void write_eps_sweep_csv(std::ostream& os, const std::vector<EpsSweepRow>& rows);

/// Benchmark CSV with header: K,method,time_ms,mean_iters
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

/// Read flux-density samples back from a loop CSV written by
/// write_trajectory_csv (columns Bx[,By[,Bz]] located via the header).
/// Throws std::runtime_error on malformed input.
[[nodiscard]] std::vector<Vec> read_b_samples_csv(std::istream& is);

}  // namespace maghyst
