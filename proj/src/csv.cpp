#include "maghyst/csv.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace maghyst {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string component_name(const std::string& base, int i) {
  static const char* suffix[] = {"x", "y", "z"};
  return base + suffix[i];
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "i,t";
  for (int i = 0; i < traj.dim; ++i) os << ',' << component_name("H", i);
  for (int i = 0; i < traj.dim; ++i) os << ',' << component_name("B", i);
  os << ",iters,backtracks,time_s\n";
  for (std::size_t row = 0; row < traj.steps.size(); ++row) {
    const TrajectoryStep& s = traj.steps[row];
    os << row << ',' << format_full(s.t);
    for (int i = 0; i < traj.dim; ++i) os << ',' << format_full(s.h[i]);
    for (int i = 0; i < traj.dim; ++i) os << ',' << format_full(s.b[i]);
    os << ',' << s.newton_iters << ',' << s.backtracks << ',' << format_full(s.wall_time) << '\n';
  }
}

void write_eps_sweep_csv(std::ostream& os, const std::vector<EpsSweepRow>& rows) {
  os << "eps,err_forward,err_inverse\n";
  for (const auto& r : rows)
    os << format_full(r.eps) << ',' << format_full(r.err_forward) << ','
       << format_full(r.err_inverse) << '\n';
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "K,method,time_ms,mean_iters\n";
  for (const auto& r : rows)
    os << r.num_cells << ',' << to_string(r.method) << ',' << format_full(r.time_ms) << ','
       << format_full(r.mean_iters) << '\n';
}

std::vector<Vec> read_b_samples_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_b_samples_csv: empty input");
  const std::vector<std::string> header = split_csv_line(line);

  std::vector<int> b_cols;
  for (int comp = 0; comp < Vec::kMaxDim; ++comp) {
    const std::string name = component_name("B", comp);
    int found = -1;
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) found = static_cast<int>(c);
    if (found < 0) break;
    b_cols.push_back(found);
  }
  if (b_cols.empty())
    throw std::runtime_error("read_b_samples_csv: no Bx column in header");

  std::vector<Vec> samples;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    Vec b(static_cast<int>(b_cols.size()));
    for (std::size_t i = 0; i < b_cols.size(); ++i) {
      const auto col = static_cast<std::size_t>(b_cols[i]);
      if (col >= fields.size())
        throw std::runtime_error("read_b_samples_csv: short row at line " +
                                 std::to_string(line_no));
      try {
        b[static_cast<int>(i)] = std::stod(fields[col]);
      } catch (const std::exception&) {
        throw std::runtime_error("read_b_samples_csv: bad number at line " +
                                 std::to_string(line_no));
      }
    }
    samples.push_back(b);
  }
  if (samples.size() < 2)
    throw std::runtime_error("read_b_samples_csv: need at least 2 data rows");
  return samples;
}

}  // namespace maghyst
