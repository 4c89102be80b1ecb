#pragma once

// Benchmark grids over seeded random networks: one record per
// (depth, width, seed, algorithm), CSV output and static SVG charts.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lipcert/cascade.hpp"
#include "lipcert/network.hpp"

namespace lipcert {

enum class RunStatus { ok, timeout, error };

std::string to_string(RunStatus s);

struct BenchRecord {
  std::size_t depth = 0;
  std::size_t width = 0;
  std::uint64_t seed = 0;
  Algo algo = Algo::fast;
  double L = 0.0;             // NaN unless status == ok
  double L_normalized = 0.0;  // L / trivial bound
  double wall_time_s = 0.0;
  RunStatus status = RunStatus::ok;
  std::string message;  // error text, not part of the CSV
};

struct BenchGrid {
  std::vector<std::size_t> depths;
  std::vector<std::size_t> widths;
  std::vector<std::uint64_t> seeds;
  std::vector<Algo> algos;
  double timeout_s = 900.0;  // per run
  std::size_t input_dim = 4;
  std::size_t output_dim = 1;
  NormRange norms;
  double sdp_tol = 1e-8;
};

/// ECLIPSE_THREADS if set to a positive integer, otherwise the OpenMP default.
std::size_t bench_threads();

/// Runs every cell of the grid; cells are spread over `threads` workers
/// (0 means bench_threads()). The result is sorted by (depth, width, seed)
/// and then by the order of grid.algos, independent of completion order.
std::vector<BenchRecord> run_bench(const BenchGrid& grid, std::size_t threads = 0);

inline constexpr const char* kCsvHeader = "depth,width,seed,algo,L,L_normalized,wall_time_s,status";

void write_csv(const std::vector<BenchRecord>& records, std::ostream& out);

/// Two line charts, normalized bound vs depth and wall time vs depth, one
/// series per (algorithm, width) averaged over seeds. Timed-out runs are skipped.
std::string render_svg(const std::vector<BenchRecord>& records);

}  // namespace lipcert
