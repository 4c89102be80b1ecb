#include "lipcert/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iterator>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "lipcert/errors.hpp"
#include "lipcert/estimators.hpp"
#include "lipcert/kernels.hpp"

namespace lipcert {

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::timeout: return "timeout";
    case RunStatus::error: return "error";
  }
  return "error";
}

std::size_t bench_threads() {
  if (const char* env = std::getenv("ECLIPSE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return static_cast<std::size_t>(std::max(1, kernels::max_threads()));
}

namespace {

struct Cell {
  std::size_t depth, width;
  std::uint64_t seed;
};

std::vector<BenchRecord> run_cell(const BenchGrid& grid, const Cell& cell) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<BenchRecord> out;
  const auto dims = hidden_dims(cell.depth, cell.width, grid.input_dim, grid.output_dim);
  const Network net = random_network(dims, cell.seed, grid.norms);
  const double trivial = estimate_trivial(net).L;

  for (Algo algo : grid.algos) {
    BenchRecord rec{cell.depth, cell.width, cell.seed, algo, nan, nan, 0.0, RunStatus::ok, {}};
    EstimateOptions opts;
    opts.algo = algo;
    opts.sdp_tol = grid.sdp_tol;
    opts.verify = false;
    opts.deadline = Deadline::after(grid.timeout_s);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Certificate cert = estimate(net, opts);
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (algo != Algo::trivial && net.depth() > 1 && !verify_chain(net, cert).ok) {
        rec.status = RunStatus::error;
        rec.message = "certificate failed replay";
      } else {
        rec.L = cert.L;
        rec.L_normalized = cert.L / trivial;
      }
    } catch (const Timeout& e) {
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.status = RunStatus::timeout;
      rec.message = e.what();
    } catch (const Error& e) {
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.status = RunStatus::error;
      rec.message = e.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<BenchRecord> run_bench(const BenchGrid& grid, std::size_t threads) {
  if (grid.algos.empty()) throw ArgumentError("bench: no algorithms given");
  std::vector<Cell> cells;
  for (std::size_t d : grid.depths)
    for (std::size_t w : grid.widths)
      for (std::uint64_t s : grid.seeds) {
        if (d == 0 || w == 0) throw ArgumentError("bench: depths and widths must be positive");
        cells.push_back({d, w, s});
      }
  if (threads == 0) threads = bench_threads();

  std::vector<std::vector<BenchRecord>> results(cells.size());
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(threads))
  for (std::ptrdiff_t i = 0; i < n; ++i) results[i] = run_cell(grid, cells[i]);

  std::vector<BenchRecord> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  const auto algo_rank = [&](Algo a) { return std::find(grid.algos.begin(), grid.algos.end(), a) - grid.algos.begin(); };
  std::stable_sort(out.begin(), out.end(), [&](const BenchRecord& a, const BenchRecord& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    if (a.width != b.width) return a.width < b.width;
    if (a.seed != b.seed) return a.seed < b.seed;
    return algo_rank(a.algo) < algo_rank(b.algo);
  });
  return out;
}

void write_csv(const std::vector<BenchRecord>& records, std::ostream& out) {
  out << kCsvHeader << '\n';
  std::ostringstream line;
  for (const auto& r : records) {
    line.str({});
    line << std::setprecision(17) << r.depth << ',' << r.width << ',' << r.seed << ',' << to_string(r.algo) << ','
         << r.L << ',' << r.L_normalized << ',' << r.wall_time_s << ',' << to_string(r.status) << '\n';
    out << line.str();
  }
}

// svg -------------------------------------------------------------------------

namespace {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

void chart(std::ostringstream& svg, const std::vector<Series>& series, double ox, double oy, const std::string& title,
           const std::string& ylabel) {
  const double w = 420, h = 300, left = 60, bottom = 40, top = 30;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x), xmax = std::max(xmax, x);
      ymin = std::min(ymin, y), ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  ymin = std::min(ymin, 0.0);
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double pw = w - left - 20, ph = h - top - bottom;
  const auto px = [&](double x) { return ox + left + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return oy + top + ph - (y - ymin) / (ymax - ymin) * ph; };

  svg << "<text x=\"" << ox + w / 2 << "\" y=\"" << oy + 18 << "\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
  svg << "<rect x=\"" << ox + left << "\" y=\"" << oy + top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4, yv = ymin + (ymax - ymin) * k / 4;
    svg << "<text x=\"" << px(xv) << "\" y=\"" << oy + top + ph + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
        << fmt(xv) << "</text>\n";
    svg << "<text x=\"" << ox + left - 4 << "\" y=\"" << py(yv) + 3 << "\" text-anchor=\"end\" font-size=\"10\">"
        << fmt(yv) << "</text>\n";
  }
  svg << "<text x=\"" << ox + left + pw / 2 << "\" y=\"" << oy + h - 6
      << "\" text-anchor=\"middle\" font-size=\"11\">depth</text>\n";
  svg << "<text x=\"" << ox + 14 << "\" y=\"" << oy + top + ph / 2 << "\" font-size=\"11\" transform=\"rotate(-90 "
      << ox + 14 << ' ' << oy + top + ph / 2 << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : series[i].points) svg << px(x) << ',' << py(y) << ' ';
    svg << "\"/>\n";
    for (auto [x, y] : series[i].points)
      svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << ox + left + 6 << "\" y=\"" << oy + top + 12 + 12 * i << "\" font-size=\"10\" fill=\"" << color
        << "\">" << series[i].label << "</text>\n";
  }
}

}  // namespace

std::string render_svg(const std::vector<BenchRecord>& records) {
  // (algo, width) -> depth -> (sum L_norm, sum time, count)
  std::map<std::pair<std::string, std::size_t>, std::map<std::size_t, std::array<double, 3>>> acc;
  for (const auto& r : records) {
    if (r.status != RunStatus::ok) continue;
    auto& a = acc[{to_string(r.algo), r.width}][r.depth];
    a[0] += r.L_normalized;
    a[1] += r.wall_time_s;
    a[2] += 1;
  }
  std::vector<Series> bound, time;
  for (const auto& [key, by_depth] : acc) {
    const std::string label = key.first + " w=" + std::to_string(key.second);
    Series b{label, {}}, t{label, {}};
    for (const auto& [d, a] : by_depth) {
      b.points.emplace_back(static_cast<double>(d), a[0] / a[2]);
      t.points.emplace_back(static_cast<double>(d), a[1] / a[2]);
    }
    bound.push_back(std::move(b));
    time.push_back(std::move(t));
  }
  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"860\" height=\"320\" viewBox=\"0 0 860 320\" "
         "font-family=\"sans-serif\">\n"
      << "<rect width=\"860\" height=\"320\" fill=\"white\"/>\n";
  chart(svg, bound, 0, 10, "Normalized bound (L / trivial)", "L / trivial");
  chart(svg, time, 430, 10, "Wall time", "seconds");
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lipcert
