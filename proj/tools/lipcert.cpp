// lipcert: generate networks, estimate and verify Lipschitz certificates,
// run benchmark grids.
//
// Exit codes: 0 success, 2 bad input (parse, shape, arguments),
// 3 numeric failure or timeout, 4 certificate verification failure.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lipcert/bench.hpp"
#include "lipcert/cascade.hpp"
#include "lipcert/errors.hpp"
#include "lipcert/estimators.hpp"
#include "lipcert/network.hpp"
#include "lipcert/spectral.hpp"

namespace {

using namespace lipcert;

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVerify = 4;

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::input: return kExitInput;
    case ErrorKind::numeric: return kExitNumeric;
    case ErrorKind::verification: return kExitVerify;
    case ErrorKind::timeout: return kExitNumeric;
  }
  return kExitNumeric;
}

struct GenerateArgs {
  std::size_t layers = 0;
  std::size_t neurons = 0;
  std::uint64_t seed = 0;
  std::string out;
  double norm_lo = 0.4;
  double norm_hi = 1.8;
  std::size_t input_dim = 4;
  std::size_t output_dim = 1;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.layers == 0) throw ArgumentError("--layers must be positive");
  if (a.neurons == 0) throw ArgumentError("--neurons must be positive");
  if (a.input_dim == 0 || a.output_dim == 0) throw ArgumentError("input and output dimensions must be positive");
  const auto dims = hidden_dims(a.layers, a.neurons, a.input_dim, a.output_dim);
  const Network net = random_network(dims, a.seed, {a.norm_lo, a.norm_hi});
  save_network(net, a.out);
  for (std::size_t i = 0; i < net.depth(); ++i)
    std::printf("layer %zu: %zux%zu  ||W||_2 = %.12f\n", i + 1, net.weight(i).rows(), net.weight(i).cols(),
                spectral_norm(net.weight(i)));
  return 0;
}

struct EstimateArgs {
  std::string net;
  std::string algo = "fast";
  std::string out;
  double tol = 1e-8;
  double slack = 1e-6;
  bool verify = false;
  bool bisection = false;
  double timeout = 0.0;
};

int cmd_estimate(const EstimateArgs& a) {
  const Network net = load_network(a.net);
  EstimateOptions opts;
  opts.algo = algo_from_string(a.algo);
  opts.sdp_tol = a.tol;
  opts.slack = a.slack;
  opts.verify = a.verify;
  opts.bisection = a.bisection;
  if (a.timeout > 0.0) opts.deadline = Deadline::after(a.timeout);

  const auto t0 = std::chrono::steady_clock::now();
  const Certificate cert = estimate(net, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!a.out.empty()) save_certificate(cert, a.out);

  std::printf("algo=%s\n", to_string(cert.algo).c_str());
  std::printf("L=%.6f\n", cert.L);
  std::printf("inv_F=%.17g\n", cert.inv_F);
  std::printf("wall_time_s=%.6f\n", secs);
  if (!cert.fallback_layers.empty()) {
    std::printf("closed-form fallback at layers:");
    for (auto l : cert.fallback_layers) std::printf(" %zu", l);
    std::printf("\n");
  }
  return 0;
}

struct VerifyArgs {
  std::string net;
  std::string cert;
  std::string mode = "both";
  double slack = 1e-6;
};

int cmd_verify(const VerifyArgs& a) {
  const Network net = load_network(a.net);
  const Certificate cert = load_certificate(a.cert);
  const bool chain = a.mode == "chain" || a.mode == "both";
  const bool mono = a.mode == "monolithic" || a.mode == "both";
  if (!chain && !mono) throw ArgumentError("--mode must be chain, monolithic or both");

  bool ok = true;
  std::optional<bool> chain_ok, mono_ok;
  if (chain) {
    const ChainReport r = verify_chain(net, cert, a.slack);
    for (std::size_t i = 0; i < r.stage_margins.size(); ++i) {
      const bool last = i + 1 == r.stage_margins.size() && r.ok;
      std::printf("chain stage %zu%s: margin %.6e\n", i + 1, last ? " (output)" : "", r.stage_margins[i]);
    }
    if (r.failed_stage) std::printf("chain: failed at stage %zu\n", *r.failed_stage);
    std::printf("chain: %s\n", r.ok ? "ok" : "FAILED");
    chain_ok = r.ok;
    ok = ok && r.ok;
  }
  if (mono) {
    const MonolithicReport r = verify_monolithic(net, cert, a.slack);
    std::printf("monolithic: min_eig %.6e  %s\n", r.min_eig, r.ok ? "ok" : "FAILED");
    mono_ok = r.ok;
    ok = ok && r.ok;
  }
  if (chain_ok && mono_ok) std::printf("verifiers %s\n", *chain_ok == *mono_ok ? "agree" : "DISAGREE");
  std::printf("L=%.6f\n", cert.L);
  return ok ? 0 : kExitVerify;
}

struct BenchArgs {
  std::vector<std::size_t> depths;
  std::vector<std::size_t> widths;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> algos{"fast", "trivial"};
  double timeout = 900.0;
  std::string csv;
  std::string svg;
  std::size_t threads = 0;
};

int cmd_bench(const BenchArgs& a) {
  BenchGrid grid;
  grid.depths = a.depths;
  grid.widths = a.widths;
  grid.seeds = a.seeds;
  for (const auto& s : a.algos) grid.algos.push_back(algo_from_string(s));
  if (!(a.timeout > 0.0)) throw ArgumentError("--timeout must be positive");
  grid.timeout_s = a.timeout;

  const auto records = run_bench(grid, a.threads);
  {
    std::ofstream f(a.csv, std::ios::trunc);
    if (!f) throw IoError("cannot write " + a.csv);
    write_csv(records, f);
  }
  if (!a.svg.empty()) {
    std::ofstream f(a.svg, std::ios::trunc);
    if (!f) throw IoError("cannot write " + a.svg);
    f << render_svg(records);
  }

  std::size_t timeouts = 0, errors = 0;
  for (const auto& r : records) {
    if (r.status == RunStatus::timeout) ++timeouts;
    if (r.status == RunStatus::error) {
      ++errors;
      std::fprintf(stderr, "error: depth %zu width %zu seed %llu %s: %s\n", r.depth, r.width,
                   static_cast<unsigned long long>(r.seed), to_string(r.algo).c_str(), r.message.c_str());
    }
  }
  std::printf("%zu records written to %s\n", records.size(), a.csv.c_str());
  if (timeouts > 0) std::fprintf(stderr, "warning: %zu runs hit the %.3g s time limit\n", timeouts, a.timeout);
  return errors > 0 ? kExitNumeric : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lipschitz certificates for feed-forward networks"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a seeded random network");
  g->add_option("--layers", gen.layers, "number of weight layers")->required();
  g->add_option("--neurons", gen.neurons, "hidden width")->required();
  g->add_option("--seed", gen.seed, "RNG seed")->required();
  g->add_option("--out", gen.out, "output file (.json or binary)")->required();
  g->add_option("--norm-lo", gen.norm_lo, "lower end of the spectral norm range");
  g->add_option("--norm-hi", gen.norm_hi, "upper end of the spectral norm range");
  g->add_option("--input-dim", gen.input_dim, "input dimension");
  g->add_option("--output-dim", gen.output_dim, "output dimension");

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "estimate a Lipschitz upper bound");
  e->add_option("--net", est.net, "network file")->required();
  e->add_option("--algo", est.algo, "fast | sdp | trivial | joint-neuron | joint-layer");
  e->add_option("--out", est.out, "certificate JSON output");
  e->add_option("--tol", est.tol, "relative SDP tolerance");
  e->add_option("--slack", est.slack, "verification slack on F");
  e->add_flag("--verify", est.verify, "replay the certificate before writing it");
  e->add_flag("--bisection", est.bisection, "per-layer solves by bisection on c");
  e->add_option("--timeout", est.timeout, "time limit in seconds");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "replay a certificate");
  v->add_option("--net", ver.net, "network file")->required();
  v->add_option("--cert", ver.cert, "certificate JSON")->required();
  v->add_option("--mode", ver.mode, "chain | monolithic | both")
      ->check(CLI::IsMember({"chain", "monolithic", "both"}));
  v->add_option("--slack", ver.slack, "verification slack on F");

  BenchArgs ben;
  auto* b = app.add_subcommand("bench", "benchmark grid over random networks");
  b->add_option("--depths", ben.depths, "comma-separated depths")->required()->delimiter(',');
  b->add_option("--widths", ben.widths, "comma-separated widths")->required()->delimiter(',');
  b->add_option("--seeds", ben.seeds, "comma-separated seeds")->delimiter(',');
  b->add_option("--algos", ben.algos, "comma-separated algorithms")->delimiter(',');
  b->add_option("--timeout", ben.timeout, "per-run time limit in seconds");
  b->add_option("--csv", ben.csv, "CSV output")->required();
  b->add_option("--svg", ben.svg, "SVG chart output");
  b->add_option("--threads", ben.threads, "worker count (default ECLIPSE_THREADS or all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitInput;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*e) return cmd_estimate(est);
    if (*v) return cmd_verify(ver);
    if (*b) return cmd_bench(ben);
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return exit_code(err);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitNumeric;
  }
  return 0;
}
