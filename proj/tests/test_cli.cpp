#include <filesystem>
#include <sstream>

#include "cli_util.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

TEST_CASE("generate is deterministic and prints norms") {
  const auto dir = cli::scratch("gen");
  const auto a = cli::run("generate --layers 5 --neurons 20 --seed 1 --out " + (dir / "a.ecl").string());
  const auto b = cli::run("generate --layers 5 --neurons 20 --seed 1 --out " + (dir / "b.ecl").string());
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(cli::slurp(dir / "a.ecl") == cli::slurp(dir / "b.ecl"));
  std::istringstream lines(a.output);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto pos = line.find("= ");
    REQUIRE(pos != std::string::npos);
    const double norm = std::stod(line.substr(pos + 2));
    CHECK(norm >= 0.4 - 1e-10);
    CHECK(norm <= 1.8 + 1e-10);
    ++count;
  }
  CHECK(count == 5);
  CHECK(cli::run("generate --layers 5 --neurons 0 --seed 1 --out " + (dir / "c.ecl").string()).code == 2);
  CHECK(cli::run("generate --layers 5 --seed 1 --out " + (dir / "c.ecl").string()).code == 2);
  CHECK(cli::run("generate --layers 2 --neurons 3 --seed 1 --norm-lo 2 --norm-hi 1 --out x.ecl").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("estimate and verify round trip") {
  const auto dir = cli::scratch("est");
  const auto net = (dir / "id.json").string();
  cli::write(net, cli::kIdentity3);
  const auto cert = (dir / "cert.json").string();

  const auto fast = cli::run("estimate --net " + net + " --algo fast --verify --out " + cert);
  REQUIRE(fast.code == 0);
  CHECK(fast.output.find("L=1.000000") != std::string::npos);
  const auto ver = cli::run("verify --net " + net + " --cert " + cert + " --mode both");
  CHECK(ver.code == 0);
  CHECK(ver.output.find("verifiers agree") != std::string::npos);

  // halved bound
  cli::write(dir / "half.json", R"({"algo":"fast","lambdas":[[2.0,2.0],[2.0,2.0]],"inv_F":0.5})");
  CHECK(cli::run("verify --net " + net + " --cert " + (dir / "half.json").string()).code == 4);
  CHECK(cli::run("verify --net " + net + " --cert " + (dir / "half.json").string() + " --mode chain").code == 4);
  CHECK(cli::run("verify --net " + net + " --cert " + (dir / "half.json").string() + " --mode monolithic").code ==
        4);

  // width mismatch
  cli::write(dir / "wide.json", R"({"algo":"fast","lambdas":[[2.0,2.0,2.0],[2.0,2.0,2.0]],"inv_F":1.0})");
  CHECK(cli::run("verify --net " + net + " --cert " + (dir / "wide.json").string()).code == 2);
  CHECK(cli::run("verify --net " + net + " --cert " + cert + " --mode sideways").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("estimate algorithms from the command line") {
  const auto dir = cli::scratch("algo");
  const auto net = (dir / "chain.json").string();
  cli::write(net, R"({"activation":{"alpha":0,"beta":1},"layers":[{"W":[[0.5]],"b":[0]},{"W":[[2.0]],"b":[0]},{"W":[[1.5]],"b":[0]}]})");
  for (const char* algo : {"fast", "sdp", "trivial", "joint-neuron", "joint-layer"}) {
    const auto r = cli::run("estimate --net " + net + " --algo " + algo);
    CHECK(r.code == 0);
    CHECK(r.output.find("L=1.500") != std::string::npos);
  }
  CHECK(cli::run("estimate --net " + net + " --algo sdp --bisection").code == 0);
  CHECK(cli::run("estimate --net " + net + " --algo magic").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("input errors exit 2 with a layer-indexed message") {
  const auto dir = cli::scratch("bad");
  const auto net = (dir / "bad.json").string();
  cli::write(net, R"({"activation":{"alpha":0,"beta":1},"layers":[{"W":[[1,0],[0,1],[1,1]],"b":[0,0,0]},)"
                  R"({"W":[[1,1,1,1,1]],"b":[0]}]})");
  const auto r = cli::run("estimate --net " + net);
  CHECK(r.code == 2);
  CHECK(r.output.find("layer 2") != std::string::npos);
  cli::write(net, "{not json");
  CHECK(cli::run("estimate --net " + net).code == 2);
  CHECK(cli::run("estimate --net " + (dir / "missing.json").string()).code == 2);
  CHECK(cli::run("").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("bench writes CSV and SVG, timeouts exit 0 with a warning") {
  const auto dir = cli::scratch("bench");
  const auto csv = (dir / "out.csv").string(), svg = (dir / "out.svg").string();
  const auto r = cli::run("bench --depths 2,5 --widths 5,10 --seeds 1 --algos fast,trivial --csv " + csv +
                          " --svg " + svg);
  REQUIRE(r.code == 0);
  const std::string text = cli::slurp(csv);
  CHECK(text.rfind("depth,width,seed,algo,L,L_normalized,wall_time_s,status\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 9);
  CHECK(cli::slurp(svg).find("</svg>") != std::string::npos);

  const auto t = cli::run("bench --depths 2,5 --widths 5 --algos sdp --timeout 0.000001 --csv " + csv);
  CHECK(t.code == 0);
  CHECK(t.output.find("warning") != std::string::npos);
  CHECK(cli::slurp(csv).find(",timeout") != std::string::npos);
  fs::remove_all(dir);
}
