#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "etk/cli.hpp"
#include "etk/io.hpp"
#include "json.hpp"

using namespace etk;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() /
          ("etk_cli_" + std::to_string(std::rand()) + "_" +
           std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = dir / name;
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
  json result() const { return json::parse(out); }
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kCost3 = "0,1,4\n1,0,1\n4,1,0\n";

}  // namespace

TEST_CASE("measure and cost parsing") {
  const io::MeasureFile w = io::parse_measure(R"({"weights": [2, 2]})", "w.json");
  const ProbabilityVector p = io::to_probability(w);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);

  const io::MeasureFile cloud = io::parse_measure(
      R"({"points": [[0, 0], [1, 0]], "weights": [1, 3]})", "cloud.json");
  const CostMatrix c = io::cost_from_points(cloud, cloud);
  CHECK(c.entries() == (Matrix(2, 2) << 0, 1, 1, 0).finished());

  Scratch s;
  CHECK_THROWS_AS(io::read_cost(s.write("neg.csv", "0,1\n-0.1,0\n")), io::InputError);

  const std::string bad_csv = s.write("bad.csv", "0,1,2\n1,0,1\n2,1\n");
  try {
    io::read_csv_matrix(bad_csv);
    FAIL("expected a parse error");
  } catch (const io::ParseError& e) {
    CHECK(e.line() == 3);
  }
  const std::string junk_csv = s.write("junk.csv", "0,1\n\n1,zero\n");
  try {
    io::read_csv_matrix(junk_csv);
    FAIL("expected a parse error");
  } catch (const io::ParseError& e) {
    CHECK(e.line() == 3);
  }
  try {
    io::parse_measure("{\n  \"weights\": [1,\n  2,,\n  3]\n}", "m.json");
    FAIL("expected a parse error");
  } catch (const io::ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(
      io::to_probability(io::parse_measure(R"({"weights": [1, -2]})", "m.json")),
                  io::InputError);
  CHECK_THROWS_AS(io::parse_measure(R"({"mass": [1, 2]})", "m.json"), io::InputError);

  const Matrix m = (Matrix(2, 3) << 0.1, 1.0 / 3.0, 2.5e-300, 7, 0, -1).finished();
  io::write_csv_matrix(s.path("m.csv"), m);
  CHECK(io::read_csv_matrix(s.path("m.csv")) == m);
}

TEST_CASE("ot command") {
  Scratch s;
  const std::string cost = s.write("c.csv", kCost3);
  const std::string mu = s.write("mu.json", R"({"weights": [1, 2, 3]})");
  const std::string nu = s.write("nu.json", R"({"weights": [3, 2, 1]})");

  const Run r = run({"ot", "--cost", cost, "--mu", mu, "--nu", nu, "--gamma", "1",
                     "--tol", "1e-8", "--plan-out", s.path("plan.csv"), "--trace",
                     s.path("trace.csv")});
  REQUIRE(r.code == kExitOk);
  const json j = r.result();
  for (const char* key : {"value", "iterations", "residual", "converged"})
    CHECK(j.contains(key));
  CHECK(j["residual"].get<double>() <= 1e-8);
  CHECK_FALSE(j.contains("wall_time"));

  SUBCASE("plan round trip") {
    const Matrix plan = io::read_csv_matrix(s.path("plan.csv"));
    const ProbabilityVector L(Eigen::Vector3d(1, 2, 3));
    const ProbabilityVector W(Eigen::Vector3d(3, 2, 1));
    CHECK(std::abs(marginal_residual(plan, L, W).norm - j["residual"].get<double>()) <=
          1e-12);
  }

  SUBCASE("trace") {
    std::istringstream lines(slurp(s.path("trace.csv")));
    std::string line;
    std::getline(lines, line);
    CHECK(line == "iteration,objective,residual,curvature,wall_time");
    long prev = -1;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
      const long it = std::stol(line.substr(0, line.find(',')));
      CHECK(it > prev);
      prev = it;
      ++count;
    }
    CHECK(count == j["iterations"].get<std::size_t>());
  }

  SUBCASE("identical runs give identical bytes") {
    const std::vector<std::string> args{"ot", "--cost", cost, "--mu", mu, "--nu", nu};
    CHECK(run(args).out == run(args).out);
  }

  SUBCASE("iteration cap is a tolerance failure") {
    const Run capped = run({"ot", "--cost", cost, "--mu", mu, "--nu", nu, "--tol",
                            "1e-14", "--max-iter", "1"});
    CHECK(capped.code == kExitTolerance);
    CHECK_FALSE(capped.result()["converged"].get<bool>());
  }

  SUBCASE("timing on request") {
    const Run timed = run({"ot", "--cost", cost, "--mu", mu, "--nu", nu, "--timing"});
    CHECK(timed.result().contains("wall_time"));
  }

  SUBCASE("point clouds stand in for the cost") {
    const std::string a =
        s.write("a.json", R"({"points": [[0,0],[1,0],[2,0]], "weights": [1,1,1]})");
    const Run pts = run({"ot", "--mu", a, "--nu", a});
    CHECK(pts.code == kExitOk);
  }
}

TEST_CASE("input errors exit with 1") {
  Scratch s;
  const std::string mu = s.write("mu.json", R"({"weights": [1, 1, 1]})");
  const std::string heavy = s.write("heavy.json", R"({"weights": [1, 1, 2]})");
  const std::string neg = s.write("neg.csv", "0,1,1\n1,-0.1,1\n1,1,0\n");
  const std::string cost = s.write("c.csv", kCost3);

  CHECK(run({"ot", "--cost", neg, "--mu", mu, "--nu", mu}).code == kExitInput);
  // Raw totals 3 and 4 cannot be balanced.
  const Run mismatch = run({"ot", "--cost", cost, "--mu", mu, "--nu", heavy});
  CHECK(mismatch.code == kExitInput);
  CHECK(mismatch.err.find("error") != std::string::npos);
  CHECK(run({"ot", "--cost", s.path("missing.csv"), "--mu", mu, "--nu", mu}).code ==
        kExitInput);
  CHECK(run({"ot", "--mu", mu}).code == kExitInput);
  CHECK(run({"frobnicate"}).code == kExitInput);
  CHECK(run({"barycenter", "--measures", s.dir.string(), "--mode", "sideways"}).code ==
        kExitInput);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("barycenter command") {
  Scratch s;
  const std::string pts = R"("points": [[0,0],[1,0],[0,1],[1,1]])";
  s.write("ms/a.json", "{" + pts + R"(, "weights": [4, 1, 1, 1]})");
  s.write("ms/b.json", "{" + pts + R"(, "weights": [1, 4, 1, 1]})");
  s.write("ms/c.json", "{" + pts + R"(, "weights": [1, 1, 4, 1]})");
  const std::string dir = s.path("ms");

  const Run dual = run({"barycenter", "--mode", "dual", "--measures", dir, "--eps",
                        "1e-4", "--out", s.path("dual.json")});
  REQUIRE(dual.code == kExitOk);
  const json j = json::parse(slurp(s.path("dual.json")));
  const std::vector<double> bc = j["barycenter"].get<std::vector<double>>();
  REQUIRE(bc.size() == 4);
  double total = 0.0;
  for (double x : bc) {
    CHECK(x > 0.0);
    total += x;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(j["recovery_spread"].size() == 3);
  CHECK(j["dual"]["potentials"].size() == 2);

  const Run primal = run({"barycenter", "--mode", "primal", "--measures", dir,
                          "--eps", "1e-4"});
  REQUIRE(primal.code == kExitOk);
  CHECK_FALSE(primal.result().contains("recovery_spread"));

  // Slide the window by one and restart from the previous duals.
  s.write("ms/a.json", "{" + pts + R"(, "weights": [1, 1, 1, 4]})");
  fs::rename(s.path("ms/a.json"), s.path("ms/d.json"));
  const Run warm = run({"barycenter", "--measures", dir, "--eps", "1e-4",
                        "--warm-start", s.path("dual.json"), "--window-shift", "1"});
  CHECK(warm.code == kExitOk);
  CHECK(run({"barycenter", "--measures", dir, "--warm-start", s.path("dual.json"),
             "--window-shift", "3"})
            .code == kExitInput);
}

TEST_CASE("equilibrium command") {
  Scratch s;
  const json cfg = {
      {"model",
       {{"base", {{0.0, 1.0, 2.0}, {1.0, 0.0, 1.0}, {2.0, 1.0, 0.0}}},
        {"sensitivities",
         {{{1.0, 0.0}, {0.5, 0.5}, {0.0, 1.0}},
          {{0.2, 0.1}, {1.0, 0.0}, {0.3, 0.3}},
          {{0.0, 0.4}, {0.6, 0.2}, {1.0, 1.0}}}},
        {"beta", 1.0},
        {"y_hat", {0.4, 0.7}}}},
      {"L", {1, 1, 2}},
      {"W", {2, 1, 1}}};
  const std::string path = s.write("eq.json", cfg.dump());
  const Run r = run({"equilibrium", "--config", path, "--eps", "1e-6"});
  REQUIRE(r.code == kExitOk);
  const json j = r.result();
  CHECK(j["y"].size() == 2);
  CHECK(j["converged"].get<bool>());
  CHECK(j["plan"].size() == 3);

  CHECK(run({"equilibrium", "--config", path, "--model", "nope"}).code == kExitInput);
  const std::string broken = s.write("broken.json", R"({"model": {"beta": 1}})");
  CHECK(run({"equilibrium", "--config", broken}).code == kExitInput);
}

TEST_CASE("bench command") {
  const Run r = run({"bench", "sinkhorn", "--n", "100", "--seed", "7"});
  REQUIRE(r.code == kExitOk);
  const json j = r.result();
  CHECK(j.contains("wall_time"));
  CHECK(j["relative_residual"].get<double>() <= 0.01);
  CHECK(j["wall_time"].get<double>() <= 10.0);
}

TEST_CASE("tool binary exit status") {
  Scratch s;
  const std::string mu = s.write("mu.json", R"({"weights": [1, 1]})");
  const std::string neg = s.write("neg.csv", "0,-0.1\n1,0\n");
  const std::string cmd = std::string(ETK_TOOL_PATH) + " ot --cost " + neg +
                          " --mu " + mu + " --nu " + mu + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == kExitInput);
}
