#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <algorithm>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"

namespace fs = std::filesystem;
using fmn::cli::run_cli;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fixtures are generated once per test binary.
const fs::path& workdir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / ("fmn_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    const auto r = cli({"gen-fixtures", "--kind", "all", "--seed", "7", "--count", "5", "--out", (d / "fx").string()});
    REQUIRE(r.code == 0);
    std::ofstream(d / "cfg.json") << R"({"loss":"LL","alpha0":0.5,"iterations":60,"optimizer.kind":"sgd","optimizer.momentum":0.9})";
    return d;
  }();
  return dir;
}

std::string p(const std::string& rel) { return (workdir() / rel).string(); }

std::size_t data_rows(const std::string& text) {
  std::size_t n = 0;
  bool header = false;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("gen-fixtures writes models, data and answers") {
  CHECK(fs::exists(p("fx/mlp/model.json")));
  CHECK(data_rows(slurp(p("fx/mlp/eval.csv"))) == 200);
  CHECK(data_rows(slurp(p("fx/mlp/tune.csv"))) == 100);
  CHECK(data_rows(slurp(p("fx/linear/answers.csv"))) == 5);
  CHECK(slurp(p("fx/mlp/model.json")).find("\"seed\": 7") != std::string::npos);
}

TEST_CASE("attack: rows, summary and determinism") {
  const std::vector<std::string> base = {"attack", "--model", p("fx/mlp/model.json"), "--data", p("fx/mlp/eval.csv"),
                                         "--config", p("cfg.json"), "--seed", "3"};
  auto a = base;
  a.insert(a.end(), {"--out", p("a1"), "--jobs", "4"});
  auto b = base;
  b.insert(b.end(), {"--out", p("a2"), "--jobs", "1"});
  REQUIRE(cli(a).code == 0);
  REQUIRE(cli(b).code == 0);
  const auto csv = slurp(p("a1/results.csv"));
  CHECK(data_rows(csv) == 200);
  CHECK(csv.rfind("# fmn 0.3.0 seed=3\n", 0) == 0);
  CHECK(csv == slurp(p("a2/results.csv")));
  CHECK(slurp(p("a1/summary.json")) == slurp(p("a2/summary.json")));
  CHECK(slurp(p("a1/summary.json")).find("\"median_norm\"") != std::string::npos);
}

TEST_CASE("curve over a named grid") {
  REQUIRE(cli({"attack", "--model", p("fx/mlp/model.json"), "--data", p("fx/mlp/eval.csv"), "--config", p("cfg.json"),
               "--out", p("c1")})
              .code == 0);
  const auto r = cli({"curve", "--results", p("c1/results.csv"), "--grid", "0:16/255:64pts", "--out", p("c1/curve.csv")});
  CHECK(r.code == 0);
  const auto text = slurp(p("c1/curve.csv"));
  CHECK(data_rows(text) == 64);
  CHECK(text.find("epsilon,robust_accuracy\n0,") != std::string::npos);
  CHECK(text.find("seed=0") != std::string::npos);
  CHECK(cli({"curve", "--results", p("c1/results.csv"), "--grid", "0.2,0.1"}).code == 2);
}

TEST_CASE("input errors exit 2 with one machine-parsable line") {
  const auto missing = p("nope/model.json");
  const auto r = cli({"attack", "--model", missing, "--data", p("fx/mlp/eval.csv"), "--config", p("cfg.json"), "--out",
                      p("x")});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: code=2 where=" + missing, 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  std::ofstream(p("bad.json")) << R"({"loss":"LL","alpha0":"big"})";
  const auto bad = cli({"attack", "--model", p("fx/mlp/model.json"), "--data", p("fx/mlp/eval.csv"), "--config",
                        p("bad.json"), "--out", p("x")});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("where=alpha0") != std::string::npos);

  CHECK(cli({"attack", "--model", p("fx/mlp/model.json")}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"gen-fixtures", "--kind", "cnn", "--out", p("y")}).code == 2);
}

TEST_CASE("attack with no successful sample exits 1") {
  std::ofstream(p("flat.json")) << R"({"input_dim":2,"num_classes":2,"layers":[{"kind":"dense","weights":[[0,0],[0,0]],"bias":[1,0]}]})";
  std::ofstream(p("flat.csv")) << "label,f0,f1\n0,0.5,0.5\n0,0.1,0.9\n";
  const auto r = cli({"attack", "--model", p("flat.json"), "--data", p("flat.csv"), "--config", p("cfg.json"), "--out",
                      p("flat")});
  CHECK(r.code == 1);
  CHECK(data_rows(slurp(p("flat/results.csv"))) == 2);
}

TEST_CASE("gradcheck gate") {
  const auto r = cli({"gradcheck", "--model", p("fx/mlp/model.json"), "--trials", "50", "--seed", "1"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
}

TEST_CASE("tune writes a loadable best config and is deterministic") {
  auto args = [&](const std::string& out) {
    return std::vector<std::string>{"tune", "--model", p("fx/mlp/model.json"), "--data", p("fx/mlp/tune.csv"),
                                    "--seed", "4", "--budget-min", "10", "--budget-max", "90", "--max-evals", "24",
                                    "--losses", "LL", "--schedulers", "calr,rlrop", "--out", p(out)};
  };
  const auto r1 = cli(args("t1"));
  const auto r2 = cli(args("t2"));
  REQUIRE(r1.code == 0);
  CHECK(r1.out == r2.out);
  CHECK(r1.out.find("best optimizer=") == 0);
  CHECK(slurp(p("t1/trials.jsonl")) == slurp(p("t2/trials.jsonl")));
  CHECK(slurp(p("t1/best_config.json")) == slurp(p("t2/best_config.json")));
  CHECK(data_rows("h\n" + slurp(p("t1/trials.jsonl"))) == 24);

  // The best config feeds straight back into attack.
  CHECK(cli({"attack", "--model", p("fx/mlp/model.json"), "--data", p("fx/mlp/eval.csv"), "--config",
             p("t1/best_config.json"), "--out", p("t1/eval")})
            .code == 0);
}
