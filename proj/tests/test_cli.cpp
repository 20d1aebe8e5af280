// Copyright 2026 The sparselab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparselab/cli.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sparselab;
using sparselab::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;

  OutputTable csv() const {
    std::istringstream is(out);
    return read_csv(is);
  }
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / ("sparselab_cli_" + name);
  std::ofstream(path) << contents;
  return path;
}

}  // namespace

TEST_CASE("threshold for rho_x") {
  const auto r = invoke({"threshold", "--solve-for", "rho-x", "--alpha", "0.5", "--rho-w", "0.1",
                         "--lambda", "1"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  REQUIRE(t.records.size() == 1);
  CHECK(std::abs(t.number(0, "rho_x_c") - 0.0770) <= 5e-4);
  CHECK(t.number(0, "alpha_c") == 0.5);
  CHECK(std::abs(t.number(0, "condition_residual")) <= 1e-3);
  CHECK(t.text(0, "solve_for") == "rho-x");
}

TEST_CASE("threshold for alpha") {
  const auto r = invoke({"threshold", "--solve-for", "alpha", "--rho-x", "0.0770", "--rho-w",
                         "0.1", "--lambda", "1", "--format", "json"});
  REQUIRE(r.code == cli::kExitOk);
  std::istringstream is(r.out);
  const auto t = read_json(is);
  CHECK(std::abs(t.number(0, "alpha_c") - 0.500) <= 5e-3);
}

TEST_CASE("usage errors exit with status 2 and produce no data") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"threshold", "--alpha", "0.5", "--rho-w", "0.1", "--lambda", "1"},
           {"threshold", "--solve-for", "rho-x", "--rho-w", "0.1", "--lambda", "1"},
           {"threshold", "--solve-for", "beta"},
           {"mse-curve", "--alpha", "0.5", "--rho-w", "0.1", "--lambda", "1"},
           {"monte-carlo", "--alpha", "0.5"},
           {"monte-carlo", "--alpha", "0.5", "--rho-x", "0.1", "--rho-w", "0.1", "--lambda", "1",
            "--n", "4"},
           {"optimize-lambda", "--alpha", "0.5"},
           {"decode", "--lambda", "1"},
           {"threshold", "--bogus"},
           {"threshold", "--solve-for", "alpha", "--rho-x", "abc", "--rho-w", "0.1", "--lambda", "1"},
           {},
           {"nonsense"},
       }) {
    const auto r = invoke(args);
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.out.find("# sparselab") == std::string::npos);
    CHECK_FALSE(r.err.empty());
  }
}

TEST_CASE("help and version succeed") {
  CHECK(invoke({"--help"}).code == cli::kExitOk);
  CHECK(invoke({"threshold", "--help"}).code == cli::kExitOk);
  const auto v = invoke({"--version"});
  CHECK(v.code == cli::kExitOk);
  CHECK(v.out.find(kVersion) != std::string::npos);
}

TEST_CASE("solver failures exit with status 1") {
  const auto r = invoke({"threshold", "--solve-for", "alpha", "--rho-x", "0.6", "--rho-w", "0.3",
                         "--lambda", "1"});
  CHECK(r.code == cli::kExitFailure);
  CHECK(r.err.find("no phase boundary") != std::string::npos);
}

TEST_CASE("mse curve across the boundary") {
  const auto r = invoke({"mse-curve", "--alpha", "0.5", "--rho-w", "0.1", "--lambda", "1",
                         "--start", "0.05", "--stop", "0.11", "--count", "4", "--workers", "2"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  REQUIRE(t.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const double rho = t.number(i, "rho_x");
    CHECK(t.text(i, "status") == "ok");
    if (rho < 0.0770) {
      CHECK(t.text(i, "phase") == "perfect");
      CHECK(t.number(i, "mse") == 0.0);
    } else {
      CHECK(t.text(i, "phase") == "finite");
      CHECK(t.number(i, "mse") > 0.0);
    }
  }
  CHECK(t.number(0, "rho_x") == 0.05);
  CHECK(t.number(3, "rho_x") == 0.11);
  CHECK(r.err.find("[mse-curve]") != std::string::npos);
}

TEST_CASE("empty grid gives a header only") {
  const auto r = invoke({"mse-curve", "--alpha", "0.5", "--rho-w", "0.1", "--lambda", "1",
                         "--start", "0.05", "--stop", "0.2", "--count", "0"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  CHECK(t.records.empty());
  CHECK(t.columns.front() == "alpha");
}

TEST_CASE("mse curve records per-point failures in the status column") {
  const auto r = invoke({"mse-curve", "--alpha", "0.5", "--rho-w", "0.1", "--lambda", "1",
                         "--start", "0.15", "--stop", "0.2", "--count", "2", "--max-iters", "3"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  REQUIRE(t.records.size() == 2);
  CHECK(t.text(0, "status").rfind("error:", 0) == 0);
  CHECK(std::isnan(t.number(0, "mse")));
}

TEST_CASE("mse curve with Monte Carlo columns") {
  const auto r = invoke({"mse-curve", "--alpha", "0.5", "--rho-w", "0.1", "--lambda", "1",
                         "--start", "0.15", "--stop", "0.15", "--count", "1", "--with-mc",
                         "--n", "64", "--trials", "3", "--quiet"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  CHECK(t.number(0, "mc_trials") + t.number(0, "mc_nonconverged") == 3.0);
  CHECK(t.number(0, "mc_mean_mse") > 0.0);
  CHECK(r.err.empty());
}

TEST_CASE("log spaced grid on another axis") {
  const auto r = invoke({"mse-curve", "--axis", "lambda", "--alpha", "0.5", "--rho-x", "0.15",
                         "--rho-w", "0.1", "--start", "0.1", "--stop", "10", "--count", "3",
                         "--spacing", "log", "--quiet"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  CHECK(t.number(1, "lambda") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.config_value("spacing") == "log");
}

TEST_CASE("optimize lambda") {
  const auto r = invoke({"optimize-lambda", "--objective", "critical-rho-x", "--alpha", "0.5",
                         "--rho-w", "0.1"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  CHECK(std::abs(t.number(0, "objective_value") - 0.1030) <= 1e-3);
}

TEST_CASE("phase diagram dominance") {
  const auto r = invoke({"phase-diagram", "--start", "0.02", "--stop", "0.1", "--count", "3",
                         "--deltas", "0.1", "--quiet"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  REQUIRE(t.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t.number(i, "alpha_c_optimal") <= t.number(i, "alpha_c_lambda1") + 1e-6);
    CHECK(t.number(i, "delta") == 0.1);
  }
}

TEST_CASE("monte carlo subcommand and the seed contract") {
  const std::vector<std::string> base = {"monte-carlo", "--alpha", "0.5", "--rho-x", "0.15",
                                         "--rho-w", "0.1", "--lambda", "1", "--n", "64",
                                         "--trials", "2", "--quiet"};
  auto with_seed = base;
  with_seed.insert(with_seed.end(), {"--seed", "99"});
  const auto a = invoke(with_seed);
  REQUIRE(a.code == cli::kExitOk);
  CHECK(a.csv().config_value("seed") == "99");

  setenv("SPARSE_LAB_SEED", "99", 1);
  const auto b = invoke(base);
  unsetenv("SPARSE_LAB_SEED");
  REQUIRE(b.code == cli::kExitOk);
  CHECK(b.csv().number(0, "mean_mse") == a.csv().number(0, "mean_mse"));

  const auto c = invoke(base);
  CHECK(c.csv().config_value("seed") == "1");
}

TEST_CASE("config file values yield to flags") {
  const auto path = temp_file("cfg.txt",
                              "# threshold settings\n"
                              "solve_for = rho-x\n"
                              "alpha = 0.9\n"
                              "rho-w = 0.1\n"
                              "lambda = 1\n"
                              "trials = 7   # only used by Monte Carlo\n");
  const auto r = invoke({"threshold", "--config", path.string(), "--alpha", "0.5"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  CHECK(t.config_value("alpha") == "0.5");
  CHECK(std::abs(t.number(0, "rho_x_c") - 0.0770) <= 5e-4);

  const auto bad = temp_file("bad.txt", "alpah = 0.5\n");
  CHECK(invoke({"threshold", "--config", bad.string()}).code == cli::kExitUsage);
  CHECK(invoke({"threshold", "--config", "/nonexistent/cfg"}).code == cli::kExitUsage);
}

TEST_CASE("parameter echo is complete") {
  const auto r = invoke({"threshold", "--solve-for", "rho-x", "--alpha", "0.5", "--rho-w", "0.1",
                         "--lambda", "1", "--sigma2-x", "4"});
  const auto t = r.csv();
  for (const char* key : {"alpha", "lambda", "rho_x", "rho_w", "sigma2_x", "sigma2_w", "seed",
                          "workers", "damping", "rel_tol", "max_iters", "bisection_tol"}) {
    CHECK_NOTHROW(t.config_value(key));
  }
  CHECK(t.config_value("sigma2_x") == "4");
}

TEST_CASE("output file") {
  const auto path = std::filesystem::temp_directory_path() / "sparselab_cli_out.json";
  const auto r = invoke({"optimize-lambda", "--objective", "critical-alpha", "--rho-x", "0.05",
                         "--rho-w", "0.005", "--format", "json", "--output", path.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.empty());
  std::ifstream in(path);
  const auto t = read_json(in);
  CHECK(t.number(0, "objective_value") > 0.0);
  CHECK(invoke({"optimize-lambda", "--objective", "critical-alpha", "--rho-x", "0.05", "--rho-w",
                "0.005", "--output", "/nonexistent/dir/x.csv"})
            .code == cli::kExitFailure);
}

TEST_CASE("decode an instance file") {
  const auto path = temp_file("inst.json", R"({"A": [[1], [1]], "y": [1, 1], "x0": [1]})");
  const auto r = invoke({"decode", "--instance", path.string(), "--lambda", "1"});
  REQUIRE(r.code == cli::kExitOk);
  const auto t = r.csv();
  REQUIRE(t.records.size() == 1);
  CHECK(t.number(0, "x_hat") == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(t.config_value("result_converged") == "true");

  const auto ragged = temp_file("ragged.json", R"({"A": [[1, 2], [1]], "y": [1, 1]})");
  CHECK(invoke({"decode", "--instance", ragged.string(), "--lambda", "1"}).code ==
        cli::kExitFailure);
}

TEST_CASE("selftest passes") {
  const auto r = invoke({"selftest", "--quiet"});
  CHECK(r.code == cli::kExitOk);
  const auto t = r.csv();
  REQUIRE_FALSE(t.records.empty());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    CHECK(t.number(i, "failures") == 0.0);
    CHECK(t.number(i, "checks") > 0.0);
  }
}

TEST_CASE("grid spec") {
  cli::GridSpec g{0.0, 1.0, 5, false};
  CHECK(g.points() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  g = {2.0, 3.0, 1, false};
  CHECK(g.points() == std::vector<double>{2.0});
  g = {-1.0, 1.0, 3, true};
  CHECK_THROWS_AS(g.validate(), cli::UsageError);
}
