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

#include "sparselab/experiments.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>

using namespace sparselab;

namespace {

EnsembleSpec small_spec(double rho_x, int trials = 6) {
  EnsembleSpec spec;
  spec.N = 64;
  spec.params.alpha = 0.5;
  spec.params.rho_x = rho_x;
  spec.params.rho_w = 0.1;
  spec.trials = trials;
  spec.base_seed = 12345;
  return spec;
}

bool same_aggregate(const Aggregate& a, const Aggregate& b) {
  if (a.per_trial.size() != b.per_trial.size()) return false;
  for (std::size_t i = 0; i < a.per_trial.size(); ++i) {
    if (a.per_trial[i].mse != b.per_trial[i].mse) return false;
    if (a.per_trial[i].objective != b.per_trial[i].objective) return false;
  }
  return a.mean_mse == b.mean_mse && a.std_error == b.std_error &&
         a.median_mse == b.median_mse && a.success_fraction == b.success_fraction &&
         a.trials == b.trials && a.nonconverged == b.nonconverged;
}

}  // namespace

TEST_CASE("mixture sampling") {
  auto stream = make_stream(1, 0, StreamPurpose::kSignal);
  CHECK(sample_mixture(1000, 0.0, 1.0, stream).isZero(0.0));

  const int n = 1000000;
  const auto dense = sample_mixture(n, 1.0, 2.5, stream);
  const double mean = dense.mean();
  const double var = (dense.array() - mean).square().sum() / (n - 1);
  CHECK(std::abs(var - 2.5) <= 0.01 * 2.5);

  const auto sparse = sample_mixture(n, 0.1, 1.0, stream);
  const double fraction = double((sparse.array() != 0.0).count()) / n;
  CHECK(std::abs(fraction - 0.1) <= 0.002);

  CHECK_THROWS_AS(sample_mixture(10, -0.1, 1.0, stream), std::invalid_argument);
  CHECK_THROWS_AS(sample_mixture(10, 1.1, 1.0, stream), std::invalid_argument);
  CHECK_THROWS_AS(sample_mixture(10, 0.5, 0.0, stream), std::invalid_argument);
}

TEST_CASE("streams are keyed by seed, trial and purpose") {
  auto a = make_stream(7, 3, StreamPurpose::kMatrix);
  auto b = make_stream(7, 3, StreamPurpose::kMatrix);
  auto c = make_stream(7, 3, StreamPurpose::kNoise);
  auto d = make_stream(7, 4, StreamPurpose::kMatrix);
  auto e = make_stream(8, 3, StreamPurpose::kMatrix);
  const auto first = a();
  CHECK(first == b());
  CHECK(first != c());
  CHECK(first != d());
  CHECK(first != e());
}

TEST_CASE("instances are reproducible") {
  const auto spec = small_spec(0.15);
  const auto a = sample_instance(spec, 2);
  const auto b = sample_instance(spec, 2);
  CHECK(a.A == b.A);
  CHECK(a.y == b.y);
  CHECK(*a.x0 == *b.x0);
  CHECK(*a.w == *b.w);
  CHECK(a.rows() == spec.M());
  CHECK(sample_instance(spec, 3).A != a.A);
}

TEST_CASE("column norms of the ensemble matrix") {
  EnsembleSpec spec;
  spec.N = 1024;
  spec.params.alpha = 0.5;
  const auto inst = sample_instance(spec, 0);
  const double avg = inst.A.colwise().squaredNorm().mean();
  // Each squared column norm has mean M/N = alpha and variance 2M/N^2; the
  // average over N columns has standard deviation sqrt(2M)/N^1.5.
  const double sd = std::sqrt(2.0 * spec.M()) / std::pow(spec.N, 1.5);
  CHECK(std::abs(avg - double(spec.M()) / spec.N) <= 5 * sd);
}

TEST_CASE("noise-free ensemble") {
  auto spec = small_spec(0.15);
  spec.params.rho_w = 0.0;
  const auto inst = sample_instance(spec, 0);
  CHECK(inst.w->isZero(0.0));
  CHECK(inst.y == inst.A * *inst.x0);
}

TEST_CASE("spec validation") {
  auto spec = small_spec(0.1);
  spec.N = 4;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec(0.1);
  spec.trials = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec(0.1);
  spec.params.alpha = 0.001;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("single trial aggregate equals that trial") {
  const auto spec = small_spec(0.15, 1);
  const auto agg = run_monte_carlo(spec, DecoderConfig{});
  REQUIRE(agg.per_trial.size() == 1);
  CHECK(agg.mean_mse == agg.per_trial[0].mse);
  CHECK(agg.median_mse == agg.per_trial[0].mse);
  CHECK(agg.std_error == 0.0);
}

TEST_CASE("aggregates are pure and independent of the worker count") {
  const auto spec = small_spec(0.15, 8);
  const auto serial = run_monte_carlo(spec, DecoderConfig{}, 1e-6, 1);
  const auto again = run_monte_carlo(spec, DecoderConfig{}, 1e-6, 1);
  const auto pooled = run_monte_carlo(spec, DecoderConfig{}, 1e-6, 8);
  CHECK(same_aggregate(serial, again));
  CHECK(same_aggregate(serial, pooled));
  CHECK(serial.replica_available);
  CHECK_FALSE(serial.replica_perfect);
  CHECK(serial.replica_mse > 0.0);
}

TEST_CASE("aggregate statistics and the exclusion of unconverged trials") {
  std::vector<TrialSummary> trials(5);
  const double mses[] = {4e-7, 0.2, 0.1, 5.0, 0.3};
  for (int i = 0; i < 5; ++i) {
    trials[i].trial_index = 4 - i;
    trials[i].mse = mses[i];
    trials[i].converged = i != 3;
  }
  const auto agg = aggregate_trials(trials, 1e-6);
  CHECK(agg.trials == 4);
  CHECK(agg.nonconverged == 1);
  CHECK(agg.mean_mse == doctest::Approx((4e-7 + 0.2 + 0.1 + 0.3) / 4));
  CHECK(agg.median_mse == doctest::Approx(0.15));
  CHECK(agg.success_fraction == 0.25);
  CHECK(agg.per_trial.front().trial_index == 0);

  // Sample standard error from an independent two-pass computation.
  const double m = agg.mean_mse;
  double ss = 0;
  for (double v : {4e-7, 0.2, 0.1, 0.3}) ss += (v - m) * (v - m);
  CHECK(agg.std_error == doctest::Approx(std::sqrt(ss / 3.0 / 4.0)));

  for (auto& t : trials) t.converged = false;
  const auto none = aggregate_trials(trials, 1e-6);
  CHECK(none.trials == 0);
  CHECK(std::isnan(none.mean_mse));
}

TEST_CASE("decoder failures are counted, not averaged") {
  const auto spec = small_spec(0.15, 3);
  DecoderConfig cfg;
  cfg.max_iters = 2;
  cfg.polish_interval = 1000;
  const auto agg = run_monte_carlo(spec, cfg);
  CHECK(agg.nonconverged == 3);
  CHECK(agg.trials == 0);
  CHECK(std::isnan(agg.mean_mse));
}

TEST_CASE("perfect phase recovery at small scale") {
  auto spec = small_spec(0.03, 6);
  spec.N = 128;
  const auto agg = run_monte_carlo(spec, DecoderConfig{}, 1e-6, 4);
  CHECK(agg.replica_perfect);
  CHECK(agg.replica_mse == 0.0);
  CHECK(agg.success_fraction >= 0.8);
}

TEST_CASE("phase diagram rows") {
  const std::vector<double> grid = {0.02, 0.04, 0.04, 0.08};
  const auto rows = sweep_phase_diagram(grid, {0.1}, SolverConfig{}, 4);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.rho_w == doctest::Approx(0.1 * r.rho_x));
    CHECK(r.alpha_c_optimal <= r.alpha_c_unit_lambda + 1e-6);
    CHECK(r.alpha_c_unit_lambda > 0.0);
    CHECK(r.lambda_star > 0.0);
  }
  CHECK(rows[1].alpha_c_unit_lambda == rows[2].alpha_c_unit_lambda);
  CHECK(rows[1].alpha_c_optimal == rows[2].alpha_c_optimal);
  CHECK(rows[1].lambda_star == rows[2].lambda_star);
  // alpha_c shrinks toward zero as rho_x -> 0.
  CHECK(rows[0].alpha_c_unit_lambda < rows[1].alpha_c_unit_lambda);
  CHECK(rows[1].alpha_c_unit_lambda < rows[3].alpha_c_unit_lambda);
  const auto tail = sweep_phase_diagram({1e-4, 1e-3}, {0.1}, SolverConfig{}, 1);
  CHECK(tail[0].alpha_c_unit_lambda < tail[1].alpha_c_unit_lambda);
  CHECK(tail[0].alpha_c_unit_lambda > 0.0);
  CHECK_THROWS_AS(sweep_phase_diagram({}, {0.1}, SolverConfig{}, 1), std::invalid_argument);
}

TEST_CASE("phase diagram reports rows without a boundary") {
  const auto rows = sweep_phase_diagram({0.6}, {0.5}, SolverConfig{}, 1);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].status != "ok");
  CHECK(std::isnan(rows[0].alpha_c_unit_lambda));
}

TEST_CASE("parallel_for covers every index once and propagates failures") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 7, [&](int i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](int i) {
                                 if (i == 5) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  int calls = 0;
  parallel_for(0, 4, [&](int) { ++calls; });
  CHECK(calls == 0);
}
