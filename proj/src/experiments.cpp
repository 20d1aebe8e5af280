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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace sparselab {

int EnsembleSpec::M() const { return static_cast<int>(std::lround(params.alpha * N)); }

void EnsembleSpec::validate() const {
  params.validate();
  if (N < 8) throw std::invalid_argument("EnsembleSpec: N must be at least 8");
  if (trials < 1) throw std::invalid_argument("EnsembleSpec: trials must be at least 1");
  if (M() < 1) throw std::invalid_argument("EnsembleSpec: round(alpha N) must be at least 1");
}

RandomStream make_stream(std::uint64_t base_seed, std::uint64_t trial_index,
                         StreamPurpose purpose) {
  const auto tag = static_cast<std::uint64_t>(purpose);
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed),
                    static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(trial_index),
                    static_cast<std::uint32_t>(trial_index >> 32),
                    static_cast<std::uint32_t>(tag)};
  return RandomStream(seq);
}

Vector<double> sample_mixture(int n, double rho, double sigma2, RandomStream& stream) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("sample_mixture: rho must lie in [0, 1]");
  }
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sample_mixture: sigma2 must be positive");
  if (n < 0) throw std::invalid_argument("sample_mixture: n must be nonnegative");
  std::bernoulli_distribution active(rho);
  std::normal_distribution<double> value(0.0, std::sqrt(sigma2));
  Vector<double> out(n);
  for (int i = 0; i < n; ++i) out(i) = active(stream) ? value(stream) : 0.0;
  return out;
}

ProblemInstance<double> sample_instance(const EnsembleSpec& spec, std::uint64_t trial_index) {
  spec.validate();
  const int n = spec.N;
  const int m = spec.M();
  const auto& p = spec.params;

  auto matrix_stream = make_stream(spec.base_seed, trial_index, StreamPurpose::kMatrix);
  std::normal_distribution<double> entry(0.0, 1.0 / std::sqrt(double(n)));
  ProblemInstance<double> inst;
  inst.A.resize(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) inst.A(i, j) = entry(matrix_stream);
  }

  auto signal_stream = make_stream(spec.base_seed, trial_index, StreamPurpose::kSignal);
  auto noise_stream = make_stream(spec.base_seed, trial_index, StreamPurpose::kNoise);
  inst.x0 = sample_mixture(n, p.rho_x, p.sigma2_x, signal_stream);
  inst.w = sample_mixture(m, p.rho_w, p.sigma2_w, noise_stream);
  inst.y = inst.A * *inst.x0 + *inst.w;
  return inst;
}

std::pair<double, double> support_scores(const Vector<double>& x_hat, const Vector<double>& x0,
                                         double threshold) {
  int predicted = 0;
  int actual = 0;
  int hits = 0;
  for (Eigen::Index i = 0; i < x_hat.size(); ++i) {
    const bool p = std::abs(x_hat(i)) > threshold;
    const bool a = std::abs(x0(i)) > threshold;
    predicted += p;
    actual += a;
    hits += p && a;
  }
  const double precision = predicted == 0 ? 1.0 : double(hits) / predicted;
  const double recall = actual == 0 ? 1.0 : double(hits) / actual;
  return {precision, recall};
}

TrialSummary run_trial(const EnsembleSpec& spec, std::uint64_t trial_index,
                       const DecoderConfig& decoder_cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto inst = sample_instance(spec, trial_index);
  const auto result = decode(inst, spec.params.lambda, decoder_cfg);

  TrialSummary s;
  s.trial_index = trial_index;
  s.mse = (result.x_hat - *inst.x0).squaredNorm() / spec.N;
  s.objective = result.objective;
  s.converged = result.converged;
  s.iterations = result.iterations;
  std::tie(s.support_precision, s.support_recall) = support_scores(result.x_hat, *inst.x0);
  s.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

Aggregate aggregate_trials(std::vector<TrialSummary> trials, double success_tol) {
  std::sort(trials.begin(), trials.end(),
            [](const auto& a, const auto& b) { return a.trial_index < b.trial_index; });
  Aggregate agg;
  std::vector<double> mses;
  for (const auto& t : trials) {
    if (t.converged) {
      mses.push_back(t.mse);
    } else {
      ++agg.nonconverged;
    }
  }
  agg.trials = static_cast<int>(mses.size());
  agg.per_trial = std::move(trials);
  if (mses.empty()) {
    agg.mean_mse = agg.std_error = agg.median_mse = std::numeric_limits<double>::quiet_NaN();
    return agg;
  }

  double sum = 0.0;
  int successes = 0;
  for (double v : mses) {
    sum += v;
    successes += v <= success_tol;
  }
  const double n = double(mses.size());
  agg.mean_mse = sum / n;
  if (mses.size() > 1) {
    double ss = 0.0;
    for (double v : mses) ss += (v - agg.mean_mse) * (v - agg.mean_mse);
    agg.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  agg.success_fraction = successes / n;

  std::vector<double> sorted = mses;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  agg.median_mse = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return agg;
}

Aggregate run_monte_carlo(const EnsembleSpec& spec, const DecoderConfig& decoder_cfg,
                          double success_tol, int workers, const SolverConfig& solver_cfg) {
  spec.validate();
  decoder_cfg.validate();
  std::vector<TrialSummary> trials(spec.trials);
  parallel_for(spec.trials, workers,
               [&](int i) { trials[i] = run_trial(spec, std::uint64_t(i), decoder_cfg); });

  Aggregate agg = aggregate_trials(std::move(trials), success_tol);
  try {
    const auto prediction = solve_mse_fixed_point(spec.params, solver_cfg);
    agg.replica_mse = prediction.mse();
    agg.replica_perfect = prediction.perfect();
    agg.replica_available = true;
  } catch (const SolverError&) {
    agg.replica_mse = std::numeric_limits<double>::quiet_NaN();
  }
  return agg;
}

std::vector<PhaseDiagramRow> sweep_phase_diagram(const std::vector<double>& rho_x_grid,
                                                 const std::vector<double>& deltas,
                                                 const SolverConfig& cfg, int workers) {
  if (rho_x_grid.empty() || deltas.empty()) {
    throw std::invalid_argument("sweep_phase_diagram: grid must be nonempty");
  }
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<PhaseDiagramRow> rows;
  for (double delta : deltas) {
    for (double rho_x : rho_x_grid) {
      rows.push_back({rho_x, delta, delta * rho_x, nan, nan, nan, "ok"});
    }
  }
  parallel_for(static_cast<int>(rows.size()), workers, [&](int i) {
    auto& row = rows[i];
    std::string status;
    try {
      row.alpha_c_unit_lambda = find_critical_alpha(1.0, row.rho_x, row.rho_w, cfg);
    } catch (const std::exception& e) {
      status = std::string("lambda=1: ") + e.what();
    }
    try {
      SystemParams p;
      p.rho_x = row.rho_x;
      p.rho_w = row.rho_w;
      const auto best = optimize_lambda(LambdaObjective::kMinCriticalAlpha, p, cfg);
      if (std::isfinite(best.value)) {
        row.alpha_c_optimal = best.value;
        row.lambda_star = best.lambda;
      } else {
        status += (status.empty() ? "" : "; ") + std::string("optimal: no boundary in range");
      }
    } catch (const std::exception& e) {
      status += (status.empty() ? "" : "; ") + std::string("optimal: ") + e.what();
    }
    if (!status.empty()) row.status = status;
  });
  return rows;
}

void parallel_for(int count, int workers, const std::function<void(int)>& task) {
  workers = std::clamp(workers, 1, std::max(count, 1));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          try {
            task(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sparselab
