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

#pragma once

#include "sparselab/l1l1_decoder.hpp"
#include "sparselab/replica.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace sparselab {

// Monte Carlo harness: random ensemble instances, decoder trials and the
// aggregate statistics that are compared against the replica prediction.

struct EnsembleSpec {
  int N = 256;
  SystemParams params;
  int trials = 50;
  std::uint64_t base_seed = 1;

  int M() const;
  void validate() const;
};

/// Which random quantity a stream feeds. Streams for different purposes of
/// the same trial are independent.
enum class StreamPurpose : std::uint64_t {
  kMatrix = 1,
  kSignal = 2,
  kNoise = 3,
};

using RandomStream = std::mt19937_64;

/// Stream keyed by (base_seed, trial_index, purpose); independent of the
/// order in which trials execute.
RandomStream make_stream(std::uint64_t base_seed, std::uint64_t trial_index,
                         StreamPurpose purpose);

/// n IID draws from (1 - rho) delta(z) + rho N(0, sigma2).
Vector<double> sample_mixture(int n, double rho, double sigma2, RandomStream& stream);

/// A ~ N(0, 1/N) entrywise, x0 ~ mixture(rho_x, sigma2_x), w ~ mixture(rho_w,
/// sigma2_w), y = A x0 + w.
ProblemInstance<double> sample_instance(const EnsembleSpec& spec, std::uint64_t trial_index);

struct TrialSummary {
  std::uint64_t trial_index = 0;
  double mse = 0;  // ||x_hat - x0||^2 / N
  double objective = 0;
  bool converged = false;
  int iterations = 0;
  double support_precision = 0;
  double support_recall = 0;
  double wall_seconds = 0;
};

struct Aggregate {
  double mean_mse = 0;
  double std_error = 0;
  double median_mse = 0;
  double success_fraction = 0;
  int trials = 0;        // trials included in the statistics (converged)
  int nonconverged = 0;  // excluded from the statistics
  double replica_mse = 0;
  bool replica_perfect = false;
  bool replica_available = false;
  std::vector<TrialSummary> per_trial;
};

/// Support precision/recall of x_hat against x0, entries with |.| > threshold.
std::pair<double, double> support_scores(const Vector<double>& x_hat, const Vector<double>& x0,
                                         double threshold = 1e-6);

TrialSummary run_trial(const EnsembleSpec& spec, std::uint64_t trial_index,
                       const DecoderConfig& decoder_cfg);

/// Mean, standard error, median and success fraction (mse <= success_tol)
/// over converged trials, folded in trial-index order.
Aggregate aggregate_trials(std::vector<TrialSummary> trials, double success_tol);

/// Decodes every trial on `workers` threads and aggregates; attaches the
/// replica prediction for spec.params.
Aggregate run_monte_carlo(const EnsembleSpec& spec, const DecoderConfig& decoder_cfg,
                          double success_tol = 1e-6, int workers = 1,
                          const SolverConfig& solver_cfg = {});

struct PhaseDiagramRow {
  double rho_x = 0;
  double delta = 0;
  double rho_w = 0;
  double alpha_c_unit_lambda = 0;
  double alpha_c_optimal = 0;
  double lambda_star = 0;
  std::string status = "ok";
};

/// For each (rho_x, delta) with rho_w = delta rho_x: alpha_c at lambda = 1 and
/// at the lambda minimizing alpha_c. Rows are in (delta, rho_x) grid order.
std::vector<PhaseDiagramRow> sweep_phase_diagram(const std::vector<double>& rho_x_grid,
                                                 const std::vector<double>& deltas,
                                                 const SolverConfig& cfg = {}, int workers = 1);

/// Runs task(i) for i in [0, count) on up to `workers` threads.
void parallel_for(int count, int workers, const std::function<void(int)>& task);

}  // namespace sparselab
