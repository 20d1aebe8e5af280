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

#include "sparselab/experiments.hpp"
#include "sparselab/l1l1_decoder.hpp"
#include "sparselab/records.hpp"
#include "sparselab/replica.hpp"

#include <cstdint>
#include <iosfwd>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparselab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad or missing flags. Raised before any computation starts.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  double start = 0;
  double stop = 0;
  int count = 0;
  bool log_spacing = false;

  /// `count` points from start to stop inclusive; a single point is `start`.
  std::vector<double> points() const;
  void validate() const;
};

struct RunConfig {
  std::string subcommand;
  SystemParams params;
  GridSpec grid;
  std::string axis = "rho-x";               // mse-curve
  std::string solve_for;                    // threshold
  std::string objective;                    // optimize-lambda
  std::vector<double> deltas{0.2, 0.1, 0.02};  // phase-diagram
  std::uint64_t seed = 1;
  int trials = 50;
  int n = 256;
  bool with_mc = false;
  double success_tol = 1e-6;
  std::string instance_path;  // decode
  std::string output_path;    // empty: standard output
  std::string format = "csv";
  int workers = 1;
  bool quiet = false;
  SolverConfig solver;
  DecoderConfig decoder;
  std::set<std::string> given;  // long flag names present on the command line or config file

  bool has(const std::string& flag) const { return given.count(flag) != 0; }
};

/// Throws UsageError unless every flag the subcommand needs is present and
/// the values are in range.
void validate(const RunConfig& cfg);

/// `key=value` lines describing every resolved setting of `cfg`.
std::vector<std::pair<std::string, std::string>> parameter_echo(const RunConfig& cfg);

// Each command returns a table whose column set depends only on the
// subcommand (and on --with-mc for mse-curve). Progress goes to `progress`.
//
// threshold:       solve_for, alpha, lambda, rho_x, rho_w, rho_x_c, alpha_c, A,
//                  chi_hat, condition_residual
// mse-curve:       alpha, lambda, rho_x, rho_w, sigma2_x, sigma2_w, status, phase,
//                  mse, chi, m_hat, chi_hat, diag_m, diag_q, iterations
//                  [, mc_mean_mse, mc_std_error, mc_median_mse,
//                  mc_success_fraction, mc_trials, mc_nonconverged]
// phase-diagram:   rho_x, delta, rho_w, alpha_c_lambda1, alpha_c_optimal,
//                  lambda_star, status
// optimize-lambda: objective, alpha, rho_x, rho_w, sigma2_x, sigma2_w, lambda_star,
//                  objective_value, evaluations
// monte-carlo:     alpha, lambda, rho_x, rho_w, sigma2_x, sigma2_w, N, M, trials,
//                  nonconverged, mean_mse, std_error, median_mse,
//                  success_fraction, replica_mse, replica_phase
// decode:          index, x_hat, x0
// selftest:        suite, checks, failures, detail
OutputTable cmd_threshold(const RunConfig& cfg);
OutputTable cmd_mse_curve(const RunConfig& cfg, std::ostream& progress);
OutputTable cmd_phase_diagram(const RunConfig& cfg, std::ostream& progress);
OutputTable cmd_optimize_lambda(const RunConfig& cfg);
OutputTable cmd_monte_carlo(const RunConfig& cfg, std::ostream& progress);
OutputTable cmd_decode(const RunConfig& cfg);
OutputTable cmd_selftest(const RunConfig& cfg, std::ostream& progress);

/// Reads a decode instance: {"A": [[...], ...], "y": [...], "x0": [...]?, "w": [...]?}.
ProblemInstance<double> load_instance(const std::string& path);

/// Parses a flat `key = value` file; '#' starts a comment. Keys may use
/// dashes or underscores.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

/// Full program: parse `args` (without argv[0]), run, write the table.
/// Returns kExitOk, kExitFailure or kExitUsage.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sparselab::cli
