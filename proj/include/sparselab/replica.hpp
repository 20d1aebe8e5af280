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

#include <stdexcept>
#include <string>
#include <utility>

namespace sparselab {

// Large-system predictions for min ||y - Ax||_1 + lambda ||x||_1 with
// Bernoulli-Gaussian signal and noise and IID N(0, 1/N) measurements.
//
// Two coupled systems are solved here:
//   * the perfect-recovery boundary, a fixed point in (A, chi_hat) whose
//     success-condition residual changes sign across the phase boundary;
//   * the mean-square-error fixed point in (mse, chi, m_hat, chi_hat), valid
//     outside the perfect-recovery phase.
// The boundary depends only on (alpha, lambda, rho_x, rho_w).

/// Ensemble description: compression ratio alpha = M/N, regularization
/// weight, signal/noise densities and the variances of their nonzero entries.
struct SystemParams {
  double alpha = 0.5;
  double lambda = 1.0;
  double rho_x = 0.1;
  double rho_w = 0.1;
  double sigma2_x = 1.0;
  double sigma2_w = 1.0;

  double signal_power() const { return rho_x * sigma2_x; }
  void validate() const;
};

/// The variance-free subset of SystemParams that fixes the phase boundary.
struct ThresholdParams {
  double alpha = 0.5;
  double lambda = 1.0;
  double rho_x = 0.1;
  double rho_w = 0.1;

  static ThresholdParams from(const SystemParams& p) {
    return {p.alpha, p.lambda, p.rho_x, p.rho_w};
  }
  void validate() const;
};

struct SolverConfig {
  double damping = 0.5;  // weight on the previous iterate
  double rel_tol = 1e-12;
  int max_iters = 200000;
  double lambda_lo = 1e-3;
  double lambda_hi = 1e3;
  int lambda_grid_points = 41;
  double lambda_log_tol = 1e-7;
  double bisection_tol = 1e-6;
  double alpha_lo = 1e-4;
  double alpha_hi = 1.0;
  double rho_lo = 1e-6;
  double rho_hi = 1.0 - 1e-6;
  int max_damping_increases = 4;
  double divergence_m_hat = 1e12;
  double divergence_mse = 1e-24;

  void validate() const;
};

/// Order parameters of the MSE fixed point plus the overlap diagnostics
/// m = E[x0 x_hat] / N and Q = ||x_hat||^2 / N.
struct FixedPointState {
  double mse = 0;
  double chi = 1;
  double m_hat = 1;
  double chi_hat = 1;
  double diag_m = 0;
  double diag_q = 0;
  double residual = 0;
  bool converged = false;
  int iterations = 0;
};

/// Boundary fixed point and the success-condition residual
/// alpha (1 - rho_w)[1 - 2Q(1/sqrt(A))] - [2(1 - rho_x) Q(lambda/sqrt(chi_hat)) + rho_x].
/// A positive residual means perfect recovery.
struct ThresholdState {
  double A = 1;
  double chi_hat = 1;
  double condition_residual = 0;
  bool converged = false;
  int iterations = 0;

  bool perfect_recovery() const { return condition_residual > 0; }
};

enum class MseVerdict {
  kConverged,              // finite-MSE fixed point reached
  kPerfectReconstruction,  // m_hat -> inf, mse -> 0
};

struct MseSolution {
  MseVerdict verdict = MseVerdict::kConverged;
  FixedPointState state;

  bool perfect() const { return verdict == MseVerdict::kPerfectReconstruction; }
  /// Predicted MSE, 0 in the perfect phase.
  double mse() const { return perfect() ? 0.0 : state.mse; }
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iteration budget exhausted (or values stopped being finite) before the
/// fixed point was reached. Carries the last iterate.
template <typename State>
class ConvergenceError : public SolverError {
 public:
  ConvergenceError(const std::string& what, State last)
      : SolverError(what), last_state_(std::move(last)) {}
  const State& last_state() const { return last_state_; }

 private:
  State last_state_;
};

/// m_hat overflowed during an MSE sweep: the iteration is running off toward
/// the perfect-reconstruction phase.
class DivergenceError : public SolverError {
 public:
  DivergenceError(const std::string& what, FixedPointState last)
      : SolverError(what), last_state_(last) {}
  const FixedPointState& last_state() const { return last_state_; }

 private:
  FixedPointState last_state_;
};

/// Bisection bracket without a sign change. `perfect_everywhere` tells which
/// side of the bracket the boundary lies on.
class NoPhaseBoundary : public SolverError {
 public:
  NoPhaseBoundary(const std::string& what, bool perfect_everywhere)
      : SolverError(what), perfect_everywhere_(perfect_everywhere) {}
  bool perfect_everywhere() const { return perfect_everywhere_; }

 private:
  bool perfect_everywhere_;
};

/// Starting point: mse = rho_x sigma2_x, chi = 1, m_hat = 1, chi_hat = alpha.
FixedPointState initial_mse_state(const SystemParams& params);

/// One Gauss-Seidel sweep mse -> chi -> m_hat -> chi_hat, each blended with its
/// previous value by `damping`; refreshes diag_m, diag_q and residual (max
/// relative change). Throws DivergenceError if m_hat overflows.
FixedPointState iterate_mse_step(const SystemParams& params, const FixedPointState& state,
                                 double damping);

/// Iterates to rel_tol, or returns kPerfectReconstruction once
/// m_hat > divergence_m_hat and mse < divergence_mse.
/// Throws ConvergenceError<FixedPointState> otherwise.
MseSolution solve_mse_fixed_point(const SystemParams& params, const SolverConfig& cfg = {});

/// m = 2 sigma2_x rho_x Q(lambda / sqrt(chi_hat + sigma2_x m_hat^2)) and
/// Q = -2 m_hat^-2 [(1 - rho_x) r(chi_hat) + rho_x r(chi_hat + sigma2_x m_hat^2)].
std::pair<double, double> overlap_diagnostics(const SystemParams& params, double m_hat,
                                              double chi_hat);

/// Right-hand sides of the four MSE equations at `state`, undamped, each
/// evaluated from `state` alone (Jacobi form).
FixedPointState mse_equations(const SystemParams& params, const FixedPointState& state);

ThresholdState threshold_step(const ThresholdParams& params, const ThresholdState& state,
                              double damping);
double success_condition(const ThresholdParams& params, double A, double chi_hat);

ThresholdState solve_threshold_fixed_point(const ThresholdParams& params,
                                           const SolverConfig& cfg = {});

double find_critical_rho_x(double alpha, double lambda, double rho_w,
                           const SolverConfig& cfg = {});
double find_critical_alpha(double lambda, double rho_x, double rho_w,
                           const SolverConfig& cfg = {});

enum class LambdaObjective {
  kMaxCriticalRhoX,   // maximize rho_x_c(alpha, lambda, rho_w)
  kMinCriticalAlpha,  // minimize alpha_c(lambda, rho_x, rho_w)
  kMinMse,            // minimize the predicted MSE at fixed params
};

struct LambdaOptimum {
  double lambda = 0;
  double value = 0;
  int evaluations = 0;
};

/// Value of `objective` at `lambda`. Uses the fields of `params` the
/// objective needs; `params.lambda` is ignored.
double lambda_objective(LambdaObjective objective, const SystemParams& params, double lambda,
                        const SolverConfig& cfg = {});

/// Log-grid scan over [lambda_lo, lambda_hi] followed by golden-section search
/// on log lambda around the best grid point. Throws SolverError naming the
/// probe lambda if an objective evaluation fails.
LambdaOptimum optimize_lambda(LambdaObjective objective, const SystemParams& params,
                              const SolverConfig& cfg = {});

}  // namespace sparselab
