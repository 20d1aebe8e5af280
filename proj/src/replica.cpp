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

#include "sparselab/replica.hpp"

#include "sparselab/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>
#include <vector>

namespace sparselab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool in_closed_unit(double v) { return v >= 0.0 && v <= 1.0; }

// weight * f(), skipping f when the mixture weight vanishes so that 0 * inf
// never enters the sums.
template <typename F>
double weighted(double weight, F&& f) {
  return weight == 0.0 ? 0.0 : weight * f();
}

double blend(double previous, double update, double damping) {
  return damping * previous + (1.0 - damping) * update;
}

double relative_change(double previous, double next) {
  const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
  return std::abs(next - previous) / scale;
}

bool all_finite(const FixedPointState& s) {
  return std::isfinite(s.mse) && std::isfinite(s.chi) && std::isfinite(s.m_hat) &&
         std::isfinite(s.chi_hat);
}

// s(a) + 2Q(a), the Gaussian second-moment kernel shared by both systems.
double clipped_second_moment(double a) {
  if (std::isinf(a)) return 0.0;
  if (a == 0.0) return 1.0;  // s(0+) = 0, 2Q(0) = 1
  return s_function(a) + 2.0 * q_function(a);
}

// The MSE written as m_hat^-2 { rho_x [lambda^2 (s(a) + 2Q(a))
// - chi_hat (1 - 4Q(a))] - 2 (1 - rho_x) r(chi_hat) }, a = lambda / sqrt(h2).
// Algebraically identical to rho_x sigma2_x - 4 sigma2_x rho_x Q(a)
// - 2 m_hat^-2 [(1 - rho_x) r(chi_hat) + rho_x r(h2)], but free of the
// O(rho_x sigma2_x) cancellation as m_hat grows.
double mse_equation(const SystemParams& p, double m_hat, double chi_hat) {
  const double lambda2 = p.lambda * p.lambda;
  const double signal = weighted(p.rho_x, [&] {
    const double h2 = chi_hat + p.sigma2_x * m_hat * m_hat;
    const double a = p.lambda / std::sqrt(h2);
    return lambda2 * clipped_second_moment(a) - chi_hat * (1.0 - 4.0 * q_function(a));
  });
  const double off_support =
      weighted(1.0 - p.rho_x, [&] { return -2.0 * r_lambda(p.lambda, chi_hat); });
  return (signal + off_support) / (m_hat * m_hat);
}

double chi_equation(const SystemParams& p, double m_hat, double chi_hat) {
  const double off_support =
      weighted(1.0 - p.rho_x, [&] { return q_function(p.lambda / std::sqrt(chi_hat)); });
  const double on_support = weighted(p.rho_x, [&] {
    return q_function(p.lambda / std::sqrt(chi_hat + p.sigma2_x * m_hat * m_hat));
  });
  return 2.0 / m_hat * (off_support + on_support);
}

double m_hat_equation(const SystemParams& p, double mse, double chi) {
  const double clean =
      weighted(1.0 - p.rho_w, [&] { return two_sided_mass(chi / std::sqrt(mse)); });
  const double corrupted =
      weighted(p.rho_w, [&] { return two_sided_mass(chi / std::sqrt(mse + p.sigma2_w)); });
  return p.alpha / chi * (clean + corrupted);
}

double chi_hat_equation(const SystemParams& p, double mse, double chi) {
  const double clean =
      weighted(1.0 - p.rho_w, [&] { return clipped_second_moment(chi / std::sqrt(mse)); });
  const double corrupted = weighted(
      p.rho_w, [&] { return clipped_second_moment(chi / std::sqrt(mse + p.sigma2_w)); });
  return p.alpha * (clean + corrupted);
}

double threshold_A_equation(const ThresholdParams& p, double chi_hat) {
  const double lambda2 = p.lambda * p.lambda;
  const double numerator =
      p.rho_x * (lambda2 + chi_hat) -
      weighted(1.0 - p.rho_x, [&] { return 2.0 * r_lambda(p.lambda, chi_hat); });
  const double denominator =
      weighted(1.0 - p.rho_x, [&] { return 2.0 * q_function(p.lambda / std::sqrt(chi_hat)); }) +
      p.rho_x;
  return numerator / (denominator * denominator);
}

// alpha (1 - rho_w) {A[1 - 2Q(b)] - sqrt(2A/pi) e^{-b^2/2} + 2Q(b)} + alpha rho_w
// with b = 1/sqrt(A); the braces equal s(b) + 2Q(b).
double threshold_chi_hat_equation(const ThresholdParams& p, double A) {
  return weighted(1.0 - p.rho_w,
                  [&] { return p.alpha * clipped_second_moment(1.0 / std::sqrt(A)); }) +
         p.alpha * p.rho_w;
}

std::string describe(const char* what, double value) {
  std::ostringstream os;
  os.precision(17);
  os << what << value;
  return os.str();
}

}  // namespace

void SystemParams::validate() const {
  if (!(alpha > 0) || !std::isfinite(alpha)) {
    throw std::invalid_argument(describe("SystemParams: alpha must be positive, got ", alpha));
  }
  if (!(lambda > 0) || !std::isfinite(lambda)) {
    throw std::invalid_argument(describe("SystemParams: lambda must be positive, got ", lambda));
  }
  if (!in_closed_unit(rho_x)) {
    throw std::invalid_argument(describe("SystemParams: rho_x must lie in [0, 1], got ", rho_x));
  }
  if (!in_closed_unit(rho_w)) {
    throw std::invalid_argument(describe("SystemParams: rho_w must lie in [0, 1], got ", rho_w));
  }
  if (!(sigma2_x > 0) || !std::isfinite(sigma2_x) || !(sigma2_w > 0) ||
      !std::isfinite(sigma2_w)) {
    throw std::invalid_argument("SystemParams: variances must be finite and positive");
  }
}

void ThresholdParams::validate() const {
  SystemParams{alpha, lambda, rho_x, rho_w, 1.0, 1.0}.validate();
}

void SolverConfig::validate() const {
  if (!(damping >= 0.0 && damping < 1.0)) {
    throw std::invalid_argument("SolverConfig: damping must lie in [0, 1)");
  }
  if (!(rel_tol > 0) || !(bisection_tol > 0) || !(lambda_log_tol > 0)) {
    throw std::invalid_argument("SolverConfig: tolerances must be positive");
  }
  if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be positive");
  if (!(lambda_lo > 0 && lambda_lo < lambda_hi) || lambda_grid_points < 3) {
    throw std::invalid_argument("SolverConfig: invalid lambda bracket");
  }
  if (!(alpha_lo > 0 && alpha_lo < alpha_hi) || !(rho_lo >= 0 && rho_lo < rho_hi && rho_hi <= 1)) {
    throw std::invalid_argument("SolverConfig: invalid bisection bracket");
  }
}

// ---------------------------------------------------------------------------
// MSE fixed point

FixedPointState initial_mse_state(const SystemParams& params) {
  FixedPointState s;
  s.mse = params.signal_power();
  s.chi = 1.0;
  s.m_hat = 1.0;
  s.chi_hat = params.alpha;
  std::tie(s.diag_m, s.diag_q) = overlap_diagnostics(params, s.m_hat, s.chi_hat);
  return s;
}

std::pair<double, double> overlap_diagnostics(const SystemParams& p, double m_hat,
                                              double chi_hat) {
  const double h2 = chi_hat + p.sigma2_x * m_hat * m_hat;
  const double m =
      weighted(p.rho_x, [&] { return 2.0 * p.sigma2_x * q_function(p.lambda / std::sqrt(h2)); });
  const double r_sum = weighted(1.0 - p.rho_x, [&] { return r_lambda(p.lambda, chi_hat); }) +
                       weighted(p.rho_x, [&] { return r_lambda(p.lambda, h2); });
  const double q = -2.0 * r_sum / (m_hat * m_hat);
  return {m, q};
}

FixedPointState mse_equations(const SystemParams& params, const FixedPointState& s) {
  FixedPointState out = s;
  out.mse = mse_equation(params, s.m_hat, s.chi_hat);
  out.chi = chi_equation(params, s.m_hat, s.chi_hat);
  out.m_hat = m_hat_equation(params, s.mse, s.chi);
  out.chi_hat = chi_hat_equation(params, s.mse, s.chi);
  std::tie(out.diag_m, out.diag_q) = overlap_diagnostics(params, out.m_hat, out.chi_hat);
  out.residual = std::max({relative_change(s.mse, out.mse), relative_change(s.chi, out.chi),
                           relative_change(s.m_hat, out.m_hat),
                           relative_change(s.chi_hat, out.chi_hat)});
  return out;
}

FixedPointState iterate_mse_step(const SystemParams& params, const FixedPointState& s,
                                 double damping) {
  if (!(s.chi > 0) || !(s.m_hat > 0) || !(s.chi_hat > 0) || !(s.mse >= 0)) {
    throw std::invalid_argument("iterate_mse_step: chi, m_hat, chi_hat must be positive");
  }
  FixedPointState out = s;
  out.mse = blend(s.mse, mse_equation(params, s.m_hat, s.chi_hat), damping);
  out.chi = blend(s.chi, chi_equation(params, s.m_hat, s.chi_hat), damping);
  out.m_hat = blend(s.m_hat, m_hat_equation(params, out.mse, out.chi), damping);
  if (std::isinf(out.m_hat)) {
    throw DivergenceError("m_hat overflowed: iteration is heading to perfect reconstruction",
                          out);
  }
  out.chi_hat = blend(s.chi_hat, chi_hat_equation(params, out.mse, out.chi), damping);
  if (std::isfinite(out.m_hat) && out.m_hat > 0 && std::isfinite(out.chi_hat) &&
      out.chi_hat > 0) {
    std::tie(out.diag_m, out.diag_q) = overlap_diagnostics(params, out.m_hat, out.chi_hat);
  }
  out.residual = std::max({relative_change(s.mse, out.mse), relative_change(s.chi, out.chi),
                           relative_change(s.m_hat, out.m_hat),
                           relative_change(s.chi_hat, out.chi_hat)});
  out.iterations = s.iterations + 1;
  out.converged = false;
  return out;
}

MseSolution solve_mse_fixed_point(const SystemParams& params, const SolverConfig& cfg) {
  params.validate();
  cfg.validate();

  double damping = cfg.damping;
  int increases = 0;
  FixedPointState state = initial_mse_state(params);

  while (state.iterations < cfg.max_iters) {
    FixedPointState next;
    try {
      next = iterate_mse_step(params, state, damping);
    } catch (const DivergenceError& e) {
      return {MseVerdict::kPerfectReconstruction, e.last_state()};
    }
    if (!all_finite(next) || !(next.chi > 0) || !(next.m_hat > 0) || !(next.chi_hat > 0)) {
      if (increases == cfg.max_damping_increases) {
        throw ConvergenceError<FixedPointState>(
            "MSE fixed point: non-finite iterate after maximal damping", state);
      }
      ++increases;
      damping = 1.0 - 0.5 * (1.0 - damping);
      continue;
    }
    state = next;
    if (state.m_hat > cfg.divergence_m_hat && state.mse < cfg.divergence_mse) {
      return {MseVerdict::kPerfectReconstruction, state};
    }
    if (state.residual <= cfg.rel_tol) {
      state.converged = true;
      return {MseVerdict::kConverged, state};
    }
  }
  throw ConvergenceError<FixedPointState>(
      describe("MSE fixed point did not converge; last residual ", state.residual), state);
}

// ---------------------------------------------------------------------------
// Perfect-recovery boundary

double success_condition(const ThresholdParams& p, double A, double chi_hat) {
  const double lhs =
      weighted(1.0 - p.rho_w, [&] { return p.alpha * two_sided_mass(1.0 / std::sqrt(A)); });
  const double rhs =
      weighted(1.0 - p.rho_x, [&] { return 2.0 * q_function(p.lambda / std::sqrt(chi_hat)); }) +
      p.rho_x;
  return lhs - rhs;
}

ThresholdState threshold_step(const ThresholdParams& p, const ThresholdState& s,
                              double damping) {
  ThresholdState out = s;
  out.A = blend(s.A, threshold_A_equation(p, s.chi_hat), damping);
  out.chi_hat = blend(s.chi_hat, threshold_chi_hat_equation(p, out.A), damping);
  out.iterations = s.iterations + 1;
  out.converged = false;
  return out;
}

ThresholdState solve_threshold_fixed_point(const ThresholdParams& params,
                                           const SolverConfig& cfg) {
  params.validate();
  cfg.validate();

  double damping = cfg.damping;
  int increases = 0;
  ThresholdState state;
  state.A = 1.0;
  state.chi_hat = params.alpha;

  while (state.iterations < cfg.max_iters) {
    const ThresholdState next = threshold_step(params, state, damping);
    if (!std::isfinite(next.A) || !std::isfinite(next.chi_hat) || !(next.A > 0) ||
        !(next.chi_hat > 0)) {
      if (increases == cfg.max_damping_increases) {
        throw ConvergenceError<ThresholdState>(
            "threshold fixed point: non-finite iterate after maximal damping", state);
      }
      ++increases;
      damping = 1.0 - 0.5 * (1.0 - damping);
      continue;
    }
    const double change =
        std::max(relative_change(state.A, next.A), relative_change(state.chi_hat, next.chi_hat));
    state = next;
    if (change <= cfg.rel_tol) {
      state.converged = true;
      state.condition_residual = success_condition(params, state.A, state.chi_hat);
      return state;
    }
  }
  state.condition_residual = success_condition(params, state.A, state.chi_hat);
  throw ConvergenceError<ThresholdState>("threshold fixed point did not converge", state);
}

namespace {

// Root of a residual that is positive at `perfect_end` and negative at the
// other end.
template <typename Residual>
double bisect_boundary(Residual&& residual, double lo, double hi, bool perfect_at_lo,
                       double tol, const char* name) {
  const double f_lo = residual(lo);
  const double f_hi = residual(hi);
  const bool lo_perfect = f_lo > 0;
  const bool hi_perfect = f_hi > 0;
  if (lo_perfect == hi_perfect) {
    throw NoPhaseBoundary(std::string("no phase boundary in range for ") + name, lo_perfect);
  }
  if (lo_perfect != perfect_at_lo) {
    throw SolverError(std::string("success condition has the wrong orientation in ") + name);
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if ((residual(mid) > 0) == perfect_at_lo) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double find_critical_rho_x(double alpha, double lambda, double rho_w, const SolverConfig& cfg) {
  ThresholdParams{alpha, lambda, 0.5, rho_w}.validate();
  if (!(rho_w < 1.0)) throw std::invalid_argument("find_critical_rho_x: rho_w must be < 1");
  cfg.validate();
  auto residual = [&](double rho_x) {
    return solve_threshold_fixed_point({alpha, lambda, rho_x, rho_w}, cfg).condition_residual;
  };
  // Sparser signals recover: perfect at the low end.
  return bisect_boundary(residual, cfg.rho_lo, cfg.rho_hi, true, cfg.bisection_tol, "rho_x");
}

double find_critical_alpha(double lambda, double rho_x, double rho_w, const SolverConfig& cfg) {
  ThresholdParams{1.0, lambda, rho_x, rho_w}.validate();
  cfg.validate();
  auto residual = [&](double alpha) {
    return solve_threshold_fixed_point({alpha, lambda, rho_x, rho_w}, cfg).condition_residual;
  };
  // More measurements recover: perfect at the high end.
  return bisect_boundary(residual, cfg.alpha_lo, cfg.alpha_hi, false, cfg.bisection_tol, "alpha");
}

// ---------------------------------------------------------------------------
// Regularization optimizer

double lambda_objective(LambdaObjective objective, const SystemParams& params, double lambda,
                        const SolverConfig& cfg) {
  switch (objective) {
    case LambdaObjective::kMaxCriticalRhoX:
      try {
        return find_critical_rho_x(params.alpha, lambda, params.rho_w, cfg);
      } catch (const NoPhaseBoundary& e) {
        return e.perfect_everywhere() ? 1.0 : 0.0;
      }
    case LambdaObjective::kMinCriticalAlpha:
      try {
        return find_critical_alpha(lambda, params.rho_x, params.rho_w, cfg);
      } catch (const NoPhaseBoundary& e) {
        return e.perfect_everywhere() ? 0.0 : kInf;
      }
    case LambdaObjective::kMinMse: {
      SystemParams p = params;
      p.lambda = lambda;
      return solve_mse_fixed_point(p, cfg).mse();
    }
  }
  throw std::invalid_argument("lambda_objective: unknown objective");
}

LambdaOptimum optimize_lambda(LambdaObjective objective, const SystemParams& params,
                              const SolverConfig& cfg) {
  cfg.validate();
  const double sense = objective == LambdaObjective::kMaxCriticalRhoX ? -1.0 : 1.0;
  int evaluations = 0;
  // Minimized internally; `sense` flips maximization problems.
  auto cost = [&](double log_lambda) {
    const double lambda = std::exp(log_lambda);
    ++evaluations;
    try {
      return sense * lambda_objective(objective, params, lambda, cfg);
    } catch (const std::exception& e) {
      throw SolverError(describe("optimize_lambda: objective failed at lambda = ", lambda) +
                        ": " + e.what());
    }
  };

  const double lo = std::log(cfg.lambda_lo);
  const double hi = std::log(cfg.lambda_hi);
  const int n = cfg.lambda_grid_points;
  std::vector<double> grid(n);
  std::vector<double> values(n);
  int best = 0;
  for (int i = 0; i < n; ++i) {
    grid[i] = lo + (hi - lo) * i / (n - 1);
    values[i] = cost(grid[i]);
    if (values[i] < values[best]) best = i;
  }

  double a = grid[std::max(best - 1, 0)];
  double b = grid[std::min(best + 1, n - 1)];
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = cost(c);
  double fd = cost(d);
  while (b - a > cfg.lambda_log_tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = cost(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = cost(d);
    }
  }

  double arg = grid[best];
  double value = values[best];
  if (fc < value) {
    arg = c;
    value = fc;
  }
  if (fd < value) {
    arg = d;
    value = fd;
  }
  return {std::exp(arg), sense * value, evaluations};
}

}  // namespace sparselab
