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

// Independent reference computations for validating the closed forms.
// Nothing in the production solvers links against this library: it is used
// by the test suites and by `sparselab selftest`.

#include "sparselab/l1l1_decoder.hpp"

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sparselab::oracles {

struct QuadratureConfig {
  double abs_tol = 1e-10;
  unsigned max_subdivisions = 15;     // bisection depth per panel
  double integration_halfwidth = 10;  // in standard deviations

  void validate() const;
};

struct QuadratureResult {
  double value = 0;
  double error = 0;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved_tolerance() const { return achieved_; }

 private:
  double achieved_;
};

/// Adaptive Gauss-Kronrod estimate of int_lo^hi f(t) phi(t) dt, with the
/// range clipped to the configured half-width and split at `breakpoints`
/// (where f may have kinks or jumps). Throws QuadratureError when the
/// error estimate exceeds abs_tol.
QuadratureResult gaussian_integral(const std::function<double(double)>& f, double lo, double hi,
                                   std::vector<double> breakpoints,
                                   const QuadratureConfig& cfg = {});

/// phi_lambda(h; q_hat) = -(|h| - lambda)^2 / (2 q_hat) for |h| > lambda, else 0.
double phi_lambda_oracle(double h_arg, double lambda, double q_hat);

/// E_z phi_lambda(z sqrt(h); q_hat) by quadrature. Times q_hat this equals
/// r_lambda(h).
QuadratureResult phi_lambda_expectation(double lambda, double h, double q_hat,
                                    const QuadratureConfig& cfg = {});

/// (int 1{|t| > a} Dt, int t^2 1{|t| < a} Dt) by quadrature.
std::pair<double, double> gaussian_moment_oracles(double a, const QuadratureConfig& cfg = {});

/// Q(x) in 50-digit binary floating point, rounded to double.
double q_function_reference(double x);

/// Exact minimum of ||y - Ax||_1 + lambda ||x||_1 by enumerating every vertex
/// of the hyperplane arrangement {a_i . x = y_i} U {x_j = 0}. Exponential in
/// M + N; intended for N <= 4.
double l1l1_vertex_oracle(const ProblemInstance<double>& instance, double lambda);

/// Minimum over a uniform grid on [-half_width, half_width]^N with spacing
/// `step`, then repeated 10x zooms around the incumbent until the spacing
/// drops below `final_step`. At each zoom level the window is re-centred on
/// the incumbent until it stops moving, so narrow diagonal valleys are
/// followed rather than cut off.
double l1l1_grid_oracle(const ProblemInstance<double>& instance, double lambda,
                        double half_width, double step, double final_step = 1e-9);

}  // namespace sparselab::oracles
