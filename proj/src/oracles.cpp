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

#include "sparselab/oracles.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace sparselab::oracles {
namespace {

double standard_normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

double objective(const ProblemInstance<double>& inst, const Vector<double>& x, double lambda) {
  return (inst.y - inst.A * x).lpNorm<1>() + lambda * x.lpNorm<1>();
}

}  // namespace

void QuadratureConfig::validate() const {
  if (!(abs_tol > 0)) throw std::invalid_argument("QuadratureConfig: abs_tol must be positive");
  if (!(integration_halfwidth >= 8)) {
    throw std::invalid_argument("QuadratureConfig: integration_halfwidth must be at least 8");
  }
  if (max_subdivisions < 1) {
    throw std::invalid_argument("QuadratureConfig: max_subdivisions must be positive");
  }
}

QuadratureResult gaussian_integral(const std::function<double(double)>& f, double lo, double hi,
                                   std::vector<double> breakpoints,
                                   const QuadratureConfig& cfg) {
  cfg.validate();
  lo = std::max(lo, -cfg.integration_halfwidth);
  hi = std::min(hi, cfg.integration_halfwidth);
  QuadratureResult total;
  if (!(lo < hi)) return total;

  breakpoints.push_back(lo);
  breakpoints.push_back(hi);
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

  auto integrand = [&](double t) { return f(t) * standard_normal_pdf(t); };
  for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    const double a = breakpoints[k];
    const double b = breakpoints[k + 1];
    if (a < lo || b > hi || !(a < b)) continue;
    double error = 0;
    total.value += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, a, b, cfg.max_subdivisions, 1e-14, &error);
    total.error += error;
  }
  if (total.error > cfg.abs_tol) {
    std::ostringstream os;
    os << "gaussian_integral: error estimate " << total.error << " exceeds " << cfg.abs_tol;
    throw QuadratureError(os.str(), total.error);
  }
  return total;
}

double phi_lambda_oracle(double h_arg, double lambda, double q_hat) {
  if (!(q_hat > 0)) throw std::domain_error("phi_lambda_oracle: q_hat must be positive");
  const double excess = std::abs(h_arg) - lambda;
  return excess > 0 ? -excess * excess / (2.0 * q_hat) : 0.0;
}

QuadratureResult phi_lambda_expectation(double lambda, double h, double q_hat,
                                    const QuadratureConfig& cfg) {
  if (!(lambda > 0) || !(h > 0)) {
    throw std::domain_error("phi_lambda_expectation: lambda and h must be positive");
  }
  const double kink = lambda / std::sqrt(h);
  const double sqrt_h = std::sqrt(h);
  return gaussian_integral([&](double z) { return phi_lambda_oracle(z * sqrt_h, lambda, q_hat); },
                           -cfg.integration_halfwidth, cfg.integration_halfwidth,
                           {-kink, kink}, cfg);
}

std::pair<double, double> gaussian_moment_oracles(double a, const QuadratureConfig& cfg) {
  if (!(a > 0)) throw std::domain_error("gaussian_moment_oracles: a must be positive");
  const double hw = cfg.integration_halfwidth;
  const auto tails = gaussian_integral([](double) { return 1.0; }, -hw, -a, {}, cfg).value +
                     gaussian_integral([](double) { return 1.0; }, a, hw, {}, cfg).value;
  const auto core = gaussian_integral([](double t) { return t * t; }, -a, a, {0.0}, cfg).value;
  return {tails, core};
}

double q_function_reference(double x) {
  using Big = boost::multiprecision::cpp_bin_float_50;
  const Big arg = Big(x) / boost::multiprecision::sqrt(Big(2));
  return static_cast<double>(boost::math::erfc(arg) / 2);
}

double l1l1_vertex_oracle(const ProblemInstance<double>& inst, double lambda) {
  inst.validate();
  const int m = static_cast<int>(inst.rows());
  const int n = static_cast<int>(inst.cols());
  // Hyperplane k < m is a_k . x = y_k; k >= m is x_{k-m} = 0.
  Matrix<double> normals(m + n, n);
  Vector<double> offsets(m + n);
  normals.topRows(m) = inst.A;
  offsets.head(m) = inst.y;
  normals.bottomRows(n).setIdentity();
  offsets.tail(n).setZero();

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(n);
  // Lexicographic n-subsets of {0, ..., m + n - 1}.
  for (int i = 0; i < n; ++i) pick[i] = i;
  while (true) {
    Matrix<double> sys(n, n);
    Vector<double> rhs(n);
    for (int i = 0; i < n; ++i) {
      sys.row(i) = normals.row(pick[i]);
      rhs(i) = offsets(pick[i]);
    }
    const auto lu = sys.fullPivLu();
    if (lu.rank() == n) best = std::min(best, objective(inst, lu.solve(rhs), lambda));

    int i = n - 1;
    while (i >= 0 && pick[i] == m + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int k = i + 1; k < n; ++k) pick[k] = pick[k - 1] + 1;
  }
  return best;
}

double l1l1_grid_oracle(const ProblemInstance<double>& inst, double lambda, double half_width,
                        double step, double final_step) {
  inst.validate();
  const int n = static_cast<int>(inst.cols());
  Vector<double> center = Vector<double>::Zero(n);
  double best = objective(inst, center, lambda);

  // At each spacing, rescan a window around the incumbent until it stops
  // moving, then shrink the spacing tenfold.
  bool first_pass = true;
  while (true) {
    const int per_axis = static_cast<int>(std::llround(2.0 * half_width / step)) + 1;
    std::vector<int> idx(n, 0);
    Vector<double> x(n);
    Vector<double> incumbent = center;
    while (true) {
      for (int j = 0; j < n; ++j) x(j) = center(j) - half_width + idx[j] * step;
      const double value = objective(inst, x, lambda);
      if (value < best) {
        best = value;
        incumbent = x;
      }
      int j = 0;
      while (j < n && ++idx[j] == per_axis) idx[j++] = 0;
      if (j == n) break;
    }
    const bool moved = (incumbent - center).lpNorm<Eigen::Infinity>() > 0.5 * step;
    center = incumbent;
    if (!first_pass && moved) continue;
    if (step <= final_step) break;
    half_width = 2.0 * step;
    step /= 10.0;
    first_pass = false;
  }
  return best;
}

}  // namespace sparselab::oracles
