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

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sparselab {

// Scalar special functions for the Gaussian-weighted integrals that appear in
// the fixed-point equations. Every function is pure and allocation-free.
//
//   q_function(x)         P(Z > x), Z ~ N(0, 1)
//   s_function(x)         x^-2 [1 - 2Q(x)] - sqrt(2 / (pi x^2)) exp(-x^2 / 2)
//   r_lambda(lambda, h)   lambda sqrt(h / 2pi) exp(-lambda^2 / 2h)
//                           - (lambda^2 + h) Q(lambda / sqrt(h))
//
// s(x) equals x^-2 E[Z^2 1{|Z| < x}] and r_lambda(h) equals
// -h E[(Z - a)_+^2] with a = lambda / sqrt(h); the implementations below use
// those forms wherever the literal expressions cancel.

namespace detail {

template <std::floating_point Scalar>
constexpr Scalar kInvSqrt2Pi = Scalar(0.398942280401432677939946059934381868L);

// exp(-x^2 / 2) with x^2 split into head + tail so that the rounding of x*x
// does not leak into the exponent (relative error grows like x^2 * eps
// otherwise).
template <std::floating_point Scalar>
Scalar gaussian_kernel(Scalar x) {
  const Scalar head = x * x;
  const Scalar tail = std::fma(x, x, -head);
  return std::exp(-head / 2) * std::exp(-tail / 2);
}

// n / (x + (n+1) / (x + (n+2) / (x + ...))) by modified Lentz. Converges for
// x > 0; the asymptotic branches only call it with x >= 3.
template <std::floating_point Scalar>
Scalar mills_tail(int first_numerator, Scalar x) {
  constexpr Scalar tiny = std::numeric_limits<Scalar>::min() * 16;
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  // f = b0 + a1/(b1 + a2/(b2 + ...)) with b0 = 0, b_k = x, a_k = n + k - 1.
  Scalar f = tiny;
  Scalar c = f;
  Scalar d = 0;
  for (int k = 0; k < 5000; ++k) {
    const Scalar a = Scalar(first_numerator + k);
    d = x + a * d;
    if (std::abs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    const Scalar delta = c * d;
    f *= delta;
    if (std::abs(delta - 1) < eps) break;
  }
  return f;
}

}  // namespace detail

/// Standard normal density.
template <std::floating_point Scalar>
Scalar gaussian_pdf(Scalar x) {
  return detail::kInvSqrt2Pi<Scalar> * detail::gaussian_kernel(x);
}

/// Mills ratio Q(x) / phi(x) = 1 / (x + 1 / (x + 2 / (x + ...))) for x >= 3.
template <std::floating_point Scalar>
Scalar mills_ratio(Scalar x) {
  return 1 / (x + detail::mills_tail<Scalar>(1, x));
}

/// Gaussian tail probability P(Z > x).
///
/// Uses erfc for x <= 6 and phi(x) * R(x) with the continued-fraction Mills
/// ratio beyond, which keeps the relative error near machine precision deep
/// into the tail where x / sqrt(2) rounding would otherwise dominate.
template <std::floating_point Scalar>
Scalar q_function(Scalar x) {
  if (x > Scalar(6)) return std::isinf(x) ? Scalar(0) : gaussian_pdf(x) * mills_ratio(x);
  return std::erfc(x / std::numbers::sqrt2_v<Scalar>) / 2;
}

/// 1 - 2Q(x), computed without subtraction.
template <std::floating_point Scalar>
Scalar two_sided_mass(Scalar x) {
  return std::erf(x / std::numbers::sqrt2_v<Scalar>);
}

/// Derivative of q_function.
template <std::floating_point Scalar>
Scalar q_function_derivative(Scalar x) {
  return -gaussian_pdf(x);
}

/// s(x) for x > 0. Throws std::domain_error otherwise.
template <std::floating_point Scalar>
Scalar s_function(Scalar x) {
  if (!(x > 0)) throw std::domain_error("s_function: argument must be positive");
  if (std::isinf(x)) return 0;
  if (x < Scalar(1)) {
    // sqrt(2/pi) * sum_k (-1)^k x^(2k+1) / (2^k k! (2k+3)); below 1e-4 only
    // the first two terms survive.
    const Scalar x2 = x * x;
    Scalar power = x;  // x^(2k+1) / (2^k k!)
    Scalar sum = 0;
    for (int k = 0; k < 40; ++k) {
      const Scalar term = power / Scalar(2 * k + 3);
      sum += (k % 2 == 0) ? term : -term;
      if (term < std::numeric_limits<Scalar>::epsilon() * sum) break;
      power *= x2 / Scalar(2 * (k + 1));
    }
    return std::numbers::sqrt2_v<Scalar> * std::numbers::inv_sqrtpi_v<Scalar> * sum;
  }
  return two_sided_mass(x) / (x * x) - 2 * gaussian_pdf(x) / x;
}

/// r_lambda(h) for lambda > 0, h > 0. Always <= 0.
template <std::floating_point Scalar>
Scalar r_lambda(Scalar lambda, Scalar h) {
  if (!(lambda > 0) || !(h > 0)) {
    throw std::domain_error("r_lambda: lambda and h must be positive");
  }
  const Scalar a = lambda / std::sqrt(h);
  if (a <= Scalar(3)) {
    return h * (a * gaussian_pdf(a) - (1 + a * a) * q_function(a));
  }
  // (1 + a^2) R(a) - a = U / ((a + U)(a + T)), T = 1 / (a + U), where U is the
  // Mills continued fraction started at numerator 2. Every factor is positive.
  const Scalar u = detail::mills_tail<Scalar>(2, a);
  const Scalar t = 1 / (a + u);
  const Scalar excess = u / ((a + u) * (a + t));
  return -h * gaussian_pdf(a) * excess;
}

/// d r_lambda / dh = -Q(lambda / sqrt(h)).
template <std::floating_point Scalar>
Scalar r_lambda_dh(Scalar lambda, Scalar h) {
  if (!(lambda > 0) || !(h > 0)) {
    throw std::domain_error("r_lambda_dh: lambda and h must be positive");
  }
  return -q_function(lambda / std::sqrt(h));
}

}  // namespace sparselab
