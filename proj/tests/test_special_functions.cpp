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
#include "sparselab/special_functions.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace sparselab;
namespace orc = sparselab::oracles;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Second moment of the standard normal restricted to |t| < a, in closed form.
double truncated_second_moment(double a) {
  return 1.0 - 2.0 * q_function(a) - 2.0 * a / std::sqrt(2.0 * std::numbers::pi) *
                                         std::exp(-a * a / 2.0);
}

}  // namespace

TEST_CASE("q_function at zero is one half") { CHECK(q_function(0.0) == 0.5); }

TEST_CASE("q_function at one matches a quadrature of the density") {
  const double oracle =
      orc::gaussian_integral([](double) { return 1.0; }, 1.0, 10.0, {}).value;
  CHECK(q_function(1.0) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(std::abs(oracle - 0.158655) < 5e-7);
}

TEST_CASE("q_function tracks a 50-digit reference including the far tail") {
  for (double x = -9.0; x <= 37.0; x += 0.125) {
    const double want = orc::q_function_reference(x);
    INFO("x = " << x);
    CHECK(std::abs(q_function(x) - want) <= 1e-14 * want);
  }
}

TEST_CASE("q_function reflection") {
  std::mt19937_64 rng(101);
  for (int k = 0; k < 200; ++k) {
    const double x = uniform(rng, -8.0, 8.0);
    CHECK(std::abs(q_function(x) + q_function(-x) - 1.0) <= 1e-14);
  }
}

TEST_CASE("q_function handles infinities and single precision") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(q_function(inf) == 0.0);
  CHECK(q_function(-inf) == 1.0);
  CHECK(q_function(1.0f) == doctest::Approx(0.158655f).epsilon(1e-6));
}

TEST_CASE("mills ratio agrees with Q / phi") {
  for (double x : {3.0, 4.0, 5.5, 8.0, 20.0}) {
    const double want = orc::q_function_reference(x) / gaussian_pdf(x);
    CHECK(mills_ratio(x) == doctest::Approx(want).epsilon(1e-13));
  }
}

TEST_CASE("two_sided_mass and derivative") {
  for (double x : {0.1, 1.0, 2.0, 7.0}) {
    CHECK(two_sided_mass(x) == doctest::Approx(1.0 - 2.0 * q_function(x)).epsilon(1e-14));
    const double h = 1e-6;
    const double fd = (q_function(x + h) - q_function(x - h)) / (2 * h);
    CHECK(q_function_derivative(x) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("s_function at one matches quadrature") {
  const auto [tails, core] = orc::gaussian_moment_oracles(1.0);
  CHECK(s_function(1.0) == doctest::Approx(core).epsilon(1e-12));
  CHECK(std::abs(core - 0.198748) < 5e-7);
}

TEST_CASE("s_function small-argument behaviour") {
  // Quadrature of the truncated second moment stays accurate at small a
  // (the integrand is t^2 on a short interval), unlike the closed form.
  for (double a : {1e-3, 1e-2, 0.3, 0.99, 1.01}) {
    const auto core = orc::gaussian_moment_oracles(a).second;
    INFO("a = " << a);
    CHECK(s_function(a) == doctest::Approx(core / (a * a)).epsilon(1e-9));
  }
  // Leading Taylor term sqrt(2/pi) x / 3.
  const double x = 1e-9;
  CHECK(s_function(x) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi) * x / 3.0).epsilon(1e-14));
  CHECK(s_function(1e-300) >= 0.0);
  CHECK(s_function(1e-300) < 1e-299);
}

TEST_CASE("s_function large-argument limit and domain") {
  CHECK(s_function(std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(s_function(1e8) == doctest::Approx(1e-16).epsilon(1e-12));
  CHECK_THROWS_AS(s_function(0.0), std::domain_error);
  CHECK_THROWS_AS(s_function(-1.0), std::domain_error);
  CHECK_THROWS_AS(s_function(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
}

TEST_CASE("r_lambda at (1, 1) matches the expectation oracle") {
  const double q_hat = 1.3;
  const double oracle = q_hat * orc::phi_lambda_expectation(1.0, 1.0, q_hat).value;
  CHECK(r_lambda(1.0, 1.0) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(std::abs(oracle - (-0.075340)) < 5e-7);
}

TEST_CASE("r_lambda limits and domain") {
  CHECK(r_lambda(50.0, 1.0) <= 0.0);
  CHECK(r_lambda(50.0, 1.0) > -1e-300);
  CHECK(r_lambda(1e3, 1.0) == 0.0);
  // lambda -> 0: r -> -h E[z^2] / 2 = -h / 2.
  CHECK(r_lambda(1e-9, 2.0) == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK_THROWS_AS(r_lambda(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(r_lambda(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(r_lambda(-1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(r_lambda_dh(1.0, -1.0), std::domain_error);
}

TEST_CASE("r_lambda branches meet continuously") {
  // Branch switch at lambda / sqrt(h) = 3.
  const double below = r_lambda(3.0 - 1e-9, 1.0);
  const double above = r_lambda(3.0 + 1e-9, 1.0);
  CHECK(below == doctest::Approx(above).epsilon(1e-7));
  for (double a : {3.5, 5.0, 8.0, 12.0}) {
    // Quadrature oracle in the asymptotic branch.
    const double oracle = orc::phi_lambda_expectation(a, 1.0, 1.0).value;
    CHECK(std::abs(r_lambda(a, 1.0) - oracle) <= 1e-12);
  }
}

TEST_CASE("phi_lambda oracle examples") {
  CHECK(orc::phi_lambda_oracle(0.5, 1.0, 1.0) == 0.0);
  CHECK(orc::phi_lambda_oracle(3.0, 1.0, 2.0) == -1.0);
  CHECK(orc::phi_lambda_oracle(-3.0, 1.0, 2.0) == -1.0);
  CHECK_THROWS_AS(orc::phi_lambda_oracle(1.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("Gaussian moment oracles at a = 1 and a -> infinity") {
  const auto [tails, core] = orc::gaussian_moment_oracles(1.0);
  CHECK(std::abs(tails - 0.317311) < 5e-7);
  CHECK(std::abs(core - 0.198748) < 5e-7);
  CHECK(tails == doctest::Approx(2.0 * q_function(1.0)).epsilon(1e-12));
  const auto [far_tails, far_core] = orc::gaussian_moment_oracles(9.5);
  CHECK(far_tails < 1e-19);
  CHECK(far_core == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("expectation identity for random (lambda, h, q_hat)") {
  std::mt19937_64 rng(202);
  for (int k = 0; k < 50; ++k) {
    const double lambda = uniform(rng, 0.05, 10.0);
    const double h = uniform(rng, 0.05, 10.0);
    const double q_hat = uniform(rng, 0.05, 10.0);
    const double oracle = q_hat * orc::phi_lambda_expectation(lambda, h, q_hat).value;
    INFO("lambda=" << lambda << " h=" << h << " q_hat=" << q_hat);
    CHECK(std::abs(r_lambda(lambda, h) - oracle) <= 1e-8);
  }
}

TEST_CASE("chain rule through h(x) = c1 + c2 x^2") {
  std::mt19937_64 rng(303);
  for (int k = 0; k < 50; ++k) {
    const double lambda = uniform(rng, 0.05, 3.0);
    const double c1 = uniform(rng, 0.2, 2.0);
    const double c2 = uniform(rng, 0.1, 2.0);
    const double x = uniform(rng, 0.1, 2.0);
    auto h = [&](double t) { return c1 + c2 * t * t; };
    const double step = 1e-5;
    const double fd = (r_lambda(lambda, h(x + step)) - r_lambda(lambda, h(x - step))) / (2 * step);
    const double analytic = -(2.0 * c2 * x) * q_function(lambda / std::sqrt(h(x)));
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-5));
    CHECK(r_lambda_dh(lambda, h(x)) * 2.0 * c2 * x == doctest::Approx(analytic).epsilon(1e-14));
  }
}

TEST_CASE("tail and truncated-moment identities for random a") {
  std::mt19937_64 rng(404);
  for (int k = 0; k < 50; ++k) {
    const double a = uniform(rng, 0.01, 8.0);
    const auto [tails, core] = orc::gaussian_moment_oracles(a);
    INFO("a = " << a);
    CHECK(std::abs(tails - 2.0 * q_function(a)) <= 1e-8);
    CHECK(std::abs(core - truncated_second_moment(a)) <= 1e-8);
    CHECK(std::abs(s_function(a) - core / (a * a)) <= 1e-8);
  }
}

TEST_CASE("sign properties on random inputs") {
  std::mt19937_64 rng(505);
  for (int k = 0; k < 10000; ++k) {
    const double lambda = std::exp(uniform(rng, -7.0, 7.0));
    const double h = std::exp(uniform(rng, -7.0, 7.0));
    const double x = std::exp(uniform(rng, -12.0, 12.0));
    CHECK_MESSAGE(r_lambda(lambda, h) <= 0.0, "lambda=" << lambda << " h=" << h);
    CHECK_MESSAGE(s_function(x) >= 0.0, "x=" << x);
  }
}

TEST_CASE("quadrature reports an unattainable tolerance") {
  orc::QuadratureConfig cfg;
  cfg.abs_tol = 1e-30;
  cfg.max_subdivisions = 1;
  try {
    orc::gaussian_integral([](double t) { return std::abs(std::sin(40 * t)); }, -10, 10, {}, cfg);
    FAIL("expected QuadratureError");
  } catch (const orc::QuadratureError& e) {
    CHECK(e.achieved_tolerance() > cfg.abs_tol);
  }
}
