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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparselab {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// One realization of y = A x0 + w. The ground truth is optional; decode only
// needs A and y.
template <typename Scalar>
struct ProblemInstance {
  Matrix<Scalar> A;
  Vector<Scalar> y;
  std::optional<Vector<Scalar>> x0;
  std::optional<Vector<Scalar>> w;

  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }

  void validate() const {
    if (A.rows() < 1 || A.cols() < 1) {
      throw std::invalid_argument("ProblemInstance: A must be at least 1x1");
    }
    if (y.size() != A.rows()) {
      throw std::invalid_argument("ProblemInstance: y length " + std::to_string(y.size()) +
                                  " does not match M = " + std::to_string(A.rows()));
    }
    if (x0 && x0->size() != A.cols()) {
      throw std::invalid_argument("ProblemInstance: x0 length does not match N");
    }
    if (w && w->size() != A.rows()) {
      throw std::invalid_argument("ProblemInstance: w length does not match M");
    }
  }
};

struct DecoderConfig {
  double step_scale = 0.99;  // tau * sigma * ||A||^2 = step_scale^2 < 1
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  int max_iters = 100000;
  int power_iters = 2000;
  double power_tol = 1e-12;
  int check_interval = 10;
  int polish_interval = 50;
  // Residual entries with |r_i| <= zero_tol * (1 + ||y||_inf) count as zero
  // in the optimality certificate.
  double zero_tol = 1e-9;
  bool record_trace = false;

  void validate() const {
    if (!(step_scale > 0 && step_scale < 1)) {
      throw std::invalid_argument("DecoderConfig: step_scale must lie in (0, 1)");
    }
    if (!(primal_tol > 0 && dual_tol > 0 && power_tol > 0 && zero_tol > 0)) {
      throw std::invalid_argument("DecoderConfig: tolerances must be positive");
    }
    if (max_iters < 1 || power_iters < 1 || check_interval < 1 || polish_interval < 1) {
      throw std::invalid_argument("DecoderConfig: iteration counts must be positive");
    }
  }
};

template <typename Scalar>
struct DecodeResult {
  Vector<Scalar> x_hat;
  Scalar objective{};
  int iterations = 0;
  bool converged = false;
  Scalar primal_residual{};
  Scalar dual_residual{};
  Scalar certificate{};
  Scalar certificate_tolerance{};
  bool polished = false;
  std::vector<Scalar> objective_trace;  // best-so-far, one entry per check
};

/// Subgradient selections u in d||.||_1(y - Ax), v in d||.||_1(x) and the
/// stationarity gap ||A^T u - lambda v||_inf they leave.
template <typename Scalar>
struct OptimalityCertificate {
  Scalar norm{};
  Vector<Scalar> u;
  Vector<Scalar> v;
};

/// Largest singular value of A by power iteration on A^T A. Returns 0 for
/// the zero matrix.
template <typename Derived>
typename Derived::Scalar estimate_operator_norm(const Eigen::MatrixBase<Derived>& A,
                                                int max_iters = 2000,
                                                double tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (A.size() == 0 || A.cwiseAbs().maxCoeff() == Scalar(0)) return Scalar(0);
  Vector<Scalar> v = Vector<Scalar>::Ones(A.cols()).normalized();
  Vector<Scalar> w = A.transpose() * (A * v);
  if (w.norm() == Scalar(0)) {
    // ones lies in the null space; fall back to the heaviest column.
    Eigen::Index j = 0;
    A.colwise().norm().maxCoeff(&j);
    v = Vector<Scalar>::Unit(A.cols(), j);
    w = A.transpose() * (A * v);
  }
  Scalar mu = v.dot(w);
  // Rayleigh-quotient error is bounded by ||r||^2 / gap, so a residual of
  // sqrt(tol) leaves roughly tol relative error in mu.
  const Scalar residual_target = std::sqrt(Scalar(tol));
  for (int k = 0; k < max_iters; ++k) {
    v = w.normalized();
    w = A.transpose() * (A * v);
    mu = v.dot(w);
    if ((w - mu * v).norm() <= residual_target * mu) break;
  }
  return std::sqrt(mu);
}

/// ||y - Ax||_1 + lambda ||x||_1.
template <typename Scalar, typename Derived>
Scalar evaluate_objective(const ProblemInstance<Scalar>& instance,
                          const Eigen::MatrixBase<Derived>& x, Scalar lambda) {
  if (x.size() != instance.cols() || instance.y.size() != instance.rows()) {
    throw std::invalid_argument("evaluate_objective: dimension mismatch");
  }
  return (instance.y - instance.A * x).template lpNorm<1>() + lambda * x.template lpNorm<1>();
}

namespace detail {

template <typename Scalar>
Scalar sign(Scalar t) {
  return Scalar((t > 0) - (t < 0));
}

template <typename Scalar>
Matrix<Scalar> gather(const Matrix<Scalar>& A, const std::vector<Eigen::Index>& rows,
                      const std::vector<Eigen::Index>& cols) {
  Matrix<Scalar> out(rows.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) out(i, j) = A(rows[i], cols[j]);
  }
  return out;
}

template <typename Scalar>
Scalar stationarity_gap(const Matrix<Scalar>& A, const Vector<Scalar>& x, Scalar lambda,
                        const Vector<Scalar>& u, Vector<Scalar>& v) {
  const Vector<Scalar> g = A.transpose() * u;
  v.resize(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    v(j) = x(j) != Scalar(0) ? sign(x(j)) : std::clamp(g(j) / lambda, Scalar(-1), Scalar(1));
  }
  return (g - lambda * v).template lpNorm<Eigen::Infinity>();
}

}  // namespace detail

/// Builds subgradient selections for x and reports the stationarity gap.
///
/// Residual entries within zero_tol * (1 + ||y||_inf) of zero take their u
/// value from `dual_hint` (clamped to [-1, 1]) and are then shifted by the
/// minimal-norm correction that makes (A^T u)_S = lambda sign(x_S) on the
/// support S. The same correction is also applied starting from u = 0 on
/// those rows. The smallest of the three gaps is kept.
template <typename Scalar, typename DerivedX, typename DerivedHint>
OptimalityCertificate<Scalar> optimality_certificate(const ProblemInstance<Scalar>& instance,
                                                     const Eigen::MatrixBase<DerivedX>& x_in,
                                                     Scalar lambda,
                                                     const Eigen::MatrixBase<DerivedHint>& dual_hint,
                                                     double zero_tol) {
  const Vector<Scalar> x = x_in;
  const auto& A = instance.A;
  const Vector<Scalar> r = instance.y - A * x;
  const Scalar r_zero =
      Scalar(zero_tol) * (1 + instance.y.template lpNorm<Eigen::Infinity>());

  OptimalityCertificate<Scalar> cert;
  cert.u.resize(r.size());
  std::vector<Eigen::Index> zero_rows;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (std::abs(r(i)) > r_zero) {
      cert.u(i) = detail::sign(r(i));
    } else {
      cert.u(i) = std::clamp(dual_hint(i), Scalar(-1), Scalar(1));
      zero_rows.push_back(i);
    }
  }
  cert.norm = detail::stationarity_gap(A, x, lambda, cert.u, cert.v);

  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) != Scalar(0)) support.push_back(j);
  }
  if (zero_rows.empty() || support.empty() || cert.norm == Scalar(0)) return cert;

  const auto qr = detail::gather<Scalar>(A, zero_rows, support)
                      .transpose()
                      .completeOrthogonalDecomposition();
  auto shift = [&](Vector<Scalar> u) {
    const Vector<Scalar> g = A.transpose() * u;
    Vector<Scalar> target(support.size());
    for (std::size_t k = 0; k < support.size(); ++k) {
      target(k) = lambda * detail::sign(x(support[k])) - g(support[k]);
    }
    const Vector<Scalar> delta = qr.solve(target);
    OptimalityCertificate<Scalar> shifted;
    shifted.u = std::move(u);
    for (std::size_t k = 0; k < zero_rows.size(); ++k) {
      shifted.u(zero_rows[k]) =
          std::clamp(shifted.u(zero_rows[k]) + delta(k), Scalar(-1), Scalar(1));
    }
    shifted.norm = detail::stationarity_gap(A, x, lambda, shifted.u, shifted.v);
    return shifted;
  };
  for (int start = 0; start < 2 && cert.norm > Scalar(0); ++start) {
    Vector<Scalar> u = cert.u;
    if (start == 1) {
      for (const auto i : zero_rows) u(i) = Scalar(0);
    }
    auto shifted = shift(std::move(u));
    if (shifted.norm < cert.norm) cert = std::move(shifted);
  }
  return cert;
}

namespace detail {

template <typename Scalar>
struct Vertex {
  Vector<Scalar> x;
  Vector<Scalar> u;
};

// Descent over vertices of the piecewise-linear objective, started from the
// square active sets (rows Z with zero residual, columns S carrying x).
// Each step computes the dual u that makes A^T u = lambda sign(x) on S, picks
// the most violated of |u_i| <= 1 (i in Z) and |(A^T u)_j| <= lambda
// (j not in S), and moves along the edge that releases it to the minimum of
// the objective on that edge. After a zero-length step the edge search stops
// at the first kink and both choices follow Bland's smallest-index rule; a
// run of 64 zero-length steps gives up.
// With `jitter` > 0 the walk runs on y plus a fixed perturbation of relative
// size jitter, which splits the massively degenerate vertices of the perfect
// phase (every noiseless row has zero residual); the final basis is then
// refit on the unperturbed y, dropping columns whose coefficient vanishes.
// Returns nothing on a singular basis, a stall or when max_pivots runs out.
template <typename Scalar>
std::optional<Vertex<Scalar>> vertex_descent(const ProblemInstance<Scalar>& instance,
                                             Scalar lambda, std::vector<Eigen::Index> rows,
                                             std::vector<Eigen::Index> cols, int max_pivots,
                                             Scalar jitter = 0) {
  const auto& A = instance.A;
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  const Scalar eps = Scalar(64) * std::numeric_limits<Scalar>::epsilon();
  const Scalar scale = 1 + instance.y.template lpNorm<Eigen::Infinity>();
  const Scalar r_zero = eps * scale;
  Vector<Scalar> y = instance.y;
  if (jitter > 0) {
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (Eigen::Index i = 0; i < m; ++i) y(i) += jitter * scale * Scalar(unit(rng));
  }
  std::vector<char> in_rows(m, 0);
  bool bland = false;
  int stalled = 0;

  for (int pivot = 0; pivot <= max_pivots; ++pivot) {
    if (rows.size() != cols.size()) return std::nullopt;
    const std::size_t k = cols.size();
    Eigen::PartialPivLU<Matrix<Scalar>> lu;
    if (k > 0) {
      lu.compute(gather<Scalar>(A, rows, cols));
      if (!(lu.rcond() > eps)) return std::nullopt;
    }

    Vertex<Scalar> out;
    out.x = Vector<Scalar>::Zero(n);
    if (k > 0) {
      Vector<Scalar> rhs(k);
      for (std::size_t q = 0; q < k; ++q) rhs(q) = y(rows[q]);
      const Vector<Scalar> xs = lu.solve(rhs);
      for (std::size_t q = 0; q < k; ++q) out.x(cols[q]) = xs(q);
    }
    Vector<Scalar> r = y - A * out.x;
    std::fill(in_rows.begin(), in_rows.end(), 0);
    for (const auto i : rows) {
      r(i) = Scalar(0);
      in_rows[i] = 1;
    }

    out.u = r.unaryExpr([r_zero](Scalar t) { return std::abs(t) <= r_zero ? Scalar(0) : sign(t); });
    const Vector<Scalar> g = A.transpose() * out.u;
    if (k > 0) {
      Vector<Scalar> t(k);
      for (std::size_t q = 0; q < k; ++q) t(q) = lambda * sign(out.x(cols[q])) - g(cols[q]);
      const Vector<Scalar> uz = lu.transpose().solve(t);
      for (std::size_t q = 0; q < k; ++q) out.u(rows[q]) = uz(q);
    }
    const Vector<Scalar> c = A.transpose() * out.u;

    // Violations keyed by variable index: rows first, then m + column.
    Scalar worst = 0;
    Eigen::Index pick = -1;
    auto consider = [&](Scalar violation, Eigen::Index key) {
      if (!(violation > eps)) return;
      if (bland ? pick < 0 : violation > worst) {
        worst = violation;
        pick = key;
      }
    };
    for (const auto i : rows) consider(std::abs(out.u(i)) - 1, i);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (out.x(j) == Scalar(0)) consider(std::abs(c(j)) / lambda - 1, m + j);
    }
    if (pick < 0) {
      if (jitter > 0 && k > 0) {
        Vector<Scalar> rhs(k);
        for (std::size_t q = 0; q < k; ++q) rhs(q) = instance.y(rows[q]);
        const Vector<Scalar> xs = lu.solve(rhs);
        std::vector<Eigen::Index> kept;
        for (std::size_t q = 0; q < k; ++q) {
          if (std::abs(xs(q)) > eps * scale) kept.push_back(cols[q]);
        }
        out.x.setZero();
        if (!kept.empty()) {
          const Vector<Scalar> coeffs =
              gather<Scalar>(A, rows, kept).colPivHouseholderQr().solve(rhs);
          for (std::size_t q = 0; q < kept.size(); ++q) out.x(kept[q]) = coeffs(q);
        }
      }
      return out;
    }
    if (pivot == max_pivots) return std::nullopt;

    Vector<Scalar> d = Vector<Scalar>::Zero(n);
    Eigen::Index freed = -1;
    if (pick >= m) {
      const Eigen::Index j = pick - m;
      const Scalar delta = sign(c(j));
      d(j) = delta;
      if (k > 0) {
        Vector<Scalar> col(k);
        for (std::size_t q = 0; q < k; ++q) col(q) = A(rows[q], j);
        const Vector<Scalar> ds = -lu.solve(col) * delta;
        for (std::size_t q = 0; q < k; ++q) d(cols[q]) = ds(q);
      }
      cols.push_back(j);
    } else {
      freed = pick;
      const auto q_free = std::find(rows.begin(), rows.end(), freed) - rows.begin();
      const Vector<Scalar> ds = lu.solve(Vector<Scalar>::Unit(k, q_free) * -sign(out.u(freed)));
      for (std::size_t q = 0; q < k; ++q) d(cols[q]) = ds(q);
      rows.erase(rows.begin() + q_free);
      in_rows[freed] = 0;
    }
    const Vector<Scalar> ad = A * d;

    // Slope just before t = 0 and the kinks at t >= 0, keyed like `pick`.
    Scalar slope = 0;
    std::vector<std::pair<Scalar, Eigen::Index>> kinks;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_rows[i] || i == freed) {
        slope += std::abs(ad(i));
      } else if (std::abs(r(i)) <= r_zero) {
        slope -= std::abs(ad(i));
        if (ad(i) != Scalar(0)) kinks.emplace_back(Scalar(0), i);
      } else {
        slope -= sign(r(i)) * ad(i);
        if (ad(i) != Scalar(0) && r(i) / ad(i) > Scalar(0)) kinks.emplace_back(r(i) / ad(i), i);
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (out.x(j) == Scalar(0)) {
        slope += lambda * std::abs(d(j));
      } else {
        slope += lambda * sign(out.x(j)) * d(j);
        if (d(j) != Scalar(0) && -out.x(j) / d(j) > Scalar(0)) {
          kinks.emplace_back(-out.x(j) / d(j), m + j);
        }
      }
    }
    if (!(slope < Scalar(0))) return std::nullopt;
    std::sort(kinks.begin(), kinks.end());
    Eigen::Index hit = -1;
    Scalar step = 0;
    for (const auto& [t, key] : kinks) {
      slope += key < m ? 2 * std::abs(ad(key)) : 2 * lambda * std::abs(d(key - m));
      if (bland || slope >= Scalar(0)) {
        hit = key;
        step = t;
        break;
      }
    }
    if (hit < 0) return std::nullopt;
    if (step == Scalar(0)) {
      bland = true;
      // Degeneracy the index rule does not resolve; leave it to the caller.
      if (++stalled > 64) return std::nullopt;
    } else {
      stalled = 0;
    }
    if (hit < m) {
      rows.insert(std::upper_bound(rows.begin(), rows.end(), hit), hit);
    } else {
      cols.erase(std::find(cols.begin(), cols.end(), hit - m));
    }
    std::sort(cols.begin(), cols.end());
  }
  return std::nullopt;
}

// Candidate refits on the current active sets: support S = {x_j != 0},
// zero-residual rows Z = {|p_i| < 1}. The first is the least-squares fit on
// Z. When `descend` is set and |Z| >= |S| a vertex descent follows, started
// from S and the |S| rows of Z with the smallest |p_i|, with a perturbed
// descent as fallback.
template <typename Scalar>
std::vector<Vertex<Scalar>> polish(const ProblemInstance<Scalar>& instance, Scalar lambda,
                                   const Vector<Scalar>& x, const Vector<Scalar>& p,
                                   bool descend) {
  std::vector<Eigen::Index> support;
  std::vector<Eigen::Index> zero_rows;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) != Scalar(0)) support.push_back(j);
  }
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (std::abs(p(i)) < Scalar(1) - Scalar(1e-10)) zero_rows.push_back(i);
  }
  std::vector<Vertex<Scalar>> out;
  if (support.empty() || zero_rows.size() < support.size()) return out;

  const Matrix<Scalar> block = gather<Scalar>(instance.A, zero_rows, support);
  Vector<Scalar> rhs(zero_rows.size());
  for (std::size_t k = 0; k < zero_rows.size(); ++k) rhs(k) = instance.y(zero_rows[k]);
  const auto qr = block.colPivHouseholderQr();
  if (qr.rank() == static_cast<Eigen::Index>(support.size())) {
    const Vector<Scalar> coeffs = qr.solve(rhs);
    Vertex<Scalar> fit{Vector<Scalar>::Zero(x.size()), -p};
    for (std::size_t k = 0; k < support.size(); ++k) fit.x(support[k]) = coeffs(k);
    out.push_back(std::move(fit));
  }

  if (!descend) return out;
  std::vector<Eigen::Index> rows = zero_rows;
  std::stable_sort(rows.begin(), rows.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(p(a)) < std::abs(p(b));
  });
  rows.resize(support.size());
  std::sort(rows.begin(), rows.end());
  const int max_pivots = static_cast<int>(instance.rows() + instance.cols());
  if (auto v = vertex_descent(instance, lambda, rows, support, max_pivots)) {
    out.push_back(std::move(*v));
  } else if (auto w = vertex_descent(instance, lambda, std::move(rows), support, 4 * max_pivots,
                                     Scalar(0.1) * std::sqrt(std::numeric_limits<Scalar>::epsilon()))) {
    out.push_back(std::move(*w));
  }
  return out;
}

}  // namespace detail

/// Solves min_x ||y - Ax||_1 + lambda ||x||_1.
///
/// Chambolle-Pock primal-dual iteration on F(Ax) + G(x) with F(z) = ||y - z||_1
/// and G(x) = lambda ||x||_1, tau = sigma = step_scale / ||A||, theta = 1,
/// started at x = 0, p = 0. Every polish_interval iterations the active sets
/// are refit by least squares and by a vertex descent started from them; a
/// refit is accepted only when its optimality certificate passes. converged is set iff the returned point
/// has certificate <= primal_tol * (1 + ||A^T sign(y)||_inf).
template <typename Scalar>
DecodeResult<Scalar> decode(const ProblemInstance<Scalar>& instance, Scalar lambda,
                            const DecoderConfig& cfg = {}) {
  instance.validate();
  cfg.validate();
  if (!(lambda > 0)) throw std::invalid_argument("decode: lambda must be positive");

  const auto& A = instance.A;
  const auto& y = instance.y;
  const Scalar norm_a = estimate_operator_norm(A, cfg.power_iters, cfg.power_tol);
  if (norm_a == Scalar(0)) throw std::invalid_argument("decode: A is the zero matrix");

  const Scalar tau = Scalar(cfg.step_scale) / norm_a;
  const Scalar sigma = tau;
  Vector<Scalar> sign_y = y.unaryExpr([](Scalar t) { return detail::sign(t); });
  const Scalar cert_tol =
      Scalar(cfg.primal_tol) *
      (1 + (A.transpose() * sign_y).template lpNorm<Eigen::Infinity>());
  const Scalar y_norm2 = y.norm();

  DecodeResult<Scalar> out;
  out.certificate_tolerance = cert_tol;

  Vector<Scalar> x = Vector<Scalar>::Zero(A.cols());
  Vector<Scalar> p = Vector<Scalar>::Zero(A.rows());
  Vector<Scalar> ax = Vector<Scalar>::Zero(A.rows());
  Vector<Scalar> atp = Vector<Scalar>::Zero(A.cols());
  Vector<Scalar> x_next(A.cols()), ax_next(A.rows()), p_next(A.rows()), atp_next(A.cols());

  Vector<Scalar> best_x = x;
  Scalar best_objective = y.template lpNorm<1>();
  const Scalar zero_objective = best_objective;
  int polishes = 0;
  int next_descent = 1;

  auto finish = [&](Vector<Scalar> x_hat, const Vector<Scalar>& dual_hint, int iters) {
    out.iterations = iters;
    out.x_hat = std::move(x_hat);
    out.objective = evaluate_objective(instance, out.x_hat, lambda);
    if (out.objective > zero_objective) {
      out.x_hat.setZero();
      out.objective = zero_objective;
    }
    const auto cert =
        optimality_certificate(instance, out.x_hat, lambda, dual_hint, cfg.zero_tol);
    out.certificate = cert.norm;
    out.converged = cert.norm <= cert_tol;
    return out;
  };

  for (int k = 1; k <= cfg.max_iters; ++k) {
    x_next = (x - tau * atp).unaryExpr([t = tau * lambda](Scalar v) {
      return v > t ? v - t : (v < -t ? v + t : Scalar(0));
    });
    ax_next.noalias() = A * x_next;
    p_next = (p + sigma * (2 * ax_next - ax - y)).cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
    atp_next.noalias() = A.transpose() * p_next;

    const bool check = k % cfg.check_interval == 0;
    if (check) {
      out.primal_residual = ((x - x_next) / tau - (atp - atp_next)).norm();
      out.dual_residual = ((p - p_next) / sigma - (ax - ax_next)).norm();
    }

    x.swap(x_next);
    ax.swap(ax_next);
    p.swap(p_next);
    atp.swap(atp_next);

    const Scalar objective = (y - ax).template lpNorm<1>() + lambda * x.template lpNorm<1>();
    if (objective < best_objective) {
      best_objective = objective;
      best_x = x;
    }
    if (check && cfg.record_trace) out.objective_trace.push_back(best_objective);

    if (check && out.primal_residual <= Scalar(cfg.primal_tol) * (1 + atp.norm()) &&
        out.dual_residual <= Scalar(cfg.dual_tol) * (1 + y_norm2)) {
      const auto cert = optimality_certificate<Scalar>(instance, x, lambda, -p, cfg.zero_tol);
      if (cert.norm <= cert_tol) return finish(x, -p, k);
    }
    if (k % cfg.polish_interval == 0) {
      // Descents from early iterates rarely land, so failed ones back off
      // geometrically.
      const bool descend = ++polishes >= next_descent;
      if (descend) next_descent = 2 * polishes;
      for (auto& refit : detail::polish(instance, lambda, x, p, descend)) {
        const auto cert =
            optimality_certificate<Scalar>(instance, refit.x, lambda, refit.u, cfg.zero_tol);
        if (cert.norm <= cert_tol) {
          out.polished = true;
          return finish(std::move(refit.x), refit.u, k);
        }
      }
    }
  }
  return finish(best_x, -p, cfg.max_iters);
}

}  // namespace sparselab
