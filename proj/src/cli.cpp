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

#include "sparselab/cli.hpp"

#include "sparselab/oracles.hpp"
#include "sparselab/special_functions.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace sparselab::cli {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Progress {
 public:
  Progress(std::ostream& os, std::string label, int total, bool quiet)
      : os_(os), label_(std::move(label)), total_(total), quiet_(quiet) {}

  void tick() {
    std::lock_guard lock(mutex_);
    ++done_;
    if (!quiet_) os_ << '[' << label_ << "] " << done_ << '/' << total_ << '\n' << std::flush;
  }

 private:
  std::ostream& os_;
  std::string label_;
  int total_;
  int done_ = 0;
  bool quiet_;
  std::mutex mutex_;
};

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i ? "," : "") + format_number(values[i]);
  }
  return out;
}

OutputTable make_table(const RunConfig& cfg, std::vector<std::string> columns) {
  OutputTable table;
  table.subcommand = cfg.subcommand;
  table.config = parameter_echo(cfg);
  table.columns = std::move(columns);
  return table;
}

void require(const RunConfig& cfg, std::initializer_list<const char*> flags) {
  std::string missing;
  for (const char* f : flags) {
    if (!cfg.has(f)) missing += (missing.empty() ? "--" : ", --") + std::string(f);
  }
  if (!missing.empty()) {
    throw UsageError(cfg.subcommand + ": missing required flag(s) " + missing);
  }
}

double& axis_field(SystemParams& p, const std::string& axis) {
  if (axis == "rho-x") return p.rho_x;
  if (axis == "rho-w") return p.rho_w;
  if (axis == "alpha") return p.alpha;
  return p.lambda;
}

LambdaObjective parse_objective(const std::string& name) {
  if (name == "critical-rho-x") return LambdaObjective::kMaxCriticalRhoX;
  if (name == "critical-alpha") return LambdaObjective::kMinCriticalAlpha;
  return LambdaObjective::kMinMse;
}

std::vector<double> json_vector(const nlohmann::json& node, const char* name) {
  if (!node.is_array()) throw std::runtime_error(std::string("instance: '") + name + "' must be an array");
  return node.get<std::vector<double>>();
}

// ---- selftest -------------------------------------------------------------

struct Suite {
  explicit Suite(std::string n = {}) : name(std::move(n)) {}

  std::string name;
  int checks = 0;
  int failures = 0;
  std::string detail;

  void check(bool ok, const std::string& what) {
    ++checks;
    if (!ok) {
      ++failures;
      if (detail.empty()) detail = what;
    }
  }
};

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(b), std::numeric_limits<double>::min());
}

std::string describe(const char* what, double x, double got, double want) {
  std::ostringstream os;
  os.precision(17);
  os << what << " at " << x << ": got " << got << ", want " << want;
  return os.str();
}

Suite selftest_special_functions() {
  Suite s{"special_functions"};
  for (double x : {-5.0, -1.0, 0.0, 0.5, 1.0, 2.5, 5.0, 6.0, 6.5, 9.0, 15.0, 30.0}) {
    const double got = q_function(x);
    const double want = oracles::q_function_reference(x);
    s.check(close_rel(got, want, 1e-14), describe("Q", x, got, want));
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    const double a = 0.05 + 5.0 * unit(rng);
    const auto [tails, core] = oracles::gaussian_moment_oracles(a);
    s.check(std::abs(2.0 * q_function(a) - tails) <= 1e-8, describe("two-tail mass", a, 2.0 * q_function(a), tails));
    s.check(std::abs(s_function(a) - core / (a * a)) <= 1e-8,
            describe("s", a, s_function(a), core / (a * a)));
  }
  for (int k = 0; k < 10; ++k) {
    const double lambda = 0.1 + 3.0 * unit(rng);
    const double h = 0.05 + 4.0 * unit(rng);
    const double q_hat = 0.2 + 2.0 * unit(rng);
    const double want = q_hat * oracles::phi_lambda_expectation(lambda, h, q_hat).value;
    s.check(std::abs(r_lambda(lambda, h) - want) <= 1e-8, describe("r", h, r_lambda(lambda, h), want));
    const double step = 1e-5 * h;
    const double fd = (r_lambda(lambda, h + step) - r_lambda(lambda, h - step)) / (2.0 * step);
    s.check(close_rel(r_lambda_dh(lambda, h), fd, 1e-5), describe("dr/dh", h, r_lambda_dh(lambda, h), fd));
  }
  return s;
}

Suite selftest_replica() {
  Suite s{"replica_core"};
  const double points[][3] = {{0.5, 0.15, 0.1}, {0.5, 0.2, 0.1}, {0.7, 0.25, 0.05}, {0.3, 0.2, 0.2}};
  for (const auto& pt : points) {
    SystemParams p;
    p.alpha = pt[0];
    p.rho_x = pt[1];
    p.rho_w = pt[2];
    const auto sol = solve_mse_fixed_point(p);
    if (sol.perfect()) {
      s.check(false, "unexpected perfect phase at rho_x=" + format_number(p.rho_x));
      continue;
    }
    const auto& st = sol.state;
    const double identity = p.rho_x * p.sigma2_x - 2.0 * st.diag_m + st.diag_q;
    s.check(std::abs(st.mse - identity) <= 1e-8, describe("mse identity", p.rho_x, st.mse, identity));
  }
  const double rho_c = find_critical_rho_x(0.5, 1.0, 0.1);
  s.check(std::abs(rho_c - 0.0770) <= 5e-4, describe("critical rho_x", 0.5, rho_c, 0.0770));
  for (double offset : {-0.01, 0.01}) {
    ThresholdParams tp{0.5, 1.0, rho_c + offset, 0.1};
    const bool perfect = solve_threshold_fixed_point(tp).perfect_recovery();
    s.check(perfect == (offset < 0), describe("phase side", tp.rho_x, perfect, offset < 0));
  }
  return s;
}

Suite selftest_decoder() {
  Suite s{"l1l1_decoder"};
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < 6; ++k) {
    const int n = 1 + k % 3;
    const int m = 1 + (k + 1) % 3;
    ProblemInstance<double> inst;
    inst.A.resize(m, n);
    inst.y.resize(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) inst.A(i, j) = gauss(rng);
      inst.y(i) = gauss(rng);
    }
    const double lambda = 0.3 + 0.2 * k;
    const auto result = decode(inst, lambda);
    const double exact = oracles::l1l1_vertex_oracle(inst, lambda);
    s.check(std::abs(result.objective - exact) <= 1e-6 * (1.0 + exact),
            describe("objective", k, result.objective, exact));
    s.check(result.converged && result.certificate <= result.certificate_tolerance,
            describe("certificate", k, result.certificate, result.certificate_tolerance));
  }
  const Matrix<double> A = Matrix<double>::Random(12, 9);
  const double sigma_max = Eigen::JacobiSVD<Matrix<double>>(A).singularValues()(0);
  s.check(close_rel(estimate_operator_norm(A), sigma_max, 1e-6),
          describe("operator norm", 0, estimate_operator_norm(A), sigma_max));
  return s;
}

Suite selftest_experiments() {
  Suite s{"experiments"};
  EnsembleSpec spec;
  spec.N = 64;
  spec.params.rho_x = 0.15;
  const auto a = sample_instance(spec, 3);
  const auto b = sample_instance(spec, 3);
  const auto c = sample_instance(spec, 4);
  s.check(a.A == b.A && a.y == b.y, "same seed and trial produced different instances");
  s.check(a.A != c.A, "different trials produced identical matrices");
  spec.trials = 4;
  const auto serial = run_monte_carlo(spec, DecoderConfig{}, 1e-6, 1);
  const auto pooled = run_monte_carlo(spec, DecoderConfig{}, 1e-6, 3);
  s.check(serial.mean_mse == pooled.mean_mse, describe("worker invariance", 3, pooled.mean_mse, serial.mean_mse));
  return s;
}

Suite selftest_records() {
  Suite s{"records"};
  OutputTable t;
  t.subcommand = "selftest";
  t.config = {{"alpha", "0.5"}};
  t.columns = {"value", "label"};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    t.add_row({std::ldexp(unit(rng), static_cast<int>(k * 7) - 70), std::string("row, \"") + std::to_string(k) + "\""});
  }
  for (bool json : {false, true}) {
    std::stringstream io;
    json ? write_json(io, t) : write_csv(io, t);
    const auto back = json ? read_json(io) : read_csv(io);
    bool same = back.columns == t.columns && back.records.size() == t.records.size();
    for (std::size_t r = 0; same && r < t.records.size(); ++r) same = back.records[r].cells == t.records[r].cells;
    s.check(same, json ? "JSON round trip changed values" : "CSV round trip changed values");
  }
  return s;
}

}  // namespace

std::vector<double> GridSpec::points() const {
  std::vector<double> out;
  if (count == 1) out.push_back(start);
  for (int i = 0; count > 1 && i < count; ++i) {
    const double t = double(i) / (count - 1);
    out.push_back(log_spacing ? std::exp(std::log(start) + t * (std::log(stop) - std::log(start)))
                              : start + t * (stop - start));
  }
  if (count > 1) out.back() = stop;
  return out;
}

void GridSpec::validate() const {
  if (count < 0) throw UsageError("grid: --count must be nonnegative");
  if (!std::isfinite(start) || !std::isfinite(stop)) throw UsageError("grid: bounds must be finite");
  if (log_spacing && count > 0 && !(start > 0 && stop > 0)) {
    throw UsageError("grid: log spacing needs positive --start and --stop");
  }
}

void validate(const RunConfig& cfg) {
  const auto& sub = cfg.subcommand;
  if (sub == "threshold") {
    require(cfg, {"solve-for"});
    if (cfg.solve_for == "rho-x") {
      require(cfg, {"alpha", "rho-w", "lambda"});
    } else {
      require(cfg, {"rho-x", "rho-w", "lambda"});
    }
  } else if (sub == "mse-curve") {
    require(cfg, {"start", "stop", "count"});
    for (const char* f : {"alpha", "lambda", "rho-x", "rho-w"}) {
      if (cfg.axis != f) require(cfg, {f});
    }
  } else if (sub == "phase-diagram") {
    require(cfg, {"start", "stop", "count"});
    if (cfg.deltas.empty()) throw UsageError("phase-diagram: --deltas must not be empty");
    for (double d : cfg.deltas) {
      if (!(d >= 0)) throw UsageError("phase-diagram: deltas must be nonnegative");
    }
  } else if (sub == "optimize-lambda") {
    require(cfg, {"objective"});
    if (cfg.objective == "critical-rho-x") {
      require(cfg, {"alpha", "rho-w"});
    } else if (cfg.objective == "critical-alpha") {
      require(cfg, {"rho-x", "rho-w"});
    } else {
      require(cfg, {"alpha", "rho-x", "rho-w"});
    }
  } else if (sub == "monte-carlo") {
    require(cfg, {"alpha", "lambda", "rho-x", "rho-w"});
  } else if (sub == "decode") {
    require(cfg, {"instance", "lambda"});
  }

  try {
    cfg.params.validate();
    cfg.solver.validate();
    cfg.decoder.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.grid.validate();
  if (cfg.workers < 1) throw UsageError("--workers must be at least 1");
  if (cfg.trials < 1) throw UsageError("--trials must be at least 1");
  if (cfg.n < 8) throw UsageError("--n must be at least 8");
  if (cfg.with_mc || sub == "monte-carlo") {
    if (std::lround(cfg.params.alpha * cfg.n) < 1) throw UsageError("round(alpha N) must be at least 1");
  }
}

std::vector<std::pair<std::string, std::string>> parameter_echo(const RunConfig& cfg) {
  const auto& p = cfg.params;
  return {
      {"alpha", format_number(p.alpha)},
      {"lambda", format_number(p.lambda)},
      {"rho_x", format_number(p.rho_x)},
      {"rho_w", format_number(p.rho_w)},
      {"sigma2_x", format_number(p.sigma2_x)},
      {"sigma2_w", format_number(p.sigma2_w)},
      {"axis", cfg.axis},
      {"start", format_number(cfg.grid.start)},
      {"stop", format_number(cfg.grid.stop)},
      {"count", std::to_string(cfg.grid.count)},
      {"spacing", cfg.grid.log_spacing ? "log" : "linear"},
      {"solve_for", cfg.solve_for},
      {"objective", cfg.objective},
      {"deltas", join(cfg.deltas)},
      {"seed", std::to_string(cfg.seed)},
      {"trials", std::to_string(cfg.trials)},
      {"n", std::to_string(cfg.n)},
      {"with_mc", cfg.with_mc ? "true" : "false"},
      {"success_tol", format_number(cfg.success_tol)},
      {"instance", cfg.instance_path},
      {"workers", std::to_string(cfg.workers)},
      {"damping", format_number(cfg.solver.damping)},
      {"rel_tol", format_number(cfg.solver.rel_tol)},
      {"max_iters", std::to_string(cfg.solver.max_iters)},
      {"bisection_tol", format_number(cfg.solver.bisection_tol)},
      {"lambda_lo", format_number(cfg.solver.lambda_lo)},
      {"lambda_hi", format_number(cfg.solver.lambda_hi)},
      {"decoder_max_iters", std::to_string(cfg.decoder.max_iters)},
      {"decoder_tol", format_number(cfg.decoder.primal_tol)},
  };
}

OutputTable cmd_threshold(const RunConfig& cfg) {
  auto table = make_table(cfg, {"solve_for", "alpha", "lambda", "rho_x", "rho_w", "rho_x_c",
                                "alpha_c", "A", "chi_hat", "condition_residual"});
  ThresholdParams tp = ThresholdParams::from(cfg.params);
  if (cfg.solve_for == "rho-x") {
    tp.rho_x = find_critical_rho_x(tp.alpha, tp.lambda, tp.rho_w, cfg.solver);
  } else {
    tp.alpha = find_critical_alpha(tp.lambda, tp.rho_x, tp.rho_w, cfg.solver);
  }
  // (alpha, rho_x) now lies on the boundary, so it is both alpha_c(rho_x) and
  // rho_x_c(alpha).
  const auto st = solve_threshold_fixed_point(tp, cfg.solver);
  table.add_row({cfg.solve_for, tp.alpha, tp.lambda, tp.rho_x, tp.rho_w, tp.rho_x, tp.alpha,
                 st.A, st.chi_hat, st.condition_residual});
  return table;
}

OutputTable cmd_mse_curve(const RunConfig& cfg, std::ostream& progress) {
  std::vector<std::string> columns = {"alpha",    "lambda", "rho_x", "rho_w", "sigma2_x",
                                      "sigma2_w", "status", "phase", "mse",   "chi",
                                      "m_hat",    "chi_hat", "diag_m", "diag_q", "iterations"};
  if (cfg.with_mc) {
    for (const char* c : {"mc_mean_mse", "mc_std_error", "mc_median_mse", "mc_success_fraction",
                          "mc_trials", "mc_nonconverged"}) {
      columns.emplace_back(c);
    }
  }
  auto table = make_table(cfg, columns);
  const auto grid = cfg.grid.points();
  std::vector<std::vector<Cell>> rows(grid.size());
  Progress bar(progress, cfg.subcommand, static_cast<int>(grid.size()), cfg.quiet);

  auto evaluate = [&](int i, int mc_workers) {
    SystemParams p = cfg.params;
    axis_field(p, cfg.axis) = grid[i];
    std::vector<Cell> row = {p.alpha, p.lambda, p.rho_x, p.rho_w, p.sigma2_x, p.sigma2_w};
    try {
      p.validate();
      const auto sol = solve_mse_fixed_point(p, cfg.solver);
      const auto& st = sol.state;
      if (sol.perfect()) {
        row.insert(row.end(), {std::string("ok"), std::string("perfect"), 0.0, 0.0,
                               std::numeric_limits<double>::infinity(), st.chi_hat, p.rho_x * p.sigma2_x,
                               p.rho_x * p.sigma2_x, double(st.iterations)});
      } else {
        row.insert(row.end(), {std::string("ok"), std::string("finite"), st.mse, st.chi, st.m_hat,
                               st.chi_hat, st.diag_m, st.diag_q, double(st.iterations)});
      }
    } catch (const std::exception& e) {
      row.insert(row.end(), {std::string("error: ") + e.what(), std::string(""), kNaN, kNaN, kNaN,
                             kNaN, kNaN, kNaN, kNaN});
    }
    if (cfg.with_mc) {
      try {
        EnsembleSpec spec;
        spec.N = cfg.n;
        spec.params = p;
        spec.trials = cfg.trials;
        spec.base_seed = cfg.seed;
        const auto agg = run_monte_carlo(spec, cfg.decoder, cfg.success_tol, mc_workers, cfg.solver);
        row.insert(row.end(), {agg.mean_mse, agg.std_error, agg.median_mse, agg.success_fraction,
                               double(agg.trials), double(agg.nonconverged)});
      } catch (const std::exception& e) {
        std::get<std::string>(row[6]) += std::string("; monte-carlo: ") + e.what();
        row.insert(row.end(), {kNaN, kNaN, kNaN, kNaN, kNaN, kNaN});
      }
    }
    rows[i] = std::move(row);
    bar.tick();
  };

  if (cfg.with_mc) {
    // Trials dominate the cost, so the pool works inside each grid point.
    for (std::size_t i = 0; i < grid.size(); ++i) evaluate(static_cast<int>(i), cfg.workers);
  } else {
    parallel_for(static_cast<int>(grid.size()), cfg.workers, [&](int i) { evaluate(i, 1); });
  }
  for (auto& row : rows) table.add_row(std::move(row));
  return table;
}

OutputTable cmd_phase_diagram(const RunConfig& cfg, std::ostream& progress) {
  auto table = make_table(cfg, {"rho_x", "delta", "rho_w", "alpha_c_lambda1", "alpha_c_optimal",
                                "lambda_star", "status"});
  const auto grid = cfg.grid.points();
  if (grid.empty()) return table;
  if (!cfg.quiet) {
    progress << "[phase-diagram] " << grid.size() * cfg.deltas.size() << " rows\n" << std::flush;
  }
  for (const auto& row : sweep_phase_diagram(grid, cfg.deltas, cfg.solver, cfg.workers)) {
    table.add_row({row.rho_x, row.delta, row.rho_w, row.alpha_c_unit_lambda, row.alpha_c_optimal,
                   row.lambda_star, row.status});
  }
  return table;
}

OutputTable cmd_optimize_lambda(const RunConfig& cfg) {
  auto table = make_table(cfg, {"objective", "alpha", "rho_x", "rho_w", "sigma2_x", "sigma2_w",
                                "lambda_star", "objective_value", "evaluations"});
  const auto& p = cfg.params;
  const auto best = optimize_lambda(parse_objective(cfg.objective), p, cfg.solver);
  table.add_row({cfg.objective, p.alpha, p.rho_x, p.rho_w, p.sigma2_x, p.sigma2_w, best.lambda,
                 best.value, double(best.evaluations)});
  return table;
}

OutputTable cmd_monte_carlo(const RunConfig& cfg, std::ostream& progress) {
  auto table = make_table(cfg, {"alpha", "lambda", "rho_x", "rho_w", "sigma2_x", "sigma2_w", "N",
                                "M", "trials", "nonconverged", "mean_mse", "std_error",
                                "median_mse", "success_fraction", "replica_mse", "replica_phase"});
  EnsembleSpec spec;
  spec.N = cfg.n;
  spec.params = cfg.params;
  spec.trials = cfg.trials;
  spec.base_seed = cfg.seed;
  if (!cfg.quiet) {
    progress << "[monte-carlo] " << spec.trials << " trials at N=" << spec.N << '\n' << std::flush;
  }
  const auto agg = run_monte_carlo(spec, cfg.decoder, cfg.success_tol, cfg.workers, cfg.solver);
  const auto& p = cfg.params;
  const std::string phase =
      !agg.replica_available ? "unavailable" : (agg.replica_perfect ? "perfect" : "finite");
  table.add_row({p.alpha, p.lambda, p.rho_x, p.rho_w, p.sigma2_x, p.sigma2_w, double(spec.N),
                 double(spec.M()), double(agg.trials), double(agg.nonconverged), agg.mean_mse,
                 agg.std_error, agg.median_mse, agg.success_fraction, agg.replica_mse, phase});
  return table;
}

ProblemInstance<double> load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file '" + path + "'");
  const auto doc = nlohmann::json::parse(in);
  const auto& rows = doc.at("A");
  if (!rows.is_array() || rows.empty()) throw std::runtime_error("instance: 'A' must be a nonempty array of rows");
  ProblemInstance<double> inst;
  const auto first = json_vector(rows[0], "A");
  inst.A.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(first.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = json_vector(rows[i], "A");
    if (row.size() != first.size()) throw std::runtime_error("instance: ragged rows in 'A'");
    for (std::size_t j = 0; j < row.size(); ++j) inst.A(Eigen::Index(i), Eigen::Index(j)) = row[j];
  }
  auto to_vector = [](const std::vector<double>& v) {
    return Vector<double>(Eigen::Map<const Vector<double>>(v.data(), Eigen::Index(v.size())));
  };
  inst.y = to_vector(json_vector(doc.at("y"), "y"));
  if (doc.contains("x0")) inst.x0 = to_vector(json_vector(doc["x0"], "x0"));
  if (doc.contains("w")) inst.w = to_vector(json_vector(doc["w"], "w"));
  inst.validate();
  return inst;
}

OutputTable cmd_decode(const RunConfig& cfg) {
  const auto inst = load_instance(cfg.instance_path);
  const auto result = decode(inst, cfg.params.lambda, cfg.decoder);
  auto table = make_table(cfg, {"index", "x_hat", "x0"});
  table.config.emplace_back("result_objective", format_number(result.objective));
  table.config.emplace_back("result_iterations", std::to_string(result.iterations));
  table.config.emplace_back("result_converged", result.converged ? "true" : "false");
  table.config.emplace_back("result_certificate", format_number(result.certificate));
  if (inst.x0) {
    table.config.emplace_back(
        "result_mse", format_number((result.x_hat - *inst.x0).squaredNorm() / inst.cols()));
  }
  for (Eigen::Index j = 0; j < result.x_hat.size(); ++j) {
    table.add_row({double(j), result.x_hat(j), inst.x0 ? (*inst.x0)(j) : kNaN});
  }
  return table;
}

OutputTable cmd_selftest(const RunConfig& cfg, std::ostream& progress) {
  auto table = make_table(cfg, {"suite", "checks", "failures", "detail"});
  using Runner = Suite (*)();
  const Runner runners[] = {selftest_special_functions, selftest_replica, selftest_decoder,
                            selftest_experiments, selftest_records};
  for (Runner run_suite : runners) {
    Suite s;
    try {
      s = run_suite();
    } catch (const std::exception& e) {
      s.checks += 1;
      s.failures += 1;
      s.detail = std::string("exception: ") + e.what();
    }
    if (!cfg.quiet) {
      progress << "[selftest] " << s.name << ": " << s.checks - s.failures << '/' << s.checks
               << " passed\n" << std::flush;
    }
    table.add_row({s.name, double(s.checks), double(s.failures), s.detail});
  }
  return table;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    entries.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return entries;
}

namespace {

void add_common_options(CLI::App* sub, RunConfig& cfg) {
  auto& p = cfg.params;
  sub->add_option("--alpha", p.alpha, "measurement ratio M/N");
  sub->add_option("--lambda", p.lambda, "regularization weight");
  sub->add_option("--rho-x", p.rho_x, "signal density");
  sub->add_option("--rho-w", p.rho_w, "noise density");
  sub->add_option("--sigma2-x", p.sigma2_x, "variance of nonzero signal entries");
  sub->add_option("--sigma2-w", p.sigma2_w, "variance of nonzero noise entries");
  sub->add_option("--workers", cfg.workers, "worker threads");
  sub->add_option("--output", cfg.output_path, "output file (default: standard output)");
  sub->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sub->add_flag("--quiet", cfg.quiet, "suppress progress messages");
  sub->add_option("--damping", cfg.solver.damping, "fixed-point damping in [0, 1)");
  sub->add_option("--rel-tol", cfg.solver.rel_tol, "fixed-point relative tolerance");
  sub->add_option("--max-iters", cfg.solver.max_iters, "fixed-point iteration cap");
  sub->add_option("--bisection-tol", cfg.solver.bisection_tol, "boundary search tolerance");
  sub->add_option("--lambda-lo", cfg.solver.lambda_lo, "lower end of the lambda search");
  sub->add_option("--lambda-hi", cfg.solver.lambda_hi, "upper end of the lambda search");
}

void add_grid_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--start", cfg.grid.start, "first grid value");
  sub->add_option("--stop", cfg.grid.stop, "last grid value");
  sub->add_option("--count", cfg.grid.count, "number of grid points");
  sub->add_option_function<std::string>(
         "--spacing", [&cfg](const std::string& s) { cfg.grid.log_spacing = s == "log"; },
         "linear or log")
      ->check(CLI::IsMember({"linear", "log"}));
}

void add_ensemble_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--n", cfg.n, "signal length N");
  sub->add_option("--trials", cfg.trials, "Monte Carlo trials");
  sub->add_option("--seed", cfg.seed, "base seed")->envname("SPARSE_LAB_SEED");
  sub->add_option("--success-tol", cfg.success_tol, "per-component MSE counted as recovery");
  sub->add_option("--decoder-max-iters", cfg.decoder.max_iters, "decoder iteration cap");
  sub->add_option_function<double>(
      "--decoder-tol",
      [&cfg](double t) { cfg.decoder.primal_tol = cfg.decoder.dual_tol = t; },
      "decoder residual tolerance");
}

bool is_flag_token(const std::string& s) { return s.size() > 2 && s.compare(0, 2, "--") == 0; }

std::string flag_name(const std::string& token) {
  return token.substr(2, token.find('=') == std::string::npos ? std::string::npos : token.find('=') - 2);
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  cfg.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  CLI::App app{"Replica predictions and Monte Carlo checks for l1-l1 sparse recovery", "sparselab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);
  app.add_option("--config", "flat key = value file; command-line flags take precedence");

  auto* threshold = app.add_subcommand("threshold", "critical alpha or rho_x of the perfect phase");
  add_common_options(threshold, cfg);
  threshold->add_option("--solve-for", cfg.solve_for, "rho-x or alpha")
      ->check(CLI::IsMember({"rho-x", "alpha"}));

  auto* curve = app.add_subcommand("mse-curve", "predicted MSE along a parameter grid");
  add_common_options(curve, cfg);
  add_grid_options(curve, cfg);
  add_ensemble_options(curve, cfg);
  curve->add_option("--axis", cfg.axis, "swept parameter")
      ->check(CLI::IsMember({"rho-x", "rho-w", "alpha", "lambda"}));
  curve->add_flag("--with-mc", cfg.with_mc, "append Monte Carlo estimates");

  auto* phase = app.add_subcommand("phase-diagram", "alpha_c against rho_x for rho_w = delta rho_x");
  add_common_options(phase, cfg);
  add_grid_options(phase, cfg);
  phase->add_option("--deltas", cfg.deltas, "comma-separated noise-to-signal density ratios")
      ->delimiter(',');

  auto* optimize = app.add_subcommand("optimize-lambda", "best regularization weight");
  add_common_options(optimize, cfg);
  optimize->add_option("--objective", cfg.objective, "critical-rho-x, critical-alpha or mse")
      ->check(CLI::IsMember({"critical-rho-x", "critical-alpha", "mse"}));

  auto* mc = app.add_subcommand("monte-carlo", "empirical MSE of the decoder on random instances");
  add_common_options(mc, cfg);
  add_ensemble_options(mc, cfg);

  auto* dec = app.add_subcommand("decode", "solve one instance read from a JSON file");
  add_common_options(dec, cfg);
  dec->add_option("--instance", cfg.instance_path, "JSON file with A, y and optionally x0, w");
  dec->add_option("--decoder-max-iters", cfg.decoder.max_iters, "decoder iteration cap");

  auto* self = app.add_subcommand("selftest", "run the built-in invariant suites");
  self->add_flag("--quiet", cfg.quiet, "suppress progress messages");
  self->add_option("--output", cfg.output_path, "output file (default: standard output)");
  self->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  // Config-file entries become flags inserted after the subcommand name,
  // skipping any flag already given explicitly.
  std::vector<std::string> args;
  std::string config_path;
  for (std::size_t i = 0; i < raw_args.size(); ++i) {
    const auto& a = raw_args[i];
    if (a == "--config" && i + 1 < raw_args.size()) {
      config_path = raw_args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      config_path = a.substr(9);
    } else {
      args.push_back(a);
    }
  }

  try {
    if (!config_path.empty()) {
      const auto it = std::find_if(args.begin(), args.end(),
                                   [](const std::string& a) { return !a.empty() && a[0] != '-'; });
      if (it == args.end()) throw UsageError("--config given without a subcommand");
      CLI::App* sub = app.get_subcommand_ptr(*it).get();
      std::set<std::string> explicit_flags;
      for (const auto& a : args) {
        if (is_flag_token(a)) explicit_flags.insert(flag_name(a));
      }
      std::vector<std::string> injected;
      for (const auto& [key, value] : read_config_file(config_path)) {
        if (explicit_flags.count(key)) continue;
        if (sub->get_option_no_throw("--" + key) == nullptr) {
          bool known = false;
          for (const auto* other : app.get_subcommands({})) {
            known = known || other->get_option_no_throw("--" + key) != nullptr;
          }
          if (!known) throw UsageError("config file: unknown key '" + key + "'");
          continue;  // meaningful for another subcommand only
        }
        injected.push_back("--" + key + "=" + value);
      }
      args.insert(std::next(it), injected.begin(), injected.end());
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "sparselab: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::out_of_range&) {
    err << "sparselab: --config needs a valid subcommand\n";
    return kExitUsage;
  } catch (const CLI::Error& e) {
    err << "sparselab: " << e.what() << '\n';
    return kExitUsage;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  cfg.subcommand = chosen->get_name();
  for (const auto* opt : chosen->get_options()) {
    if (opt->count() > 0 && !opt->get_lnames().empty()) cfg.given.insert(opt->get_lnames().front());
  }

  try {
    validate(cfg);
  } catch (const UsageError& e) {
    err << "sparselab: " << e.what() << '\n';
    return kExitUsage;
  }

  OutputTable table;
  try {
    if (cfg.subcommand == "threshold") {
      table = cmd_threshold(cfg);
    } else if (cfg.subcommand == "mse-curve") {
      table = cmd_mse_curve(cfg, err);
    } else if (cfg.subcommand == "phase-diagram") {
      table = cmd_phase_diagram(cfg, err);
    } else if (cfg.subcommand == "optimize-lambda") {
      table = cmd_optimize_lambda(cfg);
    } else if (cfg.subcommand == "monte-carlo") {
      table = cmd_monte_carlo(cfg, err);
    } else if (cfg.subcommand == "decode") {
      table = cmd_decode(cfg);
    } else {
      table = cmd_selftest(cfg, err);
    }
  } catch (const std::exception& e) {
    err << "sparselab " << cfg.subcommand << ": " << e.what() << '\n';
    return kExitFailure;
  }

  std::ofstream file;
  if (!cfg.output_path.empty()) {
    file.open(cfg.output_path);
    if (!file) {
      err << "sparselab: cannot write '" << cfg.output_path << "'\n";
      return kExitFailure;
    }
  }
  std::ostream& sink = cfg.output_path.empty() ? out : file;
  cfg.format == "json" ? write_json(sink, table) : write_csv(sink, table);
  sink.flush();

  if (cfg.subcommand == "selftest") {
    int failures = 0;
    for (std::size_t r = 0; r < table.records.size(); ++r) {
      failures += static_cast<int>(table.number(r, "failures"));
    }
    if (failures > 0) {
      err << "sparselab selftest: " << failures << " failed check(s)\n";
      return kExitFailure;
    }
  }
  return kExitOk;
}

}  // namespace sparselab::cli
