/*
 * Copyright 2026 The FedDuA Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDDUA_THEOREM_ORACLES_HPP
#define FEDDUA_THEOREM_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "feddua/error.hpp"
#include "feddua/global_optimizers.hpp"
#include "feddua/mirror_geometry.hpp"
#include "feddua/rng.hpp"
#include "feddua/simulation.hpp"
#include "feddua/synthetic_data.hpp"
#include "feddua/vector_core.hpp"

namespace feddua {

/// Relative tolerance with an absolute floor of the same size.
inline double oracle_tol(double scale) { return 1e-9 * std::max(1.0, std::abs(scale)); }

// ---------------------------------------------------------------------------
// Approximate projection conditions

struct ApcReport {
  int round = 0;
  bool apc_holds = false;
  bool strong_apc_holds = false;
  double apc_lhs = 0.0;     // (1/M) sum ||w_t + Delta_i - w*||^2
  double apc_rhs = 0.0;     // ||w_t - w*||^2
  double strong_lhs = 0.0;  // <Delta-bar, w* - w_t>
  double strong_rhs = 0.0;  // (1/M) sum ||Delta_i||^2
  bool reduced_apc_holds = false;  // <Delta-bar, w* - w_t> >= (1/2M) sum ||Delta_i||^2
  bool forms_agree = false;        // literal and reduced A.P.C. give the same verdict
};

inline ApcReport check_apc(const ParamVector& w_t, std::span<const ParamVector> deltas,
                           const ParamVector& w_star, int round = 0) {
  if (deltas.empty()) throw Error(ErrorCode::kEmptyInput, "check_apc without updates");
  require_same_dim(w_t, w_star, "check_apc");
  const double m = static_cast<double>(deltas.size());
  ApcReport r;
  r.round = round;
  const ParamVector gap = w_star - w_t;
  r.apc_rhs = norm_sq(gap);
  double lhs = 0.0;
  double sum_sq = 0.0;
  for (const auto& d : deltas) {
    require_same_dim(d, w_t, "check_apc update");
    lhs += norm_sq(w_t + d - w_star);
    sum_sq += norm_sq(d);
  }
  r.apc_lhs = lhs / m;
  r.apc_holds = r.apc_lhs <= r.apc_rhs + oracle_tol(r.apc_rhs);
  r.strong_lhs = dot(axpy_mean(deltas), gap);
  r.strong_rhs = sum_sq / m;
  r.strong_apc_holds = r.strong_lhs >= r.strong_rhs - oracle_tol(r.strong_rhs);
  const double reduced_rhs = 0.5 * r.strong_rhs;
  r.reduced_apc_holds = r.strong_lhs >= reduced_rhs - oracle_tol(reduced_rhs);
  r.forms_agree = r.apc_holds == r.reduced_apc_holds;
  return r;
}

// ---------------------------------------------------------------------------
// One-round optimal step

struct GridSpec {
  double eta_max = 10.0;
  int points = 10001;

  double cell() const { return eta_max / static_cast<double>(points - 1); }
  double at(int k) const { return eta_max * static_cast<double>(k) / static_cast<double>(points - 1); }
};

struct StepOracle {
  std::optional<double> closed;  // quadratic generators only
  double grid = 0.0;
  bool grid_resolved = true;     // false when the objective is flat to rounding
};

namespace detail {

struct GridMin {
  int index = 0;
  bool resolved = true;
};

template <typename F>
GridMin grid_argmin(const GridSpec& grid, F&& objective, double noise_floor = 0.0) {
  if (grid.points < 3 || !(grid.eta_max > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grid needs >= 3 points on a positive range");
  }
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  double worst_val = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.points; ++k) {
    const double val = objective(grid.at(k));
    if (val < best_val) {
      best_val = val;
      best = k;
    }
    worst_val = std::max(worst_val, val);
  }
  GridMin out{best, true};
  // Variation at the rounding level of the objective carries no position information.
  if (worst_val - best_val <= noise_floor) {
    out.resolved = false;
    return out;
  }
  if (best == grid.points - 1) {
    throw Error(ErrorCode::kInconclusive, "grid argmin on the upper boundary; enlarge eta_max");
  }
  return out;
}

}  // namespace detail

/// <w* - w_t, v> / ||v||^2_{G^{-1}}.
inline double quadratic_optimal_step(const DiagPreconditioner& g, const ParamVector& w_t,
                                     const ParamVector& v, const ParamVector& w_star) {
  if (norm_sq(v) == 0.0) throw Error(ErrorCode::kDegenerateDirection, "v = 0");
  return dot(w_star - w_t, v) / weighted_norm_sq(v, g, true);
}

/// argmin over eta of D_phi(theta_t + eta v | theta*), by closed form
/// <w* - w_t, v> / ||v||^2_{G^{-1}} (quadratic) and by brute-force grid search.
inline StepOracle optimal_step_oracle(const DistanceGenerator& gen, const ParamVector& theta,
                                      const ParamVector& w_t, const ParamVector& v,
                                      const ParamVector& w_star, const GridSpec& grid) {
  if (norm_sq(v) == 0.0) throw Error(ErrorCode::kDegenerateDirection, "v = 0");
  StepOracle out;
  if (const auto* q = gen.as_quadratic()) out.closed = quadratic_optimal_step(q->g, w_t, v, w_star);
  const ParamVector theta_star = mirror_map(gen, w_star);
  // D_phi is a difference of O(|phi|) terms, so its rounding error scales with them.
  const ParamVector theta_end = theta + grid.eta_max * v;
  const double term_scale = std::abs(conjugate(gen, theta)) + std::abs(conjugate(gen, theta_end)) +
                            std::abs(conjugate(gen, theta_star)) +
                            std::sqrt(norm_sq(w_star)) * std::sqrt(norm_sq(theta_end - theta_star) +
                                                                   norm_sq(theta - theta_star));
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * term_scale;
  const auto best = detail::grid_argmin(
      grid, [&](double eta) { return dual_bregman(gen, theta + eta * v, theta_star); }, noise);
  out.grid = grid.at(best.index);
  out.grid_resolved = best.resolved;
  return out;
}

// ---------------------------------------------------------------------------
// Lower bound on the optimal step (with and without momentum)

/// Server-side snapshot of one FedDuA round, enough to re-check it offline.
struct OracleRound {
  int round = 0;
  ParamVector w_t;
  std::vector<ParamVector> deltas;
  ParamVector v;
  double m = 0.0;
  double eta_g = 0.0;
  DistanceGenerator geometry = DistanceGenerator::quadratic(DiagPreconditioner::identity(1));
};

struct LowerBoundViolation {
  int round = 0;
  double eta_star = 0.0;
  double eta_g = 0.0;
};

struct LowerBoundReport {
  int checked = 0;
  int passed = 0;
  std::vector<LowerBoundViolation> violations;
  std::vector<int> excluded_rounds;    // hypothesis did not hold
  std::vector<int> unresolved_rounds;  // grid objective flat to rounding
  bool inconclusive = false;

  void absorb(const LowerBoundReport& other) {
    checked += other.checked;
    passed += other.passed;
    violations.insert(violations.end(), other.violations.begin(), other.violations.end());
    excluded_rounds.insert(excluded_rounds.end(), other.excluded_rounds.begin(),
                           other.excluded_rounds.end());
    unresolved_rounds.insert(unresolved_rounds.end(), other.unresolved_rounds.begin(),
                             other.unresolved_rounds.end());
    inconclusive = inconclusive || other.inconclusive;
  }
};

/// eta_g <= h^{-1}(m), tested as h(eta_g) <= m since h is increasing. The
/// slack covers a relative 1e-9 plus the rounding error of evaluating h.
inline bool below_root(const OracleRound& r, const ParamVector& theta) {
  const ParamVector w_next = conjugate_gradient(r.geometry, theta + r.eta_g * r.v);
  const double h = dot(w_next, r.v) - dot(r.w_t, r.v);
  const double rounding = 8.0 * std::numeric_limits<double>::epsilon() * std::sqrt(norm_sq(r.v)) *
                          (std::sqrt(norm_sq(w_next)) + std::sqrt(norm_sq(r.w_t)));
  return h - r.m <= 1e-9 * r.m + rounding;
}

/// Checks eta* >= eta_g^t - tol on every round whose hypothesis holds:
/// A.P.C. without momentum; with momentum, strong A.P.C. and
/// eta_g^s <= h_s^{-1}(m_s) at every round up to t. Custom generators are
/// checked against the grid optimum with one cell of slack.
inline LowerBoundReport verify_lower_bound(std::span<const OracleRound> trace,
                                           const ParamVector& w_star, bool momentum,
                                           int grid_points = 10001) {
  LowerBoundReport rep;
  bool prior_steps_ok = true;
  for (const auto& r : trace) {
    const ParamVector theta = mirror_map(r.geometry, r.w_t);
    const double bound = h_inverse(r.geometry, theta, r.w_t, r.v, r.m);
    const ApcReport apc = check_apc(r.w_t, r.deltas, w_star, r.round);
    const bool hypothesis = momentum ? (apc.strong_apc_holds && prior_steps_ok) : apc.apc_holds;
    // The momentum argument is inductive, so every earlier round must also
    // satisfy strong A.P.C. and stay below its own bound.
    prior_steps_ok = prior_steps_ok && apc.strong_apc_holds && below_root(r, theta);
    if (!hypothesis) {
      rep.excluded_rounds.push_back(r.round);
      continue;
    }
    double eta_star = 0.0;
    double slack = 0.0;
    if (const auto* q = r.geometry.as_quadratic()) {
      eta_star = quadratic_optimal_step(q->g, r.w_t, r.v, w_star);
    } else {
      const GridSpec grid{8.0 * std::max(r.eta_g, bound) + 1.0, grid_points};
      try {
        const StepOracle o = optimal_step_oracle(r.geometry, theta, r.w_t, r.v, w_star, grid);
        if (!o.grid_resolved) {
          rep.unresolved_rounds.push_back(r.round);
          continue;
        }
        eta_star = o.grid;
        slack = grid.cell();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInconclusive) throw;
        // Still decreasing at eta_max: by convexity the minimizer lies beyond it.
        eta_star = grid.eta_max;
      }
    }
    ++rep.checked;
    if (eta_star + slack < r.eta_g - oracle_tol(eta_star)) {
      rep.violations.push_back({r.round, eta_star, r.eta_g});
    } else {
      ++rep.passed;
    }
  }
  return rep;
}

/// Records every non-skipped round of a run as an OracleRound.
inline RoundObserver collect_oracle_rounds(std::vector<OracleRound>& out) {
  return [&out](const RoundContext& ctx) {
    if (ctx.step == nullptr) return;
    OracleRound r;
    r.round = ctx.round;
    r.w_t = ctx.w_before;
    r.deltas.reserve(ctx.updates.size());
    for (const auto& u : ctx.updates) r.deltas.push_back(u.delta);
    r.v = ctx.step->state.v;
    r.m = ctx.step->state.m;
    r.eta_g = ctx.step->eta_g;
    r.geometry = ctx.step->geometry;
    out.push_back(std::move(r));
  };
}

// ---------------------------------------------------------------------------
// Minimax optimality

struct MinimaxReport {
  double eta_g = 0.0;        // h^{-1}(m)
  double m = 0.0;
  double grid_argmin = 0.0;
  double cell = 0.0;
  double residual = 0.0;     // |h(eta_g) - m|
  bool convex_ok = false;
  bool argmin_ok = false;
  bool residual_ok = false;

  bool passed() const { return convex_ok && argmin_ok && residual_ok; }
};

/// Grid check of the dual objective
///   J(lambda) = phi(theta + lambda v) - phi(theta) - lambda <w, v> - lambda m
/// whose minimizer must be h^{-1}(m). `eta_g` defaults to that root.
inline MinimaxReport minimax_check(const DistanceGenerator& gen, const ParamVector& w_t,
                                   const ParamVector& v, double m, int points = 10000,
                                   std::optional<double> eta_g = std::nullopt) {
  const ParamVector theta = mirror_map(gen, w_t);
  MinimaxReport rep;
  rep.m = m;
  rep.eta_g = eta_g ? *eta_g : h_inverse(gen, theta, w_t, v, m);
  const GridSpec grid{4.0 * rep.eta_g + 1.0, points};
  rep.cell = grid.cell();
  const double phi0 = conjugate(gen, theta);
  const double wv = dot(w_t, v);
  auto objective = [&](double lambda) {
    return conjugate(gen, theta + lambda * v) - phi0 - lambda * wv - lambda * m;
  };
  std::vector<double> values(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) values[static_cast<std::size_t>(k)] = objective(grid.at(k));
  rep.convex_ok = true;
  for (std::size_t k = 1; k + 1 < values.size(); ++k) {
    if (values[k - 1] - 2.0 * values[k] + values[k + 1] < -1e-9) rep.convex_ok = false;
  }
  const auto best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
  if (best == points - 1) {
    throw Error(ErrorCode::kInconclusive, "minimax grid argmin on the upper boundary");
  }
  rep.grid_argmin = grid.at(best);
  rep.argmin_ok = std::abs(rep.grid_argmin - rep.eta_g) <= rep.cell;
  rep.residual = std::abs(h_eval(gen, theta, w_t, v, rep.eta_g) - m);
  rep.residual_ok = rep.residual <= 1e-8 * std::max(1.0, m);
  return rep;
}

inline MinimaxReport verify_minimax(const DistanceGenerator& gen, const ParamVector& w_t,
                                    std::span<const ParamVector> deltas, int points = 10000) {
  if (deltas.empty()) throw Error(ErrorCode::kEmptyInput, "verify_minimax without updates");
  double sum_sq = 0.0;
  for (const auto& d : deltas) sum_sq += norm_sq(d);
  const double m = 0.5 * sum_sq / static_cast<double>(deltas.size());
  const ParamVector v = axpy_mean(deltas);
  if (norm_sq(v) == 0.0) throw Error(ErrorCode::kDegenerateDirection, "mean update is zero");
  return minimax_check(gen, w_t, v, m, points);
}

// ---------------------------------------------------------------------------
// Duality

/// |D_psi(w* | w_next) - D_phi(theta_next | theta*)| / max(scale, tiny).
inline double duality_gap(const DistanceGenerator& gen, const ParamVector& w_star,
                          const ParamVector& w_next, const ParamVector& theta_next) {
  const double primal = bregman(gen, w_star, w_next);
  const double dual = dual_bregman(gen, theta_next, mirror_map(gen, w_star));
  const double scale = std::max(std::abs(primal), std::abs(dual));
  if (scale == 0.0) return 0.0;
  return std::abs(primal - dual) / scale;
}

// ---------------------------------------------------------------------------
// Randomized suites

enum class GeneratorFamily { kQuadratic, kCosh };

struct SuiteConfig {
  GeneratorFamily family = GeneratorFamily::kQuadratic;
  int instances = 100;
  int rounds = 50;
  std::uint64_t seed = 0;
  std::vector<int> dims{10, 50};
  std::vector<int> clients{2, 5, 10};
  std::vector<double> beta1s{0.5, 0.9};
  int grid_points = 10000;
  double eta_injection = 1.0;
};

struct InstanceShape {
  int dim = 0;
  int clients = 0;
  int samples = 0;
};

/// Cycles through the configured (dim, clients) pairs; about half the
/// dimension is covered by samples, never more than all of it.
inline InstanceShape suite_shape(const SuiteConfig& cfg, int index) {
  const auto nd = static_cast<int>(cfg.dims.size());
  const auto nc = static_cast<int>(cfg.clients.size());
  InstanceShape s;
  s.dim = cfg.dims[static_cast<std::size_t>(index % nd)];
  s.clients = cfg.clients[static_cast<std::size_t>((index / nd) % nc)];
  s.samples = std::max(1, s.dim / (2 * s.clients));
  return s;
}

inline ParamVector random_positive_diag(Rng& rng, Eigen::Index d, double lo = 0.1, double hi = 10.0) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  ParamVector g(d);
  for (Eigen::Index k = 0; k < d; ++k) g[k] = std::exp(u(rng));
  return g;
}

struct SuiteReport {
  LowerBoundReport lower_bound;
  int duality_checked = 0;
  int duality_failures = 0;
  double max_duality_gap = 0.0;
  int residual_checked = 0;   // |h(eta_g) - m| per round
  int residual_failures = 0;
  double max_residual = 0.0;
  int instances = 0;
};

/// Exact-projection federations run under FedDuA with a random positive
/// initial preconditioner (eps = eps_g = 0), each trace checked against the
/// lower bound. `momentum` switches to the Adam-style recursions.
inline SuiteReport lower_bound_suite(const SuiteConfig& cfg, bool momentum) {
  SuiteReport out;
  for (int i = 0; i < cfg.instances; ++i) {
    const InstanceShape shape = suite_shape(cfg, i);
    const std::uint64_t inst_seed = detail::splitmix64(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(i));
    const FederationInstance inst =
        planted_federation(shape.clients, shape.samples, shape.dim, inst_seed);
    Rng rng = make_stream(inst_seed, StreamDomain::kOracle);
    const ParamVector g0 = random_positive_diag(rng, shape.dim);

    RunConfig run_cfg;
    run_cfg.rounds = cfg.rounds;
    run_cfg.clients_per_round = shape.clients;
    run_cfg.local.strategy = LocalStrategy::kExactProjection;
    run_cfg.eval = EvalMode::kLastIterate;
    run_cfg.seed = inst_seed;
    auto& opt = run_cfg.optimizer;
    opt.eps = 0.0;
    opt.eps_g = 0.0;
    opt.initial_accumulator = g0.cwiseProduct(g0);
    opt.eta_injection = cfg.eta_injection;
    if (momentum) opt.beta1 = cfg.beta1s[static_cast<std::size_t>(i) % cfg.beta1s.size()];
    if (cfg.family == GeneratorFamily::kQuadratic) {
      opt.family = momentum ? Family::kFedDuAdam : Family::kFedDuAdagrad;
    } else {
      opt.family = Family::kFedDuAGeneric;
      opt.generic = GenericSpec{GenericGeometry::kCosh, momentum};
    }

    std::vector<OracleRound> trace;
    auto collect = collect_oracle_rounds(trace);
    run(run_cfg, inst, [&](const RoundContext& ctx) {
      collect(ctx);
      if (ctx.step == nullptr) return;
      const auto& st = *ctx.step;
      const ParamVector theta = mirror_map(st.geometry, ctx.w_before);
      const double res = std::abs(h_eval(st.geometry, theta, ctx.w_before, st.state.v, st.eta_g) - st.state.m);
      ++out.residual_checked;
      out.max_residual = std::max(out.max_residual, res);
      if (res > 1e-8 * std::max(1.0, st.state.m)) ++out.residual_failures;
      if (!st.geometry.is_quadratic()) return;
      const ParamVector theta_next = theta + st.eta_g * st.state.v;
      const double gap = duality_gap(st.geometry, inst.w_star, st.state.w, theta_next);
      ++out.duality_checked;
      out.max_duality_gap = std::max(out.max_duality_gap, gap);
      if (gap > 1e-9) ++out.duality_failures;
    });
    out.lower_bound.absorb(verify_lower_bound(trace, inst.w_star, momentum, cfg.grid_points + 1));
    ++out.instances;
  }
  return out;
}

struct MinimaxSuiteReport {
  int checked = 0;
  int passed = 0;
  int inconclusive = 0;
  double max_residual = 0.0;
  std::vector<int> failures;
};

/// Random (w_t, updates, G) triples checked through the dual objective.
inline MinimaxSuiteReport minimax_suite(const SuiteConfig& cfg) {
  MinimaxSuiteReport out;
  for (int i = 0; i < cfg.instances; ++i) {
    const InstanceShape shape = suite_shape(cfg, i);
    Rng rng = make_stream(cfg.seed, StreamDomain::kOracle, {0x3131ULL, static_cast<std::uint64_t>(i)});
    std::normal_distribution<double> normal(0.0, 1.0);
    const ParamVector g = random_positive_diag(rng, shape.dim);
    ParamVector w_t(shape.dim);
    for (int k = 0; k < shape.dim; ++k) w_t[k] = normal(rng);
    std::vector<ParamVector> deltas;
    for (int c = 0; c < shape.clients; ++c) {
      ParamVector d(shape.dim);
      for (int k = 0; k < shape.dim; ++k) d[k] = normal(rng);
      deltas.push_back(std::move(d));
    }
    const DistanceGenerator gen = cfg.family == GeneratorFamily::kQuadratic
                                      ? DistanceGenerator::quadratic(DiagPreconditioner(g))
                                      : cosh_generator(g);
    try {
      const MinimaxReport rep = verify_minimax(gen, w_t, deltas, cfg.grid_points);
      ++out.checked;
      out.max_residual = std::max(out.max_residual, rep.residual);
      if (rep.passed()) {
        ++out.passed;
      } else {
        out.failures.push_back(i);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInconclusive) throw;
      ++out.inconclusive;
    }
  }
  return out;
}

}  // namespace feddua

#endif  // FEDDUA_THEOREM_ORACLES_HPP
