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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "feddua/feddua.hpp"

namespace {

using namespace feddua;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string secs(double s) { return fmt("%.2f s", s); }

double log_grid(int k) { return std::pow(10.0, -3.0 + 0.5 * k); }  // 1e-3 .. 1e-1

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double rel(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

// -- 1, 2: lower bound on the optimal step --------------------------------------

Outcome lower_bound_criterion(bool momentum) {
  const auto start = Clock::now();
  SuiteConfig cfg;  // 100 instances, 50 rounds, d in {10, 50}, M in {2, 5, 10}
  const SuiteReport rep = lower_bound_suite(cfg, momentum);
  const double t = seconds_since(start);
  const auto& lb = rep.lower_bound;
  std::ostringstream d;
  d << rep.instances << " federations, " << lb.checked << " rounds checked, " << lb.violations.size()
    << " violations, " << lb.excluded_rounds.size() << " excluded (hypothesis), "
    << rep.residual_failures << " residual failures, " << secs(t);
  const bool pass = rep.instances == 100 && lb.checked > 0 && lb.violations.empty() && !lb.inconclusive &&
                    rep.residual_failures == 0 && t <= 120.0;
  return {pass, d.str()};
}

// -- 3: minimax --------------------------------------------------------------------

Outcome minimax_criterion() {
  const auto start = Clock::now();
  SuiteConfig cfg;
  cfg.grid_points = 10000;
  SuiteConfig cosh_cfg = cfg;
  cosh_cfg.family = GeneratorFamily::kCosh;
  const MinimaxSuiteReport q = minimax_suite(cfg);
  const MinimaxSuiteReport c = minimax_suite(cosh_cfg);
  const double t = seconds_since(start);
  std::ostringstream d;
  d << "quadratic " << q.passed << "/" << cfg.instances << ", cosh " << c.passed << "/" << cfg.instances
    << ", inconclusive " << q.inconclusive + c.inconclusive << ", max residual "
    << fmt("%.2e", std::max(q.max_residual, c.max_residual)) << ", " << secs(t);
  const bool pass = q.passed == cfg.instances && c.passed == cfg.instances && t <= 60.0;
  return {pass, d.str()};
}

// -- shared synthetic setup ----------------------------------------------------------

const FederationInstance& synthetic(std::uint64_t seed) {
  static std::map<std::uint64_t, FederationInstance> cache;
  auto it = cache.find(seed);
  if (it == cache.end()) {
    SyntheticSpec spec;  // M = 20, n = 30, d = 1000, beta = 1.1
    spec.seed = seed;
    it = cache.emplace(seed, generate(spec)).first;
  }
  return it->second;
}

RunConfig synthetic_run(Family family, double lr) {
  RunConfig cfg;  // 500 rounds, full participation, tau = 20, full batch
  cfg.local.lr = lr;
  cfg.local.steps = 20;
  cfg.optimizer.family = family;
  cfg.optimizer.eps = 0.0;
  cfg.optimizer.eps_g = 0.0;
  return cfg;
}

// -- 4: FedExP reduction -----------------------------------------------------------

Outcome reduction_criterion() {
  const auto start = Clock::now();
  const FederationInstance& inst = synthetic(0);
  double worst = 0.0;
  int rounds = 0;
  bool same_length = true;
  for (int variant = 0; variant < 3; ++variant) {
    RunConfig exp = synthetic_run(Family::kFedExP, 0.01);
    exp.rounds = 100;
    if (variant >= 1) exp.clients_per_round = 7;
    if (variant == 2) exp.local.batch_size = 8;
    exp.seed = 11 + static_cast<std::uint64_t>(variant);
    RunConfig dua = exp;
    dua.optimizer.family = Family::kFedDuAdagrad;
    dua.optimizer.identity_preconditioner = true;
    const RunResult a = run(exp, inst);
    const RunResult b = run(dua, inst);
    same_length = same_length && a.records.size() == b.records.size();
    for (std::size_t i = 0; i < std::min(a.records.size(), b.records.size()); ++i) {
      worst = std::max(worst, rel(a.records[i].eta_g, b.records[i].eta_g));
      ++rounds;
    }
  }
  const double t = seconds_since(start);
  std::ostringstream d;
  d << rounds << " rounds over 3 traces, max relative eta_g difference " << fmt("%.2e", worst) << ", "
    << secs(t);
  return {same_length && rounds == 300 && worst <= 1e-12, d.str()};
}

// -- 5: generic path ---------------------------------------------------------------

std::vector<ParamVector> iterates(const RunConfig& cfg, const FederationInstance& inst) {
  std::vector<ParamVector> ws;
  run(cfg, inst, [&](const RoundContext& ctx) {
    if (ctx.step != nullptr) ws.push_back(ctx.step->state.w);
  });
  return ws;
}

Outcome generic_criterion() {
  const auto start = Clock::now();
  const FederationInstance& inst = synthetic(0);
  RunConfig closed = synthetic_run(Family::kFedDuAdagrad, 0.01);
  closed.rounds = 100;
  RunConfig gen = closed;
  gen.optimizer.family = Family::kFedDuAGeneric;
  gen.optimizer.generic = GenericSpec{GenericGeometry::kQuadratic, false};
  const auto a = iterates(closed, inst);
  const auto b = iterates(gen, inst);
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    worst = std::max(worst, (a[i] - b[i]).norm() / std::max(a[i].norm(), b[i].norm()));
  }
  const double t = seconds_since(start);
  std::ostringstream d;
  d << a.size() << " rounds, max relative iterate difference " << fmt("%.2e", worst) << ", " << secs(t);
  return {a.size() == 100 && b.size() == 100 && worst <= 1e-10, d.str()};
}

// -- 6: synthetic ordering -----------------------------------------------------------

struct Tuned {
  double median = 0.0;
  std::string cell;
};

Tuned tune(Family family, const std::vector<double>& eta_gs, const std::vector<std::uint64_t>& seeds,
           int& cells) {
  Tuned best{std::numeric_limits<double>::infinity(), ""};
  for (double eta_g : eta_gs) {
    for (int k = 0; k < 5; ++k) {
      RunConfig cfg = synthetic_run(family, log_grid(k));
      cfg.optimizer.eta_g = eta_g;
      std::vector<double> losses;
      for (std::uint64_t s : seeds) {
        cfg.seed = s;
        const RunResult r = run(cfg, synthetic(s));
        losses.push_back(r.diverged ? std::numeric_limits<double>::infinity()
                                    : final_window_loss(r.records, 5));
      }
      ++cells;
      const double m = median(losses);
      if (m < best.median) {
        best.median = m;
        std::ostringstream c;
        c << "lr=" << fmt("%.4g", log_grid(k));
        if (eta_gs.size() > 1) c << ",eta_g=" << fmt("%.4g", eta_g);
        best.cell = c.str();
      }
    }
  }
  return best;
}

Outcome ordering_criterion() {
  const auto start = Clock::now();
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<double> fedopt_eta;
  for (int k = 0; k < 5; ++k) fedopt_eta.push_back(std::pow(10.0, -2.0 + 0.5 * k));
  int cells = 0;
  const Tuned dua = tune(Family::kFedDuAdagrad, {1.0}, seeds, cells);
  const Tuned exp = tune(Family::kFedExP, {1.0}, seeds, cells);
  const Tuned ada = tune(Family::kFedAdagrad, fedopt_eta, seeds, cells);
  const double t = seconds_since(start);
  std::ostringstream d;
  d << cells << " cells x " << seeds.size() << " seeds; median final-window loss fedduadagrad "
    << fmt("%.3e", dua.median) << " (" << dua.cell << "), fedexp " << fmt("%.3e", exp.median) << " ("
    << exp.cell << "), fedadagrad " << fmt("%.3e", ada.median) << " (" << ada.cell << "), " << secs(t);
  return {dua.median < exp.median && dua.median < ada.median && t <= 1800.0, d.str()};
}

// -- 7: duality ----------------------------------------------------------------------

Outcome duality_criterion() {
  const auto start = Clock::now();
  int checked = 0;
  double worst = 0.0;
  auto observe = [&](const RoundContext& ctx) {
    if (ctx.step == nullptr) return;
    const auto& st = *ctx.step;
    const ParamVector theta_next = mirror_map(st.geometry, ctx.w_before) + st.eta_g * st.state.v;
    worst = std::max(worst, duality_gap(st.geometry, ctx.instance.w_star, st.state.w, theta_next));
    ++checked;
  };
  for (Family f : {Family::kFedDuAdagrad, Family::kFedDuAdam}) {
    RunConfig cfg = synthetic_run(f, 0.01);
    cfg.rounds = 100;
    run(cfg, synthetic(0), observe);
  }
  SuiteConfig suite;
  suite.instances = 20;
  const SuiteReport rep = lower_bound_suite(suite, false);
  const double t = seconds_since(start);
  worst = std::max(worst, rep.max_duality_gap);
  checked += rep.duality_checked;
  std::ostringstream d;
  d << checked << " rounds, max relative gap " << fmt("%.2e", worst) << ", " << secs(t);
  return {checked > 0 && worst <= 1e-9 && rep.duality_failures == 0, d.str()};
}

// -- 8: determinism --------------------------------------------------------------------

std::string csv(const RunConfig& cfg, const FederationInstance& inst) {
  std::ostringstream out;
  write_trace_csv(run(cfg, inst).records, out);
  return out.str();
}

Outcome determinism_criterion() {
  const auto start = Clock::now();
  SyntheticSpec small;
  small.clients = 10;
  small.samples_per_client = 10;
  small.dim = 200;
  small.seed = 5;
  const FederationInstance inst = generate(small);
  std::vector<RunConfig> configs;
  for (Family f : {Family::kFedAvgM, Family::kFedExPM, Family::kFedAdam, Family::kFedDuAdagrad,
                   Family::kFedDuAdam}) {
    RunConfig c;
    c.rounds = 60;
    c.clients_per_round = 4;
    c.local.batch_size = 3;
    c.local.steps = 10;
    c.local.lr = 0.02;
    c.optimizer.family = f;
    c.optimizer.eta_g = 0.5;
    c.seed = 77;
    configs.push_back(c);
  }
  configs.push_back(configs.back());
  configs.back().local.strategy = LocalStrategy::kScaffold;
  configs.push_back(configs.back());
  configs.back().local.strategy = LocalStrategy::kFedProx;
  configs.back().local.mu = 0.1;
  configs.push_back(configs.back());
  configs.back().local.strategy = LocalStrategy::kSgd;
  configs.back().optimizer.family = Family::kFedDuAGeneric;
  configs.back().optimizer.generic.geometry = GenericGeometry::kCosh;
  int identical = 0;
  for (const auto& c : configs) {
    if (csv(c, inst) == csv(c, inst)) ++identical;
  }
  const double t = seconds_since(start);
  std::ostringstream d;
  d << identical << "/" << configs.size() << " configs byte-identical across two executions, " << secs(t);
  return {identical == static_cast<int>(configs.size()), d.str()};
}

// -- 9: accumulator monotonicity -------------------------------------------------------

Outcome monotone_criterion() {
  const auto start = Clock::now();
  int rounds = 0;
  int bad = 0;
  for (Family f : {Family::kFedDuAdagrad, Family::kFedAdagrad}) {
    RunConfig cfg = synthetic_run(f, 0.01);
    cfg.rounds = 200;
    cfg.clients_per_round = 5;
    ServerState prev = init_state(cfg.optimizer, ParamVector::Zero(1000));
    double prev_trace = -1.0;
    run(cfg, synthetic(0), [&](const RoundContext& ctx) {
      if (ctx.step == nullptr) return;
      const ServerState& st = ctx.step->state;
      // tr(G_t) summed directly; with eps = 0 a coordinate of G may still be 0.
      const double tr = (st.s.array().sqrt() + st.hyper.eps).sum();
      if (!(st.s.array() >= prev.s.array()).all() || tr < prev_trace) ++bad;
      prev = st;
      prev_trace = tr;
      ++rounds;
    });
  }
  const double t = seconds_since(start);
  std::ostringstream d;
  d << rounds << " rounds, " << bad << " with a decreasing coordinate of s or tr(G), " << secs(t);
  return {rounds == 400 && bad == 0, d.str()};
}

// -- 10: eps_g robustness --------------------------------------------------------------

Outcome eps_g_criterion() {
  const auto start = Clock::now();
  const FederationInstance& inst = synthetic(0);
  std::vector<double> grid{0.0};
  for (int k = 0; k < 5; ++k) grid.push_back(log_grid(k));
  std::vector<double> tuned;
  int diverged = 0;
  for (double eps_g : grid) {
    double best = std::numeric_limits<double>::infinity();
    double best_max = 0.0;
    double init = 0.0;
    for (int k = 0; k < 5; ++k) {
      RunConfig cfg = synthetic_run(Family::kFedDuAdagrad, log_grid(k));
      cfg.optimizer.eps_g = eps_g;
      const RunResult r = run(cfg, inst);
      double peak = 0.0;
      for (const auto& rec : r.records) peak = std::max(peak, rec.global_loss);
      const double loss = r.diverged ? std::numeric_limits<double>::infinity() : final_window_loss(r.records);
      if (loss < best) {
        best = loss;
        best_max = peak;
        init = r.initial_loss;
      }
    }
    if (!std::isfinite(best) || best_max > init) ++diverged;
    tuned.push_back(best);
  }
  const double best = *std::min_element(tuned.begin(), tuned.end());
  const double t = seconds_since(start);
  std::ostringstream d;
  d << "eps_g=0 loss " << fmt("%.3e", tuned[0]) << ", best over grid " << fmt("%.3e", best) << ", "
    << diverged << " diverging eps_g values, " << secs(t);
  return {tuned[0] <= 1.05 * best && diverged == 0 && t <= 900.0, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"C1 lower bound without momentum (100 federations)", [] { return lower_bound_criterion(false); }},
      {"C2 lower bound with momentum (100 federations)", [] { return lower_bound_criterion(true); }},
      {"C3 minimax optimality (quadratic and cosh)", minimax_criterion},
      {"C4 FedExP reduction with identity preconditioner", reduction_criterion},
      {"C5 generic quadratic path reproduces FedDuAdagrad", generic_criterion},
      {"C6 synthetic ordering FedDuAdagrad vs FedExP, FedAdagrad", ordering_criterion},
      {"C7 primal/dual Bregman identity", duality_criterion},
      {"C8 byte-identical traces", determinism_criterion},
      {"C9 monotone accumulator and tr(G)", monotone_criterion},
      {"C10 eps_g robustness", eps_g_criterion},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
