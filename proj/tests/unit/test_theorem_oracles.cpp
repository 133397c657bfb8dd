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

#include <cmath>
#include <vector>

#include "test_support.hpp"

namespace feddua {
namespace {

using testing::vec;

const std::vector<ParamVector> kPair{vec({1.0, 0.0}), vec({0.0, 1.0})};
const ParamVector kOrigin = vec({0.0, 0.0});
const ParamVector kStar = vec({1.0, 1.0});

DistanceGenerator identity2() { return DistanceGenerator::quadratic(DiagPreconditioner::identity(2)); }

TEST(Apc, TwoHyperplanesByHand) {
  const ApcReport r = check_apc(kOrigin, kPair, kStar);
  EXPECT_DOUBLE_EQ(r.strong_lhs, 1.0);
  EXPECT_DOUBLE_EQ(r.strong_rhs, 1.0);
  EXPECT_TRUE(r.strong_apc_holds);
  EXPECT_TRUE(r.apc_holds);
  EXPECT_TRUE(r.forms_agree);
}

TEST(Apc, NoOpRoundHoldsWithEquality) {
  const std::vector<ParamVector> zero{vec({0.0, 0.0}), vec({0.0, 0.0})};
  const ApcReport r = check_apc(kOrigin, zero, kStar);
  EXPECT_EQ(r.strong_lhs, 0.0);
  EXPECT_EQ(r.strong_rhs, 0.0);
  EXPECT_TRUE(r.strong_apc_holds);
  EXPECT_TRUE(r.apc_holds);
}

TEST(Apc, UpdateAwayFromOptimumFails) {
  const std::vector<ParamVector> away{vec({-1.0, 0.0}), vec({0.0, -1.0})};
  const ApcReport r = check_apc(kOrigin, away, kStar);
  EXPECT_FALSE(r.strong_apc_holds);
  EXPECT_FALSE(r.apc_holds);
}

TEST(Apc, LiteralAndReducedFormsAgreeOnRandomRounds) {
  Rng rng(81);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<ParamVector> d;
    for (int c = 0; c < 3; ++c) d.push_back(vec({n(rng), n(rng), n(rng)}));
    const ParamVector w = vec({n(rng), n(rng), n(rng)});
    const ParamVector s = vec({n(rng), n(rng), n(rng)});
    EXPECT_TRUE(check_apc(w, d, s).forms_agree);
  }
}

TEST(OptimalStep, TwoHyperplanesIsTwo) {
  const ParamVector v = axpy_mean(kPair);
  const StepOracle o = optimal_step_oracle(identity2(), kOrigin, kOrigin, v, kStar, GridSpec{4.0, 4001});
  ASSERT_TRUE(o.closed.has_value());
  EXPECT_DOUBLE_EQ(*o.closed, 2.0);
  EXPECT_NEAR(o.grid, 2.0, 1e-3);
  EXPECT_DOUBLE_EQ(quadratic_optimal_step(DiagPreconditioner::identity(2), kOrigin, v, kStar), 2.0);
}

TEST(OptimalStep, GridTracksClosedFormAlongOptimumDirection) {
  Rng rng(82);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const ParamVector w = vec({n(rng), n(rng), n(rng), n(rng)});
    const ParamVector s = vec({n(rng), n(rng), n(rng), n(rng)});
    const double scale = std::exp(n(rng));
    const ParamVector v = scale * (s - w);
    const GridSpec grid{3.0 / scale, 3001};
    const StepOracle o = optimal_step_oracle(DistanceGenerator::quadratic(DiagPreconditioner::identity(4)),
                                             w, w, v, s, grid);
    EXPECT_NEAR(*o.closed, 1.0 / scale, 1e-12 / scale);
    EXPECT_LE(std::abs(o.grid - *o.closed), grid.cell());
  }
}

TEST(OptimalStep, AlreadyOptimalIsZero) {
  const ParamVector v = vec({0.3, -0.2});
  const StepOracle o = optimal_step_oracle(identity2(), kStar, kStar, v, kStar, GridSpec{1.0, 101});
  EXPECT_EQ(*o.closed, 0.0);
  EXPECT_EQ(o.grid, 0.0);
}

TEST(OptimalStep, BoundaryArgminIsInconclusive) {
  try {
    optimal_step_oracle(identity2(), kOrigin, kOrigin, axpy_mean(kPair), kStar, GridSpec{1.0, 101});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInconclusive);
  }
}

OracleRound round_of(const std::vector<ParamVector>& deltas, const DiagPreconditioner& g, double eta_g) {
  OracleRound r;
  r.w_t = kOrigin;
  r.deltas = deltas;
  r.v = axpy_mean(deltas);
  double sq = 0.0;
  for (const auto& d : deltas) sq += norm_sq(d);
  r.m = 0.5 * sq / static_cast<double>(deltas.size());
  r.eta_g = eta_g;
  r.geometry = DistanceGenerator::quadratic(g);
  return r;
}

TEST(LowerBound, TwoHyperplanesIdentityRoundZero) {
  const std::vector<OracleRound> trace{round_of(kPair, DiagPreconditioner::identity(2), 1.0)};
  const LowerBoundReport rep = verify_lower_bound(trace, kStar, false);
  EXPECT_EQ(rep.checked, 1);
  EXPECT_EQ(rep.passed, 1);
  EXPECT_TRUE(rep.violations.empty());
}

TEST(LowerBound, HomogeneousClientsPass) {
  const std::vector<ParamVector> same{vec({0.5, 0.5}), vec({0.5, 0.5})};
  const std::vector<OracleRound> trace{round_of(same, DiagPreconditioner::identity(2), 0.5)};
  const LowerBoundReport rep = verify_lower_bound(trace, kStar, false);
  EXPECT_EQ(rep.passed, 1);
}

TEST(LowerBound, OversizedStepIsAViolation) {
  const std::vector<OracleRound> trace{round_of(kPair, DiagPreconditioner::identity(2), 2.5)};
  const LowerBoundReport rep = verify_lower_bound(trace, kStar, false);
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_DOUBLE_EQ(rep.violations[0].eta_star, 2.0);
}

TEST(LowerBound, ApcFailureExcludesRound) {
  const std::vector<ParamVector> away{vec({-1.0, 0.0}), vec({0.0, -1.0})};
  const std::vector<OracleRound> trace{round_of(away, DiagPreconditioner::identity(2), 1.0)};
  const LowerBoundReport rep = verify_lower_bound(trace, kStar, false);
  EXPECT_EQ(rep.checked, 0);
  EXPECT_EQ(rep.excluded_rounds, (std::vector<int>{0}));
}

TEST(LowerBound, MomentumExcludesAfterOvershoot) {
  std::vector<OracleRound> trace{round_of(kPair, DiagPreconditioner::identity(2), 1.5),
                                 round_of(kPair, DiagPreconditioner::identity(2), 1.0)};
  trace[1].round = 1;
  const LowerBoundReport rep = verify_lower_bound(trace, kStar, true);
  EXPECT_EQ(rep.checked, 1);
  EXPECT_EQ(rep.excluded_rounds, (std::vector<int>{1}));
}

TEST(LowerBound, DefaultSyntheticRunHasNoViolations) {
  SyntheticSpec spec;
  spec.seed = 1;
  const FederationInstance inst = generate(spec);
  RunConfig cfg;
  cfg.rounds = 200;
  cfg.local.strategy = LocalStrategy::kExactProjection;
  cfg.optimizer.family = Family::kFedDuAdagrad;
  std::vector<OracleRound> trace;
  run(cfg, inst, collect_oracle_rounds(trace));
  const LowerBoundReport rep = verify_lower_bound(trace, inst.w_star, false);
  EXPECT_EQ(rep.checked + static_cast<int>(rep.excluded_rounds.size()), static_cast<int>(trace.size()));
  EXPECT_GT(rep.checked, 0);
  EXPECT_TRUE(rep.violations.empty());
}

TEST(Minimax, TwoHyperplanesArgminIsOne) {
  const MinimaxReport r = verify_minimax(identity2(), kOrigin, kPair, 10000);
  EXPECT_DOUBLE_EQ(r.m, 0.5);
  EXPECT_DOUBLE_EQ(r.eta_g, 1.0);
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.grid_argmin, 1.0, r.cell);
}

TEST(Minimax, DoublingDirectionQuartersArgmin) {
  const ParamVector v = vec({0.5, 0.5});
  const MinimaxReport base = minimax_check(identity2(), kOrigin, v, 0.5);
  const MinimaxReport scaled = minimax_check(identity2(), kOrigin, 2.0 * v, 0.5);
  EXPECT_DOUBLE_EQ(scaled.eta_g, 0.25 * base.eta_g);
  EXPECT_TRUE(scaled.passed());
  EXPECT_NEAR(scaled.grid_argmin, 0.25, scaled.cell);
}

TEST(Minimax, ZeroTargetGivesZero) {
  const MinimaxReport r = minimax_check(identity2(), kOrigin, vec({0.5, 0.5}), 0.0);
  EXPECT_EQ(r.eta_g, 0.0);
  EXPECT_EQ(r.grid_argmin, 0.0);
  EXPECT_TRUE(r.passed());
}

TEST(Minimax, WrongStepFailsArgminCheck) {
  const MinimaxReport r = minimax_check(identity2(), kOrigin, vec({0.5, 0.5}), 0.5, 10000, 3.0);
  EXPECT_FALSE(r.argmin_ok);
  EXPECT_FALSE(r.residual_ok);
}

TEST(Duality, QuadraticGapIsRounding) {
  const DistanceGenerator gen = DistanceGenerator::quadratic(DiagPreconditioner(vec({2.0, 0.5})));
  const ParamVector w = vec({0.3, -0.7});
  EXPECT_LT(duality_gap(gen, kStar, w, mirror_map(gen, w)), 1e-14);
}

SuiteConfig small_suite(GeneratorFamily f) {
  SuiteConfig cfg;
  cfg.family = f;
  cfg.instances = 6;
  cfg.rounds = 20;
  cfg.grid_points = 2000;
  return cfg;
}

TEST(Suites, SmallQuadraticSuitesPass) {
  for (bool momentum : {false, true}) {
    const SuiteReport rep = lower_bound_suite(small_suite(GeneratorFamily::kQuadratic), momentum);
    EXPECT_EQ(rep.instances, 6);
    EXPECT_GT(rep.lower_bound.checked, 0);
    EXPECT_TRUE(rep.lower_bound.violations.empty());
    EXPECT_EQ(rep.residual_failures, 0);
    EXPECT_EQ(rep.duality_failures, 0);
  }
}

TEST(Suites, SmallCoshSuitePasses) {
  SuiteConfig cfg = small_suite(GeneratorFamily::kCosh);
  cfg.instances = 2;
  cfg.rounds = 8;
  const SuiteReport rep = lower_bound_suite(cfg, false);
  EXPECT_GT(rep.lower_bound.checked, 0);
  EXPECT_TRUE(rep.lower_bound.violations.empty());
  EXPECT_EQ(rep.residual_failures, 0);
}

TEST(Suites, InjectedStepIsCaught) {
  SuiteConfig cfg = small_suite(GeneratorFamily::kQuadratic);
  cfg.eta_injection = 3.0;
  const SuiteReport rep = lower_bound_suite(cfg, false);
  EXPECT_GT(rep.lower_bound.violations.size(), 0u);
  EXPECT_GT(rep.residual_failures, 0);
}

TEST(Suites, MinimaxSuitePasses) {
  for (GeneratorFamily f : {GeneratorFamily::kQuadratic, GeneratorFamily::kCosh}) {
    SuiteConfig cfg = small_suite(f);
    cfg.instances = 10;
    const MinimaxSuiteReport rep = minimax_suite(cfg);
    EXPECT_EQ(rep.checked, 10);
    EXPECT_EQ(rep.passed, 10);
  }
}

}  // namespace
}  // namespace feddua
