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

#ifndef FEDDUA_REPORTING_HPP
#define FEDDUA_REPORTING_HPP

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "feddua/config.hpp"
#include "feddua/simulation.hpp"
#include "feddua/sweep.hpp"
#include "feddua/synthetic_data.hpp"
#include "feddua/theorem_oracles.hpp"
#include "feddua/version.hpp"

namespace feddua {

/// JSON sidecar written next to a run's CSV trace.
inline Json run_metadata(const Experiment& ex, const FederationInstance& inst, const RunResult& res,
                         std::size_t window = 5) {
  Json meta{{"version", kVersion},
            {"config", ex.document},
            {"instance_hash", hex64(instance_hash(inst))},
            {"initial_loss", res.initial_loss},
            {"rounds_recorded", res.records.size()},
            {"skipped_rounds", res.skipped_rounds},
            {"diverged", res.diverged}};
  meta["final_window_loss"] = res.records.empty() ? Json(nullptr) : Json(final_window_loss(res.records, window));
  return meta;
}

struct VerificationOutcome {
  Json report;
  std::size_t violations = 0;
  bool inconclusive = false;
};

namespace detail {

inline Json lower_bound_json(const LowerBoundReport& r, std::size_t max_listed = 20) {
  Json listed = Json::array();
  for (std::size_t i = 0; i < std::min(max_listed, r.violations.size()); ++i) {
    const auto& v = r.violations[i];
    listed.push_back({{"round", v.round}, {"eta_star", v.eta_star}, {"eta_g", v.eta_g}});
  }
  return Json{{"checked", r.checked},
              {"passed", r.passed},
              {"violations", r.violations.size()},
              {"violation_details", listed},
              {"hypothesis_excluded", r.excluded_rounds.size()},
              {"unresolved", r.unresolved_rounds.size()},
              {"inconclusive", r.inconclusive}};
}

inline bool wants(const VerifyConfig& cfg, const char* name) {
  return std::find(cfg.theorems.begin(), cfg.theorems.end(), name) != cfg.theorems.end();
}

}  // namespace detail

/// Runs the configured theorem suites. `eta_injection` != 1 corrupts the
/// step the simulated server applies, which the verifier must catch.
inline VerificationOutcome run_verification(const VerifyConfig& cfg, double eta_injection = 1.0) {
  SuiteConfig suite = cfg.suite;
  suite.eta_injection = eta_injection;
  const bool quadratic = suite.family == GeneratorFamily::kQuadratic;
  VerificationOutcome out;
  Json theorems = Json::object();
  Json residuals{{"checked", 0}, {"failures", 0}, {"max_residual", 0.0}};
  auto absorb_residuals = [&](const SuiteReport& s) {
    residuals["checked"] = residuals["checked"].get<int>() + s.residual_checked;
    residuals["failures"] = residuals["failures"].get<int>() + s.residual_failures;
    residuals["max_residual"] = std::max(residuals["max_residual"].get<double>(), s.max_residual);
    out.violations += static_cast<std::size_t>(s.residual_failures);
  };

  if (detail::wants(cfg, "lower-bound") || detail::wants(cfg, "duality")) {
    const SuiteReport s = lower_bound_suite(suite, false);
    absorb_residuals(s);
    if (detail::wants(cfg, "lower-bound")) {
      theorems["lower-bound"] = detail::lower_bound_json(s.lower_bound);
      out.violations += s.lower_bound.violations.size();
      out.inconclusive = out.inconclusive || s.lower_bound.inconclusive;
    }
    if (detail::wants(cfg, "duality")) {
      if (quadratic) {
        theorems["duality"] = Json{{"checked", s.duality_checked},
                                   {"violations", s.duality_failures},
                                   {"max_relative_gap", s.max_duality_gap}};
        out.violations += static_cast<std::size_t>(s.duality_failures);
      } else {
        theorems["duality"] = Json{{"skipped", "defined for quadratic generators only"}};
      }
    }
  }
  if (detail::wants(cfg, "lower-bound-momentum")) {
    const SuiteReport s = lower_bound_suite(suite, true);
    absorb_residuals(s);
    theorems["lower-bound-momentum"] = detail::lower_bound_json(s.lower_bound);
    out.violations += s.lower_bound.violations.size();
    out.inconclusive = out.inconclusive || s.lower_bound.inconclusive;
  }
  if (detail::wants(cfg, "minimax")) {
    const MinimaxSuiteReport s = minimax_suite(suite);
    theorems["minimax"] = Json{{"checked", s.checked},
                               {"passed", s.passed},
                               {"violations", s.failures.size()},
                               {"failed_instances", s.failures},
                               {"inconclusive", s.inconclusive},
                               {"max_residual", s.max_residual}};
    out.violations += s.failures.size();
    out.inconclusive = out.inconclusive || s.inconclusive > 0;
  }
  theorems["round_residuals"] = residuals;

  out.report = Json{{"version", kVersion},
                    {"generator", quadratic ? "quadratic" : "cosh"},
                    {"instances", suite.instances},
                    {"rounds", suite.rounds},
                    {"seed", suite.seed},
                    {"eta_injection", eta_injection},
                    {"theorems", theorems},
                    {"total_violations", out.violations},
                    {"inconclusive", out.inconclusive}};
  return out;
}

}  // namespace feddua

#endif  // FEDDUA_REPORTING_HPP
