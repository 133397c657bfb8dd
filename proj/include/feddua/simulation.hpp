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

#ifndef FEDDUA_SIMULATION_HPP
#define FEDDUA_SIMULATION_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "feddua/error.hpp"
#include "feddua/global_optimizers.hpp"
#include "feddua/local_training.hpp"
#include "feddua/mirror_geometry.hpp"
#include "feddua/rng.hpp"
#include "feddua/synthetic_data.hpp"
#include "feddua/vector_core.hpp"

namespace feddua {

enum class EvalMode { kLastIterate, kAvgLastTwo };

struct RunConfig {
  int rounds = 500;
  int clients_per_round = 20;
  LocalConfig local;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  EvalMode eval = EvalMode::kAvgLastTwo;
  bool record_wall_time = false;  // off keeps traces byte-reproducible
  double divergence_threshold = 1e12;

  void validate(int num_clients) const {
    if (rounds < 1) throw Error(ErrorCode::kInvalidArgument, "rounds must be >= 1");
    if (clients_per_round < 1 || clients_per_round > num_clients) {
      throw Error(ErrorCode::kInvalidArgument,
                  "clients_per_round must lie in [1, " + std::to_string(num_clients) + "]");
    }
    local.validate();
    optimizer.validate();
  }
};

struct RoundRecord {
  int round = 0;
  double eta_g = 0.0;
  double global_loss = 0.0;
  double dist_to_opt_l2 = 0.0;
  double bregman_to_opt = 0.0;
  double mean_update_norm_sq = 0.0;
  std::vector<int> participants;
  double wall_ms = 0.0;
  bool skipped = false;
};

struct RunResult {
  ServerState final_state;
  std::vector<RoundRecord> records;
  double initial_loss = 0.0;
  int skipped_rounds = 0;
  bool diverged = false;
};

/// Everything an observer may inspect after a round. `step` is null on a
/// skipped round.
struct RoundContext {
  int round;
  const ParamVector& w_before;
  const std::vector<ClientUpdate>& updates;
  const StepResult* step;
  const FederationInstance& instance;
};

using RoundObserver = std::function<void(const RoundContext&)>;

/// Evaluation iterate: w_t, or (w_t + w_{t-1}) / 2. Without a previous
/// iterate (round 0) both modes return w_t.
inline ParamVector evaluate(const ParamVector& w_t, const ParamVector* w_prev, EvalMode mode) {
  if (mode == EvalMode::kLastIterate || w_prev == nullptr) return w_t;
  require_same_dim(w_t, *w_prev, "evaluate");
  return 0.5 * (w_t + *w_prev);
}

inline std::vector<int> sample_participants(std::uint64_t seed, int round, int num_clients,
                                            int per_round) {
  if (per_round == num_clients) {
    std::vector<int> all(static_cast<std::size_t>(num_clients));
    for (int i = 0; i < num_clients; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  Rng rng = make_stream(seed, StreamDomain::kClientSampling, {static_cast<std::uint64_t>(round)});
  return sample_without_replacement(rng, num_clients, per_round);
}

/// Runs the configured number of rounds from w_0 = 0. Client positions in
/// `inst.clients` serve as client ids for sampling and ordering.
inline RunResult run(const RunConfig& cfg, const FederationInstance& inst,
                     const RoundObserver& observer = {}) {
  const int num_clients = inst.num_clients();
  cfg.validate(num_clients);
  using Clock = std::chrono::steady_clock;

  RunResult result;
  ServerState state = init_state(cfg.optimizer, ParamVector::Zero(inst.dim()));
  result.initial_loss = global_loss(inst, state.w);
  result.records.reserve(static_cast<std::size_t>(cfg.rounds));

  ScaffoldState scaffold;
  if (cfg.local.strategy == LocalStrategy::kScaffold) {
    scaffold.server_control = ParamVector::Zero(inst.dim());
    scaffold.num_clients = num_clients;
  }
  DistanceGenerator last_geometry =
      DistanceGenerator::quadratic(DiagPreconditioner::identity(inst.dim()));

  for (int t = 0; t < cfg.rounds; ++t) {
    const auto start = Clock::now();
    RoundRecord rec;
    rec.round = t;
    rec.participants = sample_participants(cfg.seed, t, num_clients, cfg.clients_per_round);

    std::vector<ClientUpdate> updates;
    std::vector<std::pair<int, ParamVector>> new_controls;
    updates.reserve(rec.participants.size());
    for (int id : rec.participants) {
      const ClientDataset& data = inst.clients[static_cast<std::size_t>(id)];
      switch (cfg.local.strategy) {
        case LocalStrategy::kSgd:
        case LocalStrategy::kFedProx:
          updates.push_back(local_sgd(state.w, data, cfg.local, cfg.seed, t));
          break;
        case LocalStrategy::kExactProjection:
          updates.push_back(exact_projection(state.w, data));
          break;
        case LocalStrategy::kScaffold: {
          auto res = scaffold_step(state.w, data, cfg.local, scaffold, cfg.seed, t);
          updates.push_back(std::move(res.update));
          new_controls.emplace_back(id, std::move(res.control));
          break;
        }
      }
      updates.back().client_id = id;
    }
    if (!new_controls.empty()) scaffold.merge(new_controls);

    double sum_sq = 0.0;
    for (const auto& u : updates) sum_sq += u.norm_sq;
    rec.mean_update_norm_sq = sum_sq / static_cast<double>(updates.size());

    const ParamVector w_before = state.w;
    std::optional<StepResult> step;
    try {
      step = server_step(state, updates);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNonFinite) {
        result.diverged = true;
      } else if (e.code() != ErrorCode::kDegenerateDirection &&
                 e.code() != ErrorCode::kDegeneratePreconditioner) {
        throw;
      }
    }

    if (step) {
      rec.eta_g = step->eta_g;
      state = step->state;
      last_geometry = step->geometry;
    } else {
      rec.skipped = true;
      ++result.skipped_rounds;
      ++state.round;
    }

    const ParamVector w_eval = evaluate(state.w, &w_before, cfg.eval);
    rec.global_loss = global_loss(inst, w_eval);
    rec.dist_to_opt_l2 = std::sqrt(norm_sq(w_eval - inst.w_star));
    rec.bregman_to_opt = bregman(last_geometry, inst.w_star, w_eval);
    if (cfg.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    }
    if (observer) observer(RoundContext{t, w_before, updates, step ? &*step : nullptr, inst});

    const bool blew_up = !std::isfinite(rec.global_loss) || rec.global_loss > cfg.divergence_threshold;
    result.records.push_back(std::move(rec));
    if (result.diverged || blew_up) {
      result.diverged = true;
      break;
    }
  }
  result.final_state = std::move(state);
  return result;
}

/// Mean global loss over the last `window` records.
inline double final_window_loss(const std::vector<RoundRecord>& records, std::size_t window = 5) {
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "no records");
  const std::size_t n = std::min(window, records.size());
  double acc = 0.0;
  for (std::size_t i = records.size() - n; i < records.size(); ++i) acc += records[i].global_loss;
  return acc / static_cast<double>(n);
}

inline constexpr const char* kTraceHeader =
    "round,eta_g,global_loss,dist_l2,bregman,mean_norm_sq,participants,wall_ms";

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// One row per round; participants are semicolon-joined ids.
inline void write_trace_csv(const std::vector<RoundRecord>& records, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& r : records) {
    out << r.round << ',' << format_real(r.eta_g) << ',' << format_real(r.global_loss) << ','
        << format_real(r.dist_to_opt_l2) << ',' << format_real(r.bregman_to_opt) << ','
        << format_real(r.mean_update_norm_sq) << ',';
    for (std::size_t i = 0; i < r.participants.size(); ++i) {
      out << (i ? ";" : "") << r.participants[i];
    }
    out << ',' << format_real(r.wall_ms) << '\n';
  }
}

}  // namespace feddua

#endif  // FEDDUA_SIMULATION_HPP
