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

#ifndef FEDDUA_GLOBAL_OPTIMIZERS_HPP
#define FEDDUA_GLOBAL_OPTIMIZERS_HPP

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "feddua/error.hpp"
#include "feddua/local_training.hpp"
#include "feddua/mirror_geometry.hpp"
#include "feddua/vector_core.hpp"

namespace feddua {

enum class Family {
  kFedAvg,
  kFedAvgM,
  kFedExP,
  kFedExPM,
  kFedAdagrad,
  kFedAdam,
  kFedDuAdagrad,
  kFedDuAdam,
  kFedDuAGeneric,
};

inline constexpr std::pair<Family, std::string_view> kFamilyNames[] = {
    {Family::kFedAvg, "fedavg"},           {Family::kFedAvgM, "fedavgm"},
    {Family::kFedExP, "fedexp"},           {Family::kFedExPM, "fedexpm"},
    {Family::kFedAdagrad, "fedadagrad"},   {Family::kFedAdam, "fedadam"},
    {Family::kFedDuAdagrad, "fedduadagrad"}, {Family::kFedDuAdam, "fedduadam"},
    {Family::kFedDuAGeneric, "feddua-generic"},
};

inline std::string_view to_string(Family f) {
  for (const auto& [fam, name] : kFamilyNames) {
    if (fam == f) return name;
  }
  return "unknown";
}

inline std::optional<Family> parse_family(std::string_view name) {
  for (const auto& [fam, n] : kFamilyNames) {
    if (n == name) return fam;
  }
  return std::nullopt;
}

enum class GenericGeometry { kQuadratic, kCosh };

/// Distance generator for the generic FedDuA path. Both geometries are
/// time-dependent through the Adagrad/Adam diagonal sqrt(s_t) + eps: the
/// quadratic one uses it as G_t, the cosh one as per-coordinate scales.
struct GenericSpec {
  GenericGeometry geometry = GenericGeometry::kQuadratic;
  bool momentum = false;  // Adam-style s, v, m recursions instead of Adagrad
};

struct OptimizerConfig {
  Family family = Family::kFedDuAdagrad;
  double eta_g = 1.0;  // fixed-rate families only
  double eps = 1e-9;
  double eps_g = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  GenericSpec generic;
  bool identity_preconditioner = false;        // G_t = I; s_t is still accumulated
  std::optional<ParamVector> initial_accumulator;  // s_{-1}; zero when unset
  double eta_injection = 1.0;  // multiplies the applied step; negative controls only

  void validate() const {
    if (!(eta_g > 0.0) || !std::isfinite(eta_g)) {
      throw Error(ErrorCode::kInvalidArgument, "eta_g must be positive");
    }
    if (!(eps >= 0.0) || !(eps_g >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "eps and eps_g must be nonnegative");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "beta1 and beta2 must lie in [0, 1)");
    }
    if (!(eta_injection > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eta_injection must be > 0");
  }
};

struct ServerState {
  ParamVector w;  // w_t
  ParamVector s;  // accumulator
  ParamVector v;  // pseudo-gradient / momentum
  double m = 0.0;
  int round = 0;
  OptimizerConfig hyper;
};

inline ServerState init_state(const OptimizerConfig& cfg, ParamVector w0) {
  cfg.validate();
  require_finite(w0, "initial model");
  const Eigen::Index d = w0.size();
  ParamVector s = ParamVector::Zero(d);
  if (cfg.initial_accumulator) {
    require_same_dim(*cfg.initial_accumulator, w0, "initial accumulator");
    s = *cfg.initial_accumulator;
    for (Eigen::Index k = 0; k < d; ++k) {
      if (!(s[k] >= 0.0)) {
        throw Error(ErrorCode::kDomain, "initial accumulator must be nonnegative",
                    static_cast<std::size_t>(k));
      }
    }
  }
  return ServerState{std::move(w0), std::move(s), ParamVector::Zero(d), 0.0, 0, cfg};
}

struct StepResult {
  ServerState state;
  double eta_g = 0.0;          // step applied this round
  DistanceGenerator geometry;  // psi_t the step was taken in
  ParamVector mean_update;     // Delta-bar
  double mean_norm_sq = 0.0;   // (1/|S|) sum ||Delta_i||^2
};

namespace detail {

struct Aggregate {
  ParamVector mean;
  double mean_norm_sq;
};

inline Aggregate aggregate(const ServerState& state, std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw Error(ErrorCode::kEmptyInput, "server step with no client updates");
  std::vector<ParamVector> deltas;
  deltas.reserve(updates.size());
  double sum_sq = 0.0;
  for (const auto& u : updates) {
    require_same_dim(u.delta, state.w, "client update");
    deltas.push_back(u.delta);
    sum_sq += u.norm_sq;
  }
  return Aggregate{axpy_mean(deltas), sum_sq / static_cast<double>(updates.size())};
}

inline void update_momentum(ServerState& st, const ParamVector& mean, bool momentum) {
  if (momentum) {
    const double b1 = st.hyper.beta1;
    st.v = b1 * st.v + (1.0 - b1) * mean;
  } else {
    st.v = mean;
  }
}

/// m_t = 1/2 mean ||Delta_i||^2, or the discounted Adam-style recursion.
inline void update_numerator(ServerState& st, double mean_norm_sq, bool momentum) {
  if (momentum) {
    const double b1 = st.hyper.beta1;
    st.m = 0.5 * b1 * st.m + 0.5 * (1.0 - b1) * mean_norm_sq;
  } else {
    st.m = 0.5 * mean_norm_sq;
  }
}

inline void update_accumulator(ServerState& st, const ParamVector& mean, bool adam) {
  const ParamVector sq = elementwise(ElementwiseOp::kSquare, mean);
  if (adam) {
    const double b2 = st.hyper.beta2;
    st.s = b2 * st.s + (1.0 - b2) * sq;
  } else {
    st.s += sq;
  }
}

inline DiagPreconditioner preconditioner(const ServerState& st) {
  if (st.hyper.identity_preconditioner) return DiagPreconditioner::identity(st.w.size());
  return DiagPreconditioner::from_accumulator(st.s, st.hyper.eps);
}

inline double adaptive_rate(double m, double denom_without_eps, double eps_g) {
  const double denom = denom_without_eps + eps_g;
  if (!(denom > 0.0)) {
    throw Error(ErrorCode::kDegenerateDirection, "v_t = 0 with eps_g = 0; step undefined");
  }
  return m / denom;
}

inline StepResult finish(ServerState st, ParamVector w_next, double eta, DistanceGenerator geometry,
                         Aggregate agg) {
  require_finite(w_next, "updated model");
  st.w = std::move(w_next);
  ++st.round;
  return StepResult{std::move(st), eta, std::move(geometry), std::move(agg.mean),
                    agg.mean_norm_sq};
}

}  // namespace detail

/// FedAvg / FedAvgM: w' = w + eta_g * (Delta-bar or momentum v_t).
inline StepResult step_fedavg(ServerState state, std::span<const ClientUpdate> updates,
                              bool momentum) {
  auto agg = detail::aggregate(state, updates);
  detail::update_momentum(state, agg.mean, momentum);
  const double eta = state.hyper.eta_g * state.hyper.eta_injection;
  ParamVector w_next = state.w + eta * state.v;
  auto geom = DistanceGenerator::quadratic(DiagPreconditioner::identity(state.w.size()));
  return detail::finish(std::move(state), std::move(w_next), eta, std::move(geom), std::move(agg));
}

/// FedExP: eta = (1/2 mean ||Delta_i||^2) / (||Delta-bar||^2 + eps_g). The
/// momentum variant runs the same ratio on the Adam-style m_t and v_t with G = I.
inline StepResult step_fedexp(ServerState state, std::span<const ClientUpdate> updates,
                              bool momentum) {
  auto agg = detail::aggregate(state, updates);
  detail::update_momentum(state, agg.mean, momentum);
  detail::update_numerator(state, agg.mean_norm_sq, momentum);
  const auto identity = DiagPreconditioner::identity(state.w.size());
  const double eta =
      detail::adaptive_rate(state.m, weighted_norm_sq(state.v, identity, true), state.hyper.eps_g) *
      state.hyper.eta_injection;
  ParamVector w_next = state.w + eta * identity.apply_inverse(state.v);
  return detail::finish(std::move(state), std::move(w_next), eta,
                        DistanceGenerator::quadratic(identity), std::move(agg));
}

enum class FedOptVariant { kAdagrad, kAdam };

/// FedAdagrad / FedAdam without bias correction: w' = w + eta_g G_t^{-1} v_t.
inline StepResult step_fedopt(ServerState state, std::span<const ClientUpdate> updates,
                              FedOptVariant variant) {
  auto agg = detail::aggregate(state, updates);
  const bool adam = variant == FedOptVariant::kAdam;
  detail::update_accumulator(state, agg.mean, adam);
  detail::update_momentum(state, agg.mean, adam);
  const DiagPreconditioner g = detail::preconditioner(state);
  const double eta = state.hyper.eta_g * state.hyper.eta_injection;
  ParamVector w_next = state.w + eta * g.apply_inverse(state.v);
  return detail::finish(std::move(state), std::move(w_next), eta, DistanceGenerator::quadratic(g),
                        std::move(agg));
}

enum class FedDuAVariant { kDuAdagrad, kDuAdam, kGeneric };

/// Doubly adaptive step. Specialized variants use the closed form
/// eta = m_t / (||v_t||^2_{G^{-1}} + eps_g) and w' = w + eta G^{-1} v_t; the
/// generic variant steps in the dual space of its distance generator.
inline StepResult step_feddua(ServerState state, std::span<const ClientUpdate> updates,
                              FedDuAVariant variant) {
  auto agg = detail::aggregate(state, updates);
  const bool adam = variant == FedDuAVariant::kDuAdam ||
                    (variant == FedDuAVariant::kGeneric && state.hyper.generic.momentum);
  detail::update_accumulator(state, agg.mean, adam);
  detail::update_momentum(state, agg.mean, adam);
  detail::update_numerator(state, agg.mean_norm_sq, adam);
  const DiagPreconditioner g = detail::preconditioner(state);
  const double inject = state.hyper.eta_injection;

  if (variant != FedDuAVariant::kGeneric) {
    const double eta =
        detail::adaptive_rate(state.m, weighted_norm_sq(state.v, g, true), state.hyper.eps_g) * inject;
    ParamVector w_next = state.w + eta * g.apply_inverse(state.v);
    return detail::finish(std::move(state), std::move(w_next), eta, DistanceGenerator::quadratic(g),
                          std::move(agg));
  }

  DistanceGenerator gen = state.hyper.generic.geometry == GenericGeometry::kQuadratic
                              ? DistanceGenerator::quadratic(g)
                              : cosh_generator(g.diag());
  const ParamVector theta = mirror_map(gen, state.w);
  double eta = 0.0;
  if (const auto* q = gen.as_quadratic()) {
    eta = detail::adaptive_rate(state.m, weighted_norm_sq(state.v, q->g, true), state.hyper.eps_g);
  } else {
    eta = h_inverse(gen, theta, state.w, state.v, state.m);
  }
  eta *= inject;
  ParamVector w_next = inverse_mirror_map(gen, theta + eta * state.v);
  return detail::finish(std::move(state), std::move(w_next), eta, std::move(gen), std::move(agg));
}

/// Dispatches on the configured family. Updates must be in ascending client id order.
inline StepResult server_step(ServerState state, std::span<const ClientUpdate> updates) {
  switch (state.hyper.family) {
    case Family::kFedAvg: return step_fedavg(std::move(state), updates, false);
    case Family::kFedAvgM: return step_fedavg(std::move(state), updates, true);
    case Family::kFedExP: return step_fedexp(std::move(state), updates, false);
    case Family::kFedExPM: return step_fedexp(std::move(state), updates, true);
    case Family::kFedAdagrad: return step_fedopt(std::move(state), updates, FedOptVariant::kAdagrad);
    case Family::kFedAdam: return step_fedopt(std::move(state), updates, FedOptVariant::kAdam);
    case Family::kFedDuAdagrad:
      return step_feddua(std::move(state), updates, FedDuAVariant::kDuAdagrad);
    case Family::kFedDuAdam: return step_feddua(std::move(state), updates, FedDuAVariant::kDuAdam);
    case Family::kFedDuAGeneric:
      return step_feddua(std::move(state), updates, FedDuAVariant::kGeneric);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown optimizer family");
}

/// psi_t for the state as it stands (identity for non-preconditioned families).
inline DistanceGenerator current_geometry(const ServerState& state) {
  switch (state.hyper.family) {
    case Family::kFedAvg:
    case Family::kFedAvgM:
    case Family::kFedExP:
    case Family::kFedExPM:
      return DistanceGenerator::quadratic(DiagPreconditioner::identity(state.w.size()));
    case Family::kFedDuAGeneric:
      if (state.hyper.generic.geometry == GenericGeometry::kCosh) {
        return cosh_generator(detail::preconditioner(state).diag());
      }
      [[fallthrough]];
    default:
      return DistanceGenerator::quadratic(detail::preconditioner(state));
  }
}

}  // namespace feddua

#endif  // FEDDUA_GLOBAL_OPTIMIZERS_HPP
