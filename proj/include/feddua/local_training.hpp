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

#ifndef FEDDUA_LOCAL_TRAINING_HPP
#define FEDDUA_LOCAL_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "feddua/error.hpp"
#include "feddua/rng.hpp"
#include "feddua/vector_core.hpp"

namespace feddua {

/// One client's regression data (rows of `inputs` are samples) with the
/// factorized Gram matrix X X^T that local training works against.
class ClientDataset {
 public:
  ClientDataset(int client_id, Matrix inputs, ParamVector targets)
      : client_id_(client_id),
        inputs_(std::move(inputs)),
        targets_(std::move(targets)) {
    if (inputs_.rows() < 1) throw Error(ErrorCode::kInvalidArgument, "client has no samples");
    if (targets_.size() != inputs_.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "targets vs input rows");
    }
    if (!inputs_.allFinite()) throw Error(ErrorCode::kNonFinite, "client inputs");
    require_finite(targets_, "client targets");
    gram_ = inputs_ * inputs_.transpose();
    llt_ = std::make_shared<const Eigen::LLT<Matrix>>(gram_);
  }

  int client_id() const noexcept { return client_id_; }
  Eigen::Index num_samples() const noexcept { return inputs_.rows(); }
  Eigen::Index dim() const noexcept { return inputs_.cols(); }
  const Matrix& inputs() const noexcept { return inputs_; }
  const ParamVector& targets() const noexcept { return targets_; }
  const Matrix& gram() const noexcept { return gram_; }
  const Eigen::LLT<Matrix>& gram_factor() const noexcept { return *llt_; }

  /// X w - y
  ParamVector residual(const ParamVector& w) const {
    if (w.size() != inputs_.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "model vs client input dimension");
    }
    return inputs_ * w - targets_;
  }

  /// F_i(w) = 1/(2 n) ||X w - y||^2
  double loss(const ParamVector& w) const {
    return 0.5 * residual(w).squaredNorm() / static_cast<double>(num_samples());
  }

  /// grad F_i(w) = X^T (X w - y) / n
  ParamVector gradient(const ParamVector& w) const {
    return inputs_.transpose() * residual(w) / static_cast<double>(num_samples());
  }

 private:
  int client_id_;
  Matrix inputs_;
  ParamVector targets_;
  Matrix gram_;
  std::shared_ptr<const Eigen::LLT<Matrix>> llt_;
};

enum class LocalStrategy { kSgd, kExactProjection, kFedProx, kScaffold };

struct LocalConfig {
  LocalStrategy strategy = LocalStrategy::kSgd;
  double lr = 0.01;                      // eta_l
  int steps = 20;                        // tau
  std::optional<int> batch_size;         // nullopt = full batch
  double mu = 0.0;                       // FedProx proximal weight

  void validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
      throw Error(ErrorCode::kInvalidArgument, "local lr must be positive");
    }
    if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "local steps must be >= 1");
    if (batch_size && *batch_size < 1) {
      throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
    }
    if (!(mu >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "fedprox mu must be >= 0");
  }
};

struct ClientUpdate {
  ParamVector delta;
  double norm_sq = 0.0;
  int client_id = 0;
  Eigen::Index num_samples = 0;
};

inline ClientUpdate make_update(ParamVector delta, int client_id, Eigen::Index num_samples) {
  require_finite(delta, "client update");
  const double n2 = norm_sq(delta);
  return ClientUpdate{std::move(delta), n2, client_id, num_samples};
}

/// Control variates for SCAFFOLD-style local training. The server control is
/// kept equal to the mean of all client controls (absent clients count as 0).
struct ScaffoldState {
  std::map<int, ParamVector> client_controls;
  ParamVector server_control;
  int num_clients = 0;

  ParamVector control_for(int client_id) const {
    auto it = client_controls.find(client_id);
    if (it == client_controls.end()) return ParamVector::Zero(server_control.size());
    return it->second;
  }

  /// Applies the control updates of one round's participants.
  void merge(const std::vector<std::pair<int, ParamVector>>& new_controls) {
    if (num_clients < 1) throw Error(ErrorCode::kInvalidArgument, "scaffold num_clients unset");
    ParamVector shift = ParamVector::Zero(server_control.size());
    for (const auto& [id, control] : new_controls) {
      require_same_dim(control, server_control, "scaffold control");
      shift += control - control_for(id);
    }
    for (const auto& [id, control] : new_controls) client_controls[id] = control;
    server_control += shift / static_cast<double>(num_clients);
  }
};

namespace detail {

/// tau local steps tracked in coefficient space. Every gradient of the
/// squared loss lies in the row space of X, so w_k = w_t + X^T a_k - k*lr*drift.
/// `drift` is c - c_i for SCAFFOLD and null otherwise.
inline ParamVector run_local_steps(const ParamVector& w_t, const ClientDataset& data,
                                   const LocalConfig& cfg, std::uint64_t seed, int round,
                                   const ParamVector* drift) {
  const Eigen::Index n = data.num_samples();
  const int batch = cfg.batch_size ? *cfg.batch_size : static_cast<int>(n);
  if (batch > n) {
    throw Error(ErrorCode::kInvalidArgument, "batch size " + std::to_string(batch) +
                                                 " exceeds client sample count " +
                                                 std::to_string(n));
  }
  const bool full = batch == n;
  const bool prox = cfg.strategy == LocalStrategy::kFedProx && cfg.mu != 0.0;
  const Matrix& gram = data.gram();
  const ParamVector r0 = data.residual(w_t);
  ParamVector drift_rows;
  if (drift) drift_rows = data.inputs() * (*drift);

  ParamVector a = ParamVector::Zero(n);
  ParamVector res(n);
  std::vector<int> idx;
  const double step_scale = cfg.lr / static_cast<double>(batch);
  for (int k = 0; k < cfg.steps; ++k) {
    if (full) {
      idx.resize(static_cast<std::size_t>(n));
      for (Eigen::Index j = 0; j < n; ++j) idx[static_cast<std::size_t>(j)] = static_cast<int>(j);
    } else {
      Rng rng = make_stream(seed, StreamDomain::kLocalStep,
                            {static_cast<std::uint64_t>(data.client_id()),
                             static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(k)});
      idx = sample_without_replacement(rng, static_cast<int>(n), batch);
    }
    for (int j : idx) {
      double rj = r0[j] + gram.col(j).dot(a);
      if (drift) rj -= static_cast<double>(k) * cfg.lr * drift_rows[j];
      res[j] = rj;
    }
    if (prox) a -= (cfg.lr * cfg.mu) * a;
    for (int j : idx) a[j] -= step_scale * res[j];
  }
  ParamVector delta = data.inputs().transpose() * a;
  if (drift) delta -= (static_cast<double>(cfg.steps) * cfg.lr) * (*drift);
  return delta;
}

}  // namespace detail

/// tau steps of (minibatch) SGD on the client's squared loss, optionally with
/// the FedProx term mu (w - w_t). Returns Delta = w_{i,tau} - w_t.
inline ClientUpdate local_sgd(const ParamVector& w_t, const ClientDataset& data,
                              const LocalConfig& cfg, std::uint64_t seed, int round) {
  cfg.validate();
  if (cfg.strategy != LocalStrategy::kSgd && cfg.strategy != LocalStrategy::kFedProx) {
    throw Error(ErrorCode::kInvalidArgument, "local_sgd requires sgd or fedprox strategy");
  }
  return make_update(detail::run_local_steps(w_t, data, cfg, seed, round, nullptr),
                     data.client_id(), data.num_samples());
}

/// Euclidean projection of w_t onto {w : X w = y}, via the n x n Gram system.
inline ClientUpdate exact_projection(const ParamVector& w_t, const ClientDataset& data) {
  const auto& llt = data.gram_factor();
  if (llt.info() != Eigen::Success || !(llt.rcond() >= 1e-12)) {
    throw Error(ErrorCode::kSingularSystem,
                "client " + std::to_string(data.client_id()) + " Gram system is singular");
  }
  ParamVector rhs = -data.residual(w_t);
  // A residual inside the componentwise rounding bound means w_t already
  // interpolates the client; solving would only project rounding noise.
  const double gamma = static_cast<double>(w_t.size()) * std::numeric_limits<double>::epsilon();
  const ParamVector scale = data.inputs().cwiseAbs() * w_t.cwiseAbs() + data.targets().cwiseAbs();
  if ((rhs.cwiseAbs().array() <= gamma * scale.array()).all()) {
    return make_update(ParamVector::Zero(w_t.size()), data.client_id(), data.num_samples());
  }
  ParamVector lambda = llt.solve(rhs);
  // One refinement pass against the unfactored Gram matrix.
  lambda += llt.solve(rhs - data.gram() * lambda);
  return make_update(data.inputs().transpose() * lambda, data.client_id(), data.num_samples());
}

struct ScaffoldResult {
  ClientUpdate update;
  ParamVector control;  // c_i^+
};

/// Local SGD with gradient - c_i + c, followed by the cheap control update
/// c_i^+ = c_i - c + (w_t - w_{i,tau}) / (tau * lr).
inline ScaffoldResult scaffold_step(const ParamVector& w_t, const ClientDataset& data,
                                    const LocalConfig& cfg, const ScaffoldState& state,
                                    std::uint64_t seed, int round) {
  cfg.validate();
  if (cfg.strategy != LocalStrategy::kScaffold) {
    throw Error(ErrorCode::kInvalidArgument, "scaffold_step requires scaffold strategy");
  }
  require_same_dim(state.server_control, w_t, "scaffold server control");
  const ParamVector ci = state.control_for(data.client_id());
  require_same_dim(ci, w_t, "scaffold client control");
  const ParamVector drift = state.server_control - ci;
  ParamVector delta = detail::run_local_steps(w_t, data, cfg, seed, round, &drift);
  ParamVector control =
      ci - state.server_control - delta / (static_cast<double>(cfg.steps) * cfg.lr);
  return ScaffoldResult{make_update(std::move(delta), data.client_id(), data.num_samples()),
                        std::move(control)};
}

}  // namespace feddua

#endif  // FEDDUA_LOCAL_TRAINING_HPP
