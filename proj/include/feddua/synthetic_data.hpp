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

#ifndef FEDDUA_SYNTHETIC_DATA_HPP
#define FEDDUA_SYNTHETIC_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "feddua/error.hpp"
#include "feddua/local_training.hpp"
#include "feddua/rng.hpp"
#include "feddua/vector_core.hpp"

namespace feddua {

/// Overparameterized anisotropic linear-regression federation:
/// x ~ N(0, diag(k^-beta)), y = <w_ij, x>, w_ij ~ N(w_i, sample_variance I),
/// w_i ~ N(0, client_mean_variance I).
struct SyntheticSpec {
  int clients = 20;
  int samples_per_client = 30;
  int dim = 1000;
  double beta = 1.1;
  double client_mean_variance = 0.1;
  double sample_variance = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (clients < 1 || samples_per_client < 1 || dim < 1) {
      throw Error(ErrorCode::kInvalidArgument, "synthetic sizes must be positive");
    }
    if (static_cast<long long>(clients) * samples_per_client >= dim) {
      throw Error(ErrorCode::kInvalidArgument,
                  "synthetic federation must be overparameterized (clients*samples < dim)");
    }
    if (!(beta > 1.0)) throw Error(ErrorCode::kInvalidArgument, "covariance decay beta must be > 1");
    if (!(client_mean_variance >= 0.0) || !(sample_variance >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "variances must be nonnegative");
    }
  }
};

struct FederationInstance {
  std::vector<ClientDataset> clients;
  ParamVector w_star;  // min-norm common interpolant
  SyntheticSpec spec;
  int regeneration_attempts = 0;

  Eigen::Index dim() const { return w_star.size(); }
  int num_clients() const { return static_cast<int>(clients.size()); }

  std::pair<Matrix, ParamVector> stacked() const {
    Eigen::Index rows = 0;
    for (const auto& c : clients) rows += c.num_samples();
    Matrix x(rows, dim());
    ParamVector y(rows);
    Eigen::Index r = 0;
    for (const auto& c : clients) {
      x.middleRows(r, c.num_samples()) = c.inputs();
      y.segment(r, c.num_samples()) = c.targets();
      r += c.num_samples();
    }
    return {std::move(x), std::move(y)};
  }
};

/// Gram condition estimates above this trigger regeneration / an error.
inline constexpr double kMaxGramCondition = 1e12;

/// Min-norm solution of X w = y through (X X^T) lambda = y, w = X^T lambda.
/// Returns nullopt when the Gram system is numerically singular.
inline std::optional<ParamVector> min_norm_solution(const Matrix& x, const ParamVector& y) {
  const Matrix gram = x * x.transpose();
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() * kMaxGramCondition >= 1.0)) {
    return std::nullopt;
  }
  ParamVector lambda = llt.solve(y);
  lambda += llt.solve(y - gram * lambda);
  return ParamVector(x.transpose() * lambda);
}

/// Builds the instance (w_star included) from ready client datasets. Rank
/// deficient stacks (e.g. duplicated clients) fall back to an orthogonal
/// decomposition unless `require_full_rank`; they must still be consistent.
inline FederationInstance make_instance(std::vector<ClientDataset> clients, SyntheticSpec spec,
                                        bool require_full_rank = false) {
  if (clients.empty()) throw Error(ErrorCode::kEmptyInput, "federation has no clients");
  FederationInstance inst{std::move(clients), ParamVector(), spec, 0};
  const Eigen::Index d = inst.clients.front().dim();
  for (const auto& c : inst.clients) {
    if (c.dim() != d) throw Error(ErrorCode::kDimensionMismatch, "client dimensions differ");
  }
  inst.w_star = ParamVector::Zero(d);
  auto [x, y] = inst.stacked();
  auto sol = min_norm_solution(x, y);
  if (!sol && !require_full_rank) {
    ParamVector w = Eigen::CompleteOrthogonalDecomposition<Matrix>(x).solve(y);
    if ((x * w - y).norm() <= 1e-10 * std::max(1.0, y.norm())) sol = std::move(w);
  }
  if (!sol) throw Error(ErrorCode::kSingularSystem, "stacked system is singular or inconsistent");
  inst.w_star = std::move(*sol);
  return inst;
}

namespace detail {

inline std::vector<ClientDataset> draw_clients(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng rng = make_stream(seed, StreamDomain::kData);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = spec.dim;
  ParamVector stddev(d);
  for (int k = 0; k < d; ++k) stddev[k] = std::sqrt(std::pow(static_cast<double>(k + 1), -spec.beta));
  const double mean_sd = std::sqrt(spec.client_mean_variance);
  const double sample_sd = std::sqrt(spec.sample_variance);

  std::vector<ClientDataset> clients;
  clients.reserve(static_cast<std::size_t>(spec.clients));
  for (int i = 0; i < spec.clients; ++i) {
    ParamVector w_i(d);
    for (int k = 0; k < d; ++k) w_i[k] = mean_sd * normal(rng);
    Matrix x(spec.samples_per_client, d);
    ParamVector y(spec.samples_per_client);
    for (int j = 0; j < spec.samples_per_client; ++j) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) {
        const double xk = stddev[k] * normal(rng);
        const double wk = w_i[k] + sample_sd * normal(rng);
        x(j, k) = xk;
        acc += wk * xk;
      }
      y[j] = acc;
    }
    clients.emplace_back(i, std::move(x), std::move(y));
  }
  return clients;
}

}  // namespace detail

/// Draws the federation. If the stacked Gram system is ill-conditioned the
/// draw is repeated with a perturbed seed; the retry count is kept on the instance.
inline FederationInstance generate(const SyntheticSpec& spec, int max_attempts = 8) {
  spec.validate();
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const std::uint64_t seed =
        attempt == 0 ? spec.seed : detail::splitmix64(spec.seed + static_cast<std::uint64_t>(attempt));
    try {
      FederationInstance inst = make_instance(detail::draw_clients(spec, seed), spec, true);
      inst.regeneration_attempts = attempt;
      return inst;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularSystem) throw;
    }
  }
  throw Error(ErrorCode::kSingularSystem, "could not draw a well-conditioned federation");
}

/// Consistent federation with a planted solution and isotropic inputs; total
/// sample count may equal the dimension. Used by the theorem suites.
inline FederationInstance planted_federation(int clients, int samples_per_client, int dim,
                                             std::uint64_t seed) {
  if (static_cast<long long>(clients) * samples_per_client > dim) {
    throw Error(ErrorCode::kInvalidArgument, "planted federation needs clients*samples <= dim");
  }
  Rng rng = make_stream(seed, StreamDomain::kData, {0x91a7ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector planted(dim);
  for (int k = 0; k < dim; ++k) planted[k] = normal(rng);
  std::vector<ClientDataset> out;
  for (int i = 0; i < clients; ++i) {
    Matrix x(samples_per_client, dim);
    for (int j = 0; j < samples_per_client; ++j) {
      for (int k = 0; k < dim; ++k) x(j, k) = normal(rng);
    }
    ParamVector y = x * planted;
    out.emplace_back(i, std::move(x), std::move(y));
  }
  SyntheticSpec spec;
  spec.clients = clients;
  spec.samples_per_client = samples_per_client;
  spec.dim = dim;
  spec.seed = seed;
  return make_instance(std::move(out), spec);
}

/// F(w) = (1/M) sum_i 1/(2 n_i) sum_j (<w, x_j> - y_j)^2
inline double global_loss(const FederationInstance& inst, const ParamVector& w) {
  require_same_dim(w, inst.w_star, "global_loss");
  double acc = 0.0;
  for (const auto& c : inst.clients) acc += c.loss(w);
  return acc / static_cast<double>(inst.clients.size());
}

inline ParamVector global_gradient(const FederationInstance& inst, const ParamVector& w) {
  require_same_dim(w, inst.w_star, "global_gradient");
  ParamVector g = ParamVector::Zero(w.size());
  for (const auto& c : inst.clients) g += c.gradient(w);
  return g / static_cast<double>(inst.clients.size());
}

/// (1/M) sum_i ||grad F_i(w_star)||^2
inline double heterogeneity_at_opt(const FederationInstance& inst) {
  double acc = 0.0;
  for (const auto& c : inst.clients) acc += c.gradient(inst.w_star).squaredNorm();
  return acc / static_cast<double>(inst.clients.size());
}

/// FNV-1a over dimensions and the raw bytes of every matrix and w_star.
inline std::uint64_t instance_hash(const FederationInstance& inst) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto mix_u64 = [&](std::uint64_t v) { mix_bytes(&v, sizeof v); };
  mix_u64(static_cast<std::uint64_t>(inst.clients.size()));
  mix_u64(static_cast<std::uint64_t>(inst.dim()));
  for (const auto& c : inst.clients) {
    mix_u64(static_cast<std::uint64_t>(c.client_id()));
    mix_u64(static_cast<std::uint64_t>(c.num_samples()));
    for (Eigen::Index r = 0; r < c.num_samples(); ++r) {
      for (Eigen::Index k = 0; k < c.dim(); ++k) {
        const double v = c.inputs()(r, k);
        mix_bytes(&v, sizeof v);
      }
    }
    mix_bytes(c.targets().data(), sizeof(double) * static_cast<std::size_t>(c.targets().size()));
  }
  mix_bytes(inst.w_star.data(), sizeof(double) * static_cast<std::size_t>(inst.w_star.size()));
  return h;
}

// Instance file (text, every real printed with 17 significant digits):
//   feddua-instance 1
//   <clients> <dim>
//   per client: "client <id> <n>" then n lines "<x_1> ... <x_d> <y>"
//   "w_star" then one line of d values
inline void write_instance(const FederationInstance& inst, std::ostream& out) {
  out << "feddua-instance 1\n" << inst.num_clients() << ' ' << inst.dim() << '\n';
  out << std::setprecision(17);
  for (const auto& c : inst.clients) {
    out << "client " << c.client_id() << ' ' << c.num_samples() << '\n';
    for (Eigen::Index r = 0; r < c.num_samples(); ++r) {
      for (Eigen::Index k = 0; k < c.dim(); ++k) out << c.inputs()(r, k) << ' ';
      out << c.targets()[r] << '\n';
    }
  }
  out << "w_star\n";
  for (Eigen::Index k = 0; k < inst.dim(); ++k) out << (k ? " " : "") << inst.w_star[k];
  out << '\n';
}

inline FederationInstance read_instance(std::istream& in) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kIo, "instance file: " + what); };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "feddua-instance" || version != 1) fail("bad header");
  int m = 0;
  Eigen::Index d = 0;
  if (!(in >> m >> d) || m < 1 || d < 1) fail("bad dimensions");
  std::vector<ClientDataset> clients;
  for (int i = 0; i < m; ++i) {
    std::string tag;
    int id = 0;
    Eigen::Index n = 0;
    if (!(in >> tag >> id >> n) || tag != "client" || n < 1) fail("bad client header");
    Matrix x(n, d);
    ParamVector y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index k = 0; k < d; ++k) {
        if (!(in >> x(r, k))) fail("truncated client rows");
      }
      if (!(in >> y[r])) fail("truncated client rows");
    }
    clients.emplace_back(id, std::move(x), std::move(y));
  }
  std::string tag;
  if (!(in >> tag) || tag != "w_star") fail("missing w_star");
  ParamVector w_star(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    if (!(in >> w_star[k])) fail("truncated w_star");
  }
  SyntheticSpec spec;
  spec.clients = m;
  spec.dim = static_cast<int>(d);
  spec.samples_per_client = static_cast<int>(clients.front().num_samples());
  return FederationInstance{std::move(clients), std::move(w_star), spec, 0};
}

inline void save_instance(const FederationInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_instance(inst, out);
}

inline FederationInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_instance(in);
}

}  // namespace feddua

#endif  // FEDDUA_SYNTHETIC_DATA_HPP
