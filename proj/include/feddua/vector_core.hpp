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

#ifndef FEDDUA_VECTOR_CORE_HPP
#define FEDDUA_VECTOR_CORE_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "feddua/error.hpp"

namespace feddua {

/// Dense model-space vector: weights, updates, dual variables.
using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline ParamVector zeros(Eigen::Index d) { return ParamVector::Zero(d); }

inline void require_finite(const ParamVector& x, const std::string& what) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k])) {
      throw Error(ErrorCode::kNonFinite, what, static_cast<std::size_t>(k));
    }
  }
}

inline void require_same_dim(const ParamVector& a, const ParamVector& b,
                             const std::string& what) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                what + ": " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

/// Diagonal of a positive-definite preconditioner G. Every entry is > 0.
class DiagPreconditioner {
 public:
  explicit DiagPreconditioner(ParamVector diag) : diag_(std::move(diag)) {
    require_finite(diag_, "preconditioner diagonal");
    for (Eigen::Index k = 0; k < diag_.size(); ++k) {
      if (!(diag_[k] > 0.0)) {
        throw Error(ErrorCode::kDegeneratePreconditioner,
                    "preconditioner entries must be strictly positive",
                    static_cast<std::size_t>(k));
      }
    }
  }

  static DiagPreconditioner identity(Eigen::Index d) {
    return DiagPreconditioner(ParamVector::Ones(d));
  }

  /// G = diag(sqrt(s) + eps), the order in which the adaptive optimizers build it.
  static DiagPreconditioner from_accumulator(const ParamVector& s, double eps) {
    ParamVector diag(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (s[k] < 0.0) {
        throw Error(ErrorCode::kDomain, "accumulator entry is negative",
                    static_cast<std::size_t>(k));
      }
      diag[k] = std::sqrt(s[k]) + eps;
    }
    return DiagPreconditioner(std::move(diag));
  }

  const ParamVector& diag() const noexcept { return diag_; }
  Eigen::Index size() const noexcept { return diag_.size(); }
  double operator[](Eigen::Index k) const { return diag_[k]; }

  /// G^{-1} x
  ParamVector apply_inverse(const ParamVector& x) const {
    require_same_dim(x, diag_, "apply_inverse");
    return x.cwiseQuotient(diag_);
  }

  /// G x
  ParamVector apply(const ParamVector& x) const {
    require_same_dim(x, diag_, "apply");
    return x.cwiseProduct(diag_);
  }

  double trace() const {
    double t = 0.0;
    for (Eigen::Index k = 0; k < diag_.size(); ++k) t += diag_[k];
    return t;
  }

 private:
  ParamVector diag_;
};

inline double dot(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "dot");
  double acc = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

inline double norm_sq(const ParamVector& x) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) acc += x[k] * x[k];
  return acc;
}

/// ||x||_G^2 = sum g_k x_k^2, or ||x||_{G^{-1}}^2 = sum x_k^2 / g_k when `inverse`.
inline double weighted_norm_sq(const ParamVector& x, const DiagPreconditioner& g,
                               bool inverse) {
  require_same_dim(x, g.diag(), "weighted_norm_sq");
  require_finite(x, "weighted_norm_sq input");
  const ParamVector& diag = g.diag();
  double acc = 0.0;
  if (inverse) {
    for (Eigen::Index k = 0; k < x.size(); ++k) acc += x[k] * x[k] / diag[k];
  } else {
    for (Eigen::Index k = 0; k < x.size(); ++k) acc += diag[k] * x[k] * x[k];
  }
  return acc;
}

enum class ElementwiseOp { kSquare, kSqrt, kAddScalar, kReciprocal };

inline ParamVector elementwise(ElementwiseOp op, const ParamVector& x, double scalar = 0.0) {
  require_finite(x, "elementwise input");
  ParamVector out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    switch (op) {
      case ElementwiseOp::kSquare:
        out[k] = xk * xk;
        break;
      case ElementwiseOp::kSqrt:
        if (xk < 0.0) {
          throw Error(ErrorCode::kDomain, "sqrt of negative entry", static_cast<std::size_t>(k));
        }
        out[k] = std::sqrt(xk);
        break;
      case ElementwiseOp::kAddScalar:
        out[k] = xk + scalar;
        break;
      case ElementwiseOp::kReciprocal:
        if (xk == 0.0) {
          throw Error(ErrorCode::kDomain, "reciprocal of zero entry", static_cast<std::size_t>(k));
        }
        out[k] = 1.0 / xk;
        break;
    }
  }
  return out;
}

/// Mean of the updates, summed left to right in the order given. Callers pass
/// updates sorted by ascending client id so the reduction order is fixed.
inline ParamVector axpy_mean(std::span<const ParamVector> updates) {
  if (updates.empty()) throw Error(ErrorCode::kEmptyInput, "axpy_mean of no updates");
  const Eigen::Index d = updates.front().size();
  ParamVector sum = ParamVector::Zero(d);
  for (const ParamVector& u : updates) {
    require_same_dim(u, sum, "axpy_mean");
    require_finite(u, "axpy_mean input");
    for (Eigen::Index k = 0; k < d; ++k) sum[k] += u[k];
  }
  const double n = static_cast<double>(updates.size());
  for (Eigen::Index k = 0; k < d; ++k) sum[k] /= n;
  return sum;
}

}  // namespace feddua

#endif  // FEDDUA_VECTOR_CORE_HPP
