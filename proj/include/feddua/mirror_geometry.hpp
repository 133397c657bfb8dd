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

#ifndef FEDDUA_MIRROR_GEOMETRY_HPP
#define FEDDUA_MIRROR_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>

#include "feddua/error.hpp"
#include "feddua/vector_core.hpp"

namespace feddua {

/// psi(x) = 1/2 x^T G x with diagonal G.
struct QuadraticGenerator {
  DiagPreconditioner g;
};

/// A general smooth strongly convex psi supplied through callbacks. The
/// conjugate gradient is the inverse of the forward map; both are kept so a
/// generator can be checked for self-consistency.
struct CustomGenerator {
  std::string name;
  std::function<double(const ParamVector&)> potential;             // psi
  std::function<ParamVector(const ParamVector&)> forward;          // grad psi
  std::function<ParamVector(const ParamVector&)> inverse;          // (grad psi)^{-1}
  std::function<double(const ParamVector&)> conjugate;             // phi
  std::function<ParamVector(const ParamVector&)> conjugate_gradient;  // grad phi
  double strong_convexity = 0.0;                                    // alpha
};

class DistanceGenerator {
 public:
  static DistanceGenerator quadratic(DiagPreconditioner g) {
    return DistanceGenerator(QuadraticGenerator{std::move(g)});
  }

  static DistanceGenerator custom(CustomGenerator gen) {
    if (!(gen.strong_convexity > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "strong-convexity constant must be positive");
    }
    if (!gen.potential || !gen.forward || !gen.inverse || !gen.conjugate ||
        !gen.conjugate_gradient) {
      throw Error(ErrorCode::kInvalidArgument, "custom generator is missing a callback");
    }
    return DistanceGenerator(std::move(gen));
  }

  bool is_quadratic() const noexcept {
    return std::holds_alternative<QuadraticGenerator>(kind_);
  }
  const QuadraticGenerator* as_quadratic() const noexcept {
    return std::get_if<QuadraticGenerator>(&kind_);
  }
  const CustomGenerator* as_custom() const noexcept {
    return std::get_if<CustomGenerator>(&kind_);
  }

  double strong_convexity() const {
    if (const auto* q = as_quadratic()) return q->g.diag().minCoeff();
    return as_custom()->strong_convexity;
  }

 private:
  explicit DistanceGenerator(std::variant<QuadraticGenerator, CustomGenerator> kind)
      : kind_(std::move(kind)) {}

  std::variant<QuadraticGenerator, CustomGenerator> kind_;
};

/// psi(w) = sum_k a_k cosh(w_k). Forward map a*sinh(w), inverse asinh(theta/a),
/// conjugate phi(theta) = sum_k theta_k asinh(theta_k/a_k) - sqrt(a_k^2 + theta_k^2).
inline DistanceGenerator cosh_generator(ParamVector scales) {
  require_finite(scales, "cosh scales");
  for (Eigen::Index k = 0; k < scales.size(); ++k) {
    if (!(scales[k] > 0.0)) {
      throw Error(ErrorCode::kDomain, "cosh scales must be positive", static_cast<std::size_t>(k));
    }
  }
  auto a = std::make_shared<const ParamVector>(std::move(scales));
  auto check = [a](const ParamVector& x) { require_same_dim(x, *a, "cosh generator"); };
  CustomGenerator gen;
  gen.name = "cosh";
  gen.potential = [a, check](const ParamVector& w) {
    check(w);
    double acc = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) acc += (*a)[k] * std::cosh(w[k]);
    return acc;
  };
  gen.forward = [a, check](const ParamVector& w) {
    check(w);
    ParamVector out(w.size());
    for (Eigen::Index k = 0; k < w.size(); ++k) out[k] = (*a)[k] * std::sinh(w[k]);
    return out;
  };
  auto inv = [a, check](const ParamVector& theta) {
    check(theta);
    ParamVector out(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) out[k] = std::asinh(theta[k] / (*a)[k]);
    return out;
  };
  gen.inverse = inv;
  gen.conjugate_gradient = inv;
  gen.conjugate = [a, check](const ParamVector& theta) {
    check(theta);
    double acc = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double ak = (*a)[k];
      acc += theta[k] * std::asinh(theta[k] / ak) - std::hypot(ak, theta[k]);
    }
    return acc;
  };
  gen.strong_convexity = a->minCoeff();
  return DistanceGenerator::custom(std::move(gen));
}

inline DistanceGenerator cosh_generator(Eigen::Index d) {
  return cosh_generator(ParamVector::Ones(d));
}

namespace detail {

inline ParamVector checked(ParamVector out, const char* what) {
  require_finite(out, what);
  return out;
}

}  // namespace detail

/// psi(w)
inline double potential(const DistanceGenerator& gen, const ParamVector& w) {
  if (const auto* q = gen.as_quadratic()) return 0.5 * weighted_norm_sq(w, q->g, false);
  return gen.as_custom()->potential(w);
}

/// phi(theta), the convex conjugate of psi.
inline double conjugate(const DistanceGenerator& gen, const ParamVector& theta) {
  if (const auto* q = gen.as_quadratic()) return 0.5 * weighted_norm_sq(theta, q->g, true);
  return gen.as_custom()->conjugate(theta);
}

inline ParamVector mirror_map(const DistanceGenerator& gen, const ParamVector& w) {
  require_finite(w, "mirror_map input");
  if (const auto* q = gen.as_quadratic()) return detail::checked(q->g.apply(w), "mirror_map output");
  return detail::checked(gen.as_custom()->forward(w), "mirror_map output");
}

inline ParamVector inverse_mirror_map(const DistanceGenerator& gen, const ParamVector& theta) {
  require_finite(theta, "inverse_mirror_map input");
  if (const auto* q = gen.as_quadratic()) {
    return detail::checked(q->g.apply_inverse(theta), "inverse_mirror_map output");
  }
  return detail::checked(gen.as_custom()->inverse(theta), "inverse_mirror_map output");
}

/// grad phi(theta)
inline ParamVector conjugate_gradient(const DistanceGenerator& gen, const ParamVector& theta) {
  require_finite(theta, "conjugate_gradient input");
  if (const auto* q = gen.as_quadratic()) {
    return detail::checked(q->g.apply_inverse(theta), "conjugate_gradient output");
  }
  return detail::checked(gen.as_custom()->conjugate_gradient(theta), "conjugate_gradient output");
}

/// D_psi(x | y) = psi(x) - psi(y) - <grad psi(y), x - y>.
inline double bregman(const DistanceGenerator& gen, const ParamVector& x, const ParamVector& y) {
  require_same_dim(x, y, "bregman");
  if (const auto* q = gen.as_quadratic()) {
    ParamVector diff = x - y;
    return 0.5 * weighted_norm_sq(diff, q->g, false);
  }
  const auto& c = *gen.as_custom();
  const double value = c.potential(x) - c.potential(y) - dot(c.forward(y), x - y);
  return std::max(0.0, value);
}

/// D_phi(x | y) on the dual side.
inline double dual_bregman(const DistanceGenerator& gen, const ParamVector& x,
                           const ParamVector& y) {
  require_same_dim(x, y, "dual_bregman");
  if (const auto* q = gen.as_quadratic()) {
    ParamVector diff = x - y;
    return 0.5 * weighted_norm_sq(diff, q->g, true);
  }
  const auto& c = *gen.as_custom();
  const double value = c.conjugate(x) - c.conjugate(y) - dot(c.conjugate_gradient(y), x - y);
  return std::max(0.0, value);
}

/// h(eta) = d/d eta phi(theta + eta v) - <v, w>. Strictly increasing in eta for v != 0.
inline double h_eval(const DistanceGenerator& gen, const ParamVector& theta, const ParamVector& w,
                     const ParamVector& v, double eta) {
  require_same_dim(theta, v, "h_eval");
  require_same_dim(w, v, "h_eval");
  require_finite(v, "h_eval direction");
  if (const auto* q = gen.as_quadratic()) return eta * weighted_norm_sq(v, q->g, true);
  ParamVector probe = theta + eta * v;
  return dot(gen.as_custom()->conjugate_gradient(probe), v) - dot(v, w);
}

struct BisectionOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-9;
  int max_doublings = 1024;
  int max_iterations = 2000;
};

/// Root of h(eta) = m on eta >= 0 by bracketed bisection. Used for every
/// custom generator; callable on quadratic ones to cross-check the closed form.
/// Only points with m - tol <= h(eta) <= m are accepted, so the result never
/// overshoots the root.
inline double h_inverse_bisection(const DistanceGenerator& gen, const ParamVector& theta,
                                  const ParamVector& w, const ParamVector& v, double m,
                                  const BisectionOptions& opt = {}) {
  if (!(m >= 0.0) || !std::isfinite(m)) {
    throw Error(ErrorCode::kDomain, "h_inverse target must be finite and nonnegative");
  }
  if (norm_sq(v) == 0.0) throw Error(ErrorCode::kDegenerateDirection, "v = 0");
  const double tol = opt.abs_tol + opt.rel_tol * m;
  auto h = [&](double eta) { return h_eval(gen, theta, w, v, eta); };
  if (m <= tol) return 0.0;

  double lo = 0.0;
  double hi = 1.0;
  int doublings = 0;
  double h_hi = h(hi);
  while (h_hi < m) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > opt.max_doublings || !std::isfinite(hi)) {
      throw Error(ErrorCode::kDivergence, "h_inverse bracket expansion did not terminate");
    }
    h_hi = h(hi);
    if (!std::isfinite(h_hi)) {
      throw Error(ErrorCode::kDivergence, "h became non-finite while bracketing");
    }
  }
  if (h_hi <= m) return hi;

  for (int it = 0; it < opt.max_iterations; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) return lo;
    const double h_mid = h(mid);
    if (h_mid <= m && m - h_mid <= tol) return mid;
    if (h_mid < m) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

/// eta with h(eta) = m. Closed form m / ||v||^2_{G^{-1}} for quadratic generators.
inline double h_inverse(const DistanceGenerator& gen, const ParamVector& theta,
                        const ParamVector& w, const ParamVector& v, double m,
                        const BisectionOptions& opt = {}) {
  if (!(m >= 0.0) || !std::isfinite(m)) {
    throw Error(ErrorCode::kDomain, "h_inverse target must be finite and nonnegative");
  }
  if (const auto* q = gen.as_quadratic()) {
    const double denom = weighted_norm_sq(v, q->g, true);
    if (denom == 0.0) throw Error(ErrorCode::kDegenerateDirection, "v = 0");
    return m / denom;
  }
  return h_inverse_bisection(gen, theta, w, v, m, opt);
}

}  // namespace feddua

#endif  // FEDDUA_MIRROR_GEOMETRY_HPP
