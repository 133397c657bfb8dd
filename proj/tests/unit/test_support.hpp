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

#ifndef FEDDUA_TESTS_TEST_SUPPORT_HPP
#define FEDDUA_TESTS_TEST_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "feddua/feddua.hpp"

namespace feddua::testing {

inline ParamVector vec(std::initializer_list<double> xs) {
  ParamVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

inline ParamVector random_vec(std::mt19937_64& rng, Eigen::Index d, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  ParamVector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v[k] = n(rng);
  return v;
}

inline ParamVector random_positive(std::mt19937_64& rng, Eigen::Index d) {
  std::uniform_real_distribution<double> u(0.2, 5.0);
  ParamVector v(d);
  for (Eigen::Index k = 0; k < d; ++k) v[k] = u(rng);
  return v;
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline double max_rel_err(const ParamVector& a, const ParamVector& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale == 0.0 ? 0.0 : (a - b).cwiseAbs().maxCoeff() / scale;
}

inline ClientUpdate update(ParamVector delta, int id = 0) {
  return make_update(std::move(delta), id, 1);
}

/// Two clients, constraints w1 = 1 and w2 = 1, so w* = (1, 1).
inline FederationInstance two_hyperplanes() {
  std::vector<ClientDataset> clients;
  Matrix x0(1, 2);
  x0 << 1.0, 0.0;
  Matrix x1(1, 2);
  x1 << 0.0, 1.0;
  clients.emplace_back(0, x0, vec({1.0}));
  clients.emplace_back(1, x1, vec({1.0}));
  SyntheticSpec spec;
  spec.clients = 2;
  spec.samples_per_client = 1;
  spec.dim = 2;
  return make_instance(std::move(clients), spec);
}

inline OptimizerConfig optimizer(Family f) {
  OptimizerConfig c;
  c.family = f;
  return c;
}

}  // namespace feddua::testing

#endif  // FEDDUA_TESTS_TEST_SUPPORT_HPP
