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

#ifndef FEDDUA_FEDDUA_HPP
#define FEDDUA_FEDDUA_HPP

// Umbrella header. The JSON-based layers (config, sweep, reporting) are
// separate includes so the numerical core stays free of that dependency.

#include "feddua/error.hpp"
#include "feddua/global_optimizers.hpp"
#include "feddua/local_training.hpp"
#include "feddua/mirror_geometry.hpp"
#include "feddua/rng.hpp"
#include "feddua/simulation.hpp"
#include "feddua/synthetic_data.hpp"
#include "feddua/theorem_oracles.hpp"
#include "feddua/vector_core.hpp"
#include "feddua/version.hpp"

#endif  // FEDDUA_FEDDUA_HPP
