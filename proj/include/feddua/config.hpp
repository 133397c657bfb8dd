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

#ifndef FEDDUA_CONFIG_HPP
#define FEDDUA_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "feddua/error.hpp"
#include "feddua/global_optimizers.hpp"
#include "feddua/local_training.hpp"
#include "feddua/simulation.hpp"
#include "feddua/synthetic_data.hpp"
#include "feddua/theorem_oracles.hpp"

namespace feddua {

using Json = nlohmann::json;

enum class DatasetKind { kSynthetic, kPlanted, kFile };
enum class SeedMode { kRun, kRunAndData };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kSynthetic;
  SyntheticSpec synthetic;  // sizes and seed also drive the planted kind
  std::string path;         // file kind
};

struct OutputConfig {
  std::optional<std::string> dir;  // falls back to FEDDUA_OUT, then ./feddua-out
  std::string name = "trace";
};

struct SweepConfig {
  std::vector<std::pair<std::string, std::vector<Json>>> grid;  // in document order
  std::vector<std::uint64_t> seeds{0};
  SeedMode seed_mode = SeedMode::kRun;
  std::size_t window = 5;
};

struct VerifyConfig {
  std::vector<std::string> theorems;
  SuiteConfig suite;
};

/// A fully parsed experiment file plus the merged document it came from.
struct Experiment {
  DatasetConfig dataset;
  RunConfig run;
  std::optional<int> clients_per_round;  // unset = full participation
  OutputConfig output;
  SweepConfig sweep;
  VerifyConfig verify;
  Json document;
};

inline const std::vector<std::string>& known_theorems() {
  static const std::vector<std::string> names{"lower-bound", "lower-bound-momentum", "minimax",
                                              "duality"};
  return names;
}

/// Every accepted key with its default. Keys absent here are rejected.
inline Json default_document() {
  return Json{
      {"dataset",
       {{"kind", "synthetic"},
        {"clients", 20},
        {"samples_per_client", 30},
        {"dim", 1000},
        {"beta", 1.1},
        {"client_mean_variance", 0.1},
        {"sample_variance", 1.0},
        {"seed", 0},
        {"path", ""}}},
      {"run",
       {{"rounds", 500},
        {"clients_per_round", nullptr},
        {"seed", 0},
        {"eval", "avg-last-two"},
        {"record_wall_time", false},
        {"divergence_threshold", 1e12}}},
      {"local",
       {{"strategy", "sgd"}, {"lr", 0.01}, {"steps", 20}, {"batch_size", nullptr}, {"mu", 0.0}}},
      {"optimizer",
       {{"family", "fedduadagrad"},
        {"eta_g", 1.0},
        {"eps", 0.0},
        {"eps_g", 0.0},
        {"beta1", 0.9},
        {"beta2", 0.99},
        {"preconditioner", "adaptive"},
        {"generic", {{"geometry", "quadratic"}, {"momentum", false}}}}},
      {"output", {{"dir", nullptr}, {"name", "trace"}}},
      {"sweep",
       {{"grid", Json::object()}, {"seeds", {0}}, {"seed_mode", "run"}, {"window", 5}}},
      {"verify",
       {{"generator", "quadratic"},
        {"theorems", known_theorems()},
        {"instances", 100},
        {"rounds", 50},
        {"seed", 0},
        {"dims", {10, 50}},
        {"clients", {2, 5, 10}},
        {"beta1", {0.5, 0.9}},
        {"grid_points", 10000}}},
  };
}

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kConfig, (path.empty() ? std::string("<root>") : path) + ": " + what);
}

inline std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

// Free-form maps whose keys are not part of the schema.
inline bool is_free_map(const std::string& path) { return path == "sweep.grid"; }

inline void overlay(Json& base, const Json& patch, const std::string& path) {
  if (!patch.is_object()) config_fail(path, "expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key_path = join_path(path, it.key());
    if (!base.contains(it.key())) config_fail(key_path, "unknown key");
    Json& slot = base[it.key()];
    if (slot.is_object() && !is_free_map(key_path)) {
      overlay(slot, it.value(), key_path);
    } else {
      slot = it.value();
    }
  }
}

inline double get_real(const Json& j, const std::string& path) {
  if (!j.is_number()) config_fail(path, "expected a number");
  return j.get<double>();
}

inline int get_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) config_fail(path, "expected an integer");
  const auto v = j.get<long long>();
  if (v < INT32_MIN || v > INT32_MAX) config_fail(path, "integer out of range");
  return static_cast<int>(v);
}

inline std::uint64_t get_seed(const Json& j, const std::string& path) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<long long>() < 0)) {
    config_fail(path, "expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

inline bool get_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) config_fail(path, "expected true or false");
  return j.get<bool>();
}

inline std::string get_string(const Json& j, const std::string& path) {
  if (!j.is_string()) config_fail(path, "expected a string");
  return j.get<std::string>();
}

template <typename E>
E get_enum(const Json& j, const std::string& path,
           std::initializer_list<std::pair<std::string_view, E>> table) {
  const std::string s = get_string(j, path);
  std::string options;
  for (const auto& [name, value] : table) {
    if (s == name) return value;
    options += (options.empty() ? "" : "|") + std::string(name);
  }
  config_fail(path, "expected one of " + options + ", got '" + s + "'");
}

template <typename T, typename F>
std::vector<T> get_list(const Json& j, const std::string& path, F&& one) {
  if (!j.is_array()) config_fail(path, "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(one(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

// Library-level validation failures become config errors naming the section.
template <typename F>
void validate_section(const std::string& section, F&& check) {
  try {
    check();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument || e.code() == ErrorCode::kDomain) {
      config_fail(section, e.what());
    }
    throw;
  }
}

}  // namespace detail

/// Parses a value given on the command line: JSON if it parses, else a bare string.
inline Json parse_override_value(const std::string& text) {
  Json v = Json::parse(text, nullptr, false);
  if (v.is_discarded()) return Json(text);
  return v;
}

/// Sets a dotted path in a merged document. The path must already exist.
inline void set_path(Json& doc, const std::string& dotted, const Json& value) {
  if (dotted.empty()) detail::config_fail(dotted, "empty key");
  Json* node = &doc;
  std::string walked;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    walked = detail::join_path(walked, key);
    if (!node->is_object() || !node->contains(key)) detail::config_fail(walked, "unknown key");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    if (detail::is_free_map(walked)) {
      detail::config_fail(walked, "set the whole map, not one entry");
    }
    start = dot + 1;
  }
  *node = value;
}

/// Applies "key=value" overrides in order; later ones win.
inline void apply_overrides(Json& doc, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      detail::config_fail(item, "override must look like key=value");
    }
    set_path(doc, item.substr(0, eq), parse_override_value(item.substr(eq + 1)));
  }
}

/// Defaults overlaid with the user's document. Unknown keys are rejected.
inline Json merge_document(const Json& user) {
  Json doc = default_document();
  if (!user.is_null()) detail::overlay(doc, user, "");
  return doc;
}

inline Experiment parse_experiment(const Json& doc) {
  using namespace detail;
  Experiment ex;
  ex.document = doc;

  // dataset
  {
    const Json& d = doc.at("dataset");
    ex.dataset.kind = get_enum<DatasetKind>(d.at("kind"), "dataset.kind",
                                            {{"synthetic", DatasetKind::kSynthetic},
                                             {"planted", DatasetKind::kPlanted},
                                             {"file", DatasetKind::kFile}});
    auto& s = ex.dataset.synthetic;
    s.clients = get_int(d.at("clients"), "dataset.clients");
    s.samples_per_client = get_int(d.at("samples_per_client"), "dataset.samples_per_client");
    s.dim = get_int(d.at("dim"), "dataset.dim");
    s.beta = get_real(d.at("beta"), "dataset.beta");
    s.client_mean_variance = get_real(d.at("client_mean_variance"), "dataset.client_mean_variance");
    s.sample_variance = get_real(d.at("sample_variance"), "dataset.sample_variance");
    s.seed = get_seed(d.at("seed"), "dataset.seed");
    ex.dataset.path = get_string(d.at("path"), "dataset.path");
    if (ex.dataset.kind == DatasetKind::kSynthetic) validate_section("dataset", [&] { s.validate(); });
    if (ex.dataset.kind == DatasetKind::kPlanted &&
        (s.clients < 1 || s.samples_per_client < 1 ||
         static_cast<long long>(s.clients) * s.samples_per_client > s.dim)) {
      config_fail("dataset", "planted federations need 1 <= clients*samples_per_client <= dim");
    }
    if (ex.dataset.kind == DatasetKind::kFile && ex.dataset.path.empty()) {
      config_fail("dataset.path", "required when dataset.kind is file");
    }
  }

  // run
  {
    const Json& r = doc.at("run");
    ex.run.rounds = get_int(r.at("rounds"), "run.rounds");
    if (!r.at("clients_per_round").is_null()) {
      ex.clients_per_round = get_int(r.at("clients_per_round"), "run.clients_per_round");
    }
    ex.run.seed = get_seed(r.at("seed"), "run.seed");
    ex.run.eval = get_enum<EvalMode>(r.at("eval"), "run.eval",
                                     {{"last-iterate", EvalMode::kLastIterate},
                                      {"avg-last-two", EvalMode::kAvgLastTwo}});
    ex.run.record_wall_time = get_bool(r.at("record_wall_time"), "run.record_wall_time");
    ex.run.divergence_threshold = get_real(r.at("divergence_threshold"), "run.divergence_threshold");
    if (ex.run.rounds < 1) config_fail("run.rounds", "must be >= 1");
  }

  // local
  {
    const Json& l = doc.at("local");
    auto& lc = ex.run.local;
    lc.strategy = get_enum<LocalStrategy>(l.at("strategy"), "local.strategy",
                                          {{"sgd", LocalStrategy::kSgd},
                                           {"exact-projection", LocalStrategy::kExactProjection},
                                           {"fedprox", LocalStrategy::kFedProx},
                                           {"scaffold", LocalStrategy::kScaffold}});
    lc.lr = get_real(l.at("lr"), "local.lr");
    lc.steps = get_int(l.at("steps"), "local.steps");
    if (!l.at("batch_size").is_null()) lc.batch_size = get_int(l.at("batch_size"), "local.batch_size");
    lc.mu = get_real(l.at("mu"), "local.mu");
    validate_section("local", [&] { lc.validate(); });
  }

  // optimizer
  {
    const Json& o = doc.at("optimizer");
    auto& oc = ex.run.optimizer;
    const std::string fam = get_string(o.at("family"), "optimizer.family");
    const auto parsed = parse_family(fam);
    if (!parsed) {
      std::string options;
      for (const auto& [f, name] : kFamilyNames) options += (options.empty() ? "" : "|") + std::string(name);
      config_fail("optimizer.family", "expected one of " + options + ", got '" + fam + "'");
    }
    oc.family = *parsed;
    oc.eta_g = get_real(o.at("eta_g"), "optimizer.eta_g");
    oc.eps = get_real(o.at("eps"), "optimizer.eps");
    oc.eps_g = get_real(o.at("eps_g"), "optimizer.eps_g");
    oc.beta1 = get_real(o.at("beta1"), "optimizer.beta1");
    oc.beta2 = get_real(o.at("beta2"), "optimizer.beta2");
    if (!(oc.beta1 >= 0.0 && oc.beta1 < 1.0)) config_fail("optimizer.beta1", "must lie in [0, 1)");
    if (!(oc.beta2 >= 0.0 && oc.beta2 < 1.0)) config_fail("optimizer.beta2", "must lie in [0, 1)");
    oc.identity_preconditioner =
        get_enum<bool>(o.at("preconditioner"), "optimizer.preconditioner",
                       {{"adaptive", false}, {"identity", true}});
    const Json& g = o.at("generic");
    if (!g.is_object()) config_fail("optimizer.generic", "expected an object");
    oc.generic.geometry = get_enum<GenericGeometry>(
        g.at("geometry"), "optimizer.generic.geometry",
        {{"quadratic", GenericGeometry::kQuadratic}, {"cosh", GenericGeometry::kCosh}});
    oc.generic.momentum = get_bool(g.at("momentum"), "optimizer.generic.momentum");
    validate_section("optimizer", [&] { oc.validate(); });
  }

  // output
  {
    const Json& o = doc.at("output");
    if (!o.at("dir").is_null()) ex.output.dir = get_string(o.at("dir"), "output.dir");
    ex.output.name = get_string(o.at("name"), "output.name");
    if (ex.output.name.empty() || ex.output.name.find('/') != std::string::npos) {
      config_fail("output.name", "must be a nonempty file stem");
    }
  }

  // sweep
  {
    const Json& s = doc.at("sweep");
    const Json& grid = s.at("grid");
    if (!grid.is_object()) config_fail("sweep.grid", "expected an object of path -> list");
    for (auto it = grid.begin(); it != grid.end(); ++it) {
      const std::string path = "sweep.grid." + it.key();
      if (!it.value().is_array() || it.value().empty()) config_fail(path, "expected a nonempty list");
      if (it.key().rfind("sweep.", 0) == 0 || it.key().rfind("verify.", 0) == 0 ||
          it.key().rfind("output.", 0) == 0) {
        config_fail(path, "only dataset, run, local and optimizer keys can be swept");
      }
      // The path must name a real key.
      Json probe = doc;
      set_path(probe, it.key(), it.value().front());
      ex.sweep.grid.emplace_back(it.key(), std::vector<Json>(it.value().begin(), it.value().end()));
    }
    ex.sweep.seeds = get_list<std::uint64_t>(s.at("seeds"), "sweep.seeds",
                                             [](const Json& j, const std::string& p) { return get_seed(j, p); });
    if (ex.sweep.seeds.empty()) config_fail("sweep.seeds", "expected at least one seed");
    ex.sweep.seed_mode = get_enum<SeedMode>(s.at("seed_mode"), "sweep.seed_mode",
                                            {{"run", SeedMode::kRun}, {"run-and-data", SeedMode::kRunAndData}});
    const int window = get_int(s.at("window"), "sweep.window");
    if (window < 1) config_fail("sweep.window", "must be >= 1");
    ex.sweep.window = static_cast<std::size_t>(window);
  }

  // verify
  {
    const Json& v = doc.at("verify");
    auto& sc = ex.verify.suite;
    sc.family = get_enum<GeneratorFamily>(v.at("generator"), "verify.generator",
                                          {{"quadratic", GeneratorFamily::kQuadratic},
                                           {"cosh", GeneratorFamily::kCosh}});
    ex.verify.theorems = get_list<std::string>(
        v.at("theorems"), "verify.theorems", [](const Json& j, const std::string& p) {
          const std::string name = get_string(j, p);
          for (const auto& known : known_theorems()) {
            if (name == known) return name;
          }
          config_fail(p, "unknown theorem '" + name + "'");
        });
    if (ex.verify.theorems.empty()) config_fail("verify.theorems", "expected at least one theorem");
    sc.instances = get_int(v.at("instances"), "verify.instances");
    sc.rounds = get_int(v.at("rounds"), "verify.rounds");
    sc.seed = get_seed(v.at("seed"), "verify.seed");
    auto as_int = [](const Json& j, const std::string& p) { return get_int(j, p); };
    sc.dims = get_list<int>(v.at("dims"), "verify.dims", as_int);
    sc.clients = get_list<int>(v.at("clients"), "verify.clients", as_int);
    sc.beta1s = get_list<double>(v.at("beta1"), "verify.beta1",
                                 [](const Json& j, const std::string& p) { return get_real(j, p); });
    sc.grid_points = get_int(v.at("grid_points"), "verify.grid_points");
    if (sc.instances < 1 || sc.rounds < 1) config_fail("verify", "instances and rounds must be >= 1");
    if (sc.dims.empty() || sc.clients.empty() || sc.beta1s.empty()) {
      config_fail("verify", "dims, clients and beta1 must be nonempty");
    }
    for (int d : sc.dims) {
      if (d < 1) config_fail("verify.dims", "dimensions must be positive");
      for (int m : sc.clients) {
        if (m < 1 || m > d) config_fail("verify.clients", "need 1 <= clients <= every dim");
      }
    }
    for (double b : sc.beta1s) {
      if (!(b >= 0.0 && b < 1.0)) config_fail("verify.beta1", "values must lie in [0, 1)");
    }
    if (sc.grid_points < 3) config_fail("verify.grid_points", "must be >= 3");
  }
  return ex;
}

/// Reads a JSON experiment file. Parse errors keep the parser's line/column text.
inline Json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
}

/// File (optional) + overrides -> validated experiment.
inline Experiment load_experiment(const std::optional<std::string>& path,
                                  const std::vector<std::string>& overrides = {}) {
  Json doc = merge_document(path ? read_document(*path) : Json());
  apply_overrides(doc, overrides);
  return parse_experiment(doc);
}

inline FederationInstance build_instance(const DatasetConfig& cfg) {
  const auto& s = cfg.synthetic;
  switch (cfg.kind) {
    case DatasetKind::kSynthetic:
      return generate(s);
    case DatasetKind::kPlanted:
      return planted_federation(s.clients, s.samples_per_client, s.dim, s.seed);
    case DatasetKind::kFile:
      return load_instance(cfg.path);
  }
  throw Error(ErrorCode::kConfig, "unknown dataset kind");
}

/// RunConfig with participation resolved against the instance.
inline RunConfig resolve_run(const Experiment& ex, const FederationInstance& inst) {
  RunConfig cfg = ex.run;
  cfg.clients_per_round = ex.clients_per_round.value_or(inst.num_clients());
  try {
    cfg.validate(inst.num_clients());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) detail::config_fail("run", e.what());
    throw;
  }
  return cfg;
}

}  // namespace feddua

#endif  // FEDDUA_CONFIG_HPP
