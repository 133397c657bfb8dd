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

#ifndef FEDDUA_SWEEP_HPP
#define FEDDUA_SWEEP_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "feddua/config.hpp"
#include "feddua/error.hpp"
#include "feddua/simulation.hpp"
#include "feddua/synthetic_data.hpp"
#include "feddua/version.hpp"

namespace feddua {

using Assignment = std::vector<std::pair<std::string, Json>>;

struct SweepCell {
  Assignment assignment;
  std::vector<double> losses;  // final-window loss per seed
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stdev = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
  std::string hash;
  bool from_cache = false;
};

struct SweepReport {
  std::vector<std::uint64_t> seeds;
  std::vector<SweepCell> cells;
  std::optional<std::size_t> best;  // lowest mean among finished cells
};

struct SweepOptions {
  int threads = 1;
  std::optional<std::filesystem::path> cache_dir;  // completed cells persist here
  std::function<void(std::size_t, const SweepCell&)> on_cell;  // called under a lock
};

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double sample_stdev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

/// Cartesian product of the grid; the last key varies fastest.
inline std::vector<Assignment> expand_grid(
    const std::vector<std::pair<std::string, std::vector<Json>>>& grid) {
  std::vector<Assignment> out{Assignment{}};
  for (const auto& [key, values] : grid) {
    std::vector<Assignment> next;
    next.reserve(out.size() * values.size());
    for (const auto& partial : out) {
      for (const auto& v : values) {
        Assignment a = partial;
        a.emplace_back(key, v);
        next.push_back(std::move(a));
      }
    }
    out = std::move(next);
  }
  return out;
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

/// Document for one seed of one cell.
inline Json cell_document(const Json& base, const Assignment& a, std::uint64_t seed, SeedMode mode) {
  Json doc = base;
  for (const auto& [key, value] : a) set_path(doc, key, value);
  set_path(doc, "run.seed", Json(seed));
  if (mode == SeedMode::kRunAndData) set_path(doc, "dataset.seed", Json(seed));
  return doc;
}

// The parts of a document that influence a run's numbers.
inline Json run_relevant(const Json& doc) {
  return Json{{"dataset", doc.at("dataset")},
              {"run", doc.at("run")},
              {"local", doc.at("local")},
              {"optimizer", doc.at("optimizer")}};
}

class InstanceCache {
 public:
  std::shared_ptr<const FederationInstance> get(const DatasetConfig& cfg, const Json& key) {
    const std::string k = key.dump();
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    auto inst = std::make_shared<const FederationInstance>(build_instance(cfg));
    cache_.emplace(k, inst);
    return inst;
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const FederationInstance>> cache_;
};

inline std::optional<SweepCell> load_cached_cell(const std::filesystem::path& file, const std::string& hash) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  const Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("hash", "") != hash) return std::nullopt;
  if (j.value("failed", true) || !j.contains("losses") || !j.at("losses").is_array()) return std::nullopt;
  SweepCell c;
  c.hash = hash;
  c.losses = j.at("losses").get<std::vector<double>>();
  c.from_cache = true;
  return c;
}

inline void store_cell(const std::filesystem::path& file, const SweepCell& c) {
  Json j{{"hash", c.hash}, {"failed", c.failed}, {"losses", c.losses}, {"error", c.error}};
  Json assign = Json::object();
  for (const auto& [k, v] : c.assignment) assign[k] = v;
  j["assignment"] = assign;
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp);
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, file);
}

}  // namespace detail

/// Stable identity of a cell: everything that changes its numbers.
inline std::string cell_hash(const Json& base, const Assignment& a, const SweepConfig& sc) {
  Json doc = base;
  for (const auto& [key, value] : a) set_path(doc, key, value);
  Json key{{"config", detail::run_relevant(doc)},
           {"seeds", sc.seeds},
           {"seed_mode", sc.seed_mode == SeedMode::kRun ? "run" : "run-and-data"},
           {"window", sc.window},
           {"version", kVersion}};
  return hex64(fnv1a(key.dump()));
}

/// Runs every grid cell for every seed. Failed cells are recorded and the
/// sweep moves on; cells found in the cache directory are not re-run.
inline SweepReport run_sweep(const Experiment& ex, const SweepOptions& opt = {}) {
  const SweepConfig& sc = ex.sweep;
  if (sc.grid.empty()) throw Error(ErrorCode::kConfig, "sweep.grid: expected at least one key");
  if (sc.seeds.empty()) throw Error(ErrorCode::kConfig, "sweep.seeds: expected at least one seed");
  if (opt.cache_dir) std::filesystem::create_directories(*opt.cache_dir);

  SweepReport report;
  report.seeds = sc.seeds;
  const auto assignments = expand_grid(sc.grid);
  report.cells.resize(assignments.size());
  detail::InstanceCache instances;
  std::mutex report_mu;
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < assignments.size(); i = next++) {
      SweepCell cell;
      cell.assignment = assignments[i];
      cell.hash = cell_hash(ex.document, cell.assignment, sc);
      std::optional<std::filesystem::path> cache_file;
      if (opt.cache_dir) cache_file = *opt.cache_dir / ("cell-" + cell.hash + ".json");
      std::optional<SweepCell> cached;
      if (cache_file) cached = detail::load_cached_cell(*cache_file, cell.hash);
      if (cached && cached->losses.size() == sc.seeds.size()) {
        cached->assignment = cell.assignment;
        cell = std::move(*cached);
      } else {
        try {
          for (std::uint64_t seed : sc.seeds) {
            const Experiment e =
                parse_experiment(detail::cell_document(ex.document, cell.assignment, seed, sc.seed_mode));
            const auto inst = instances.get(e.dataset, e.document.at("dataset"));
            const RunResult res = run(resolve_run(e, *inst), *inst);
            if (res.diverged) throw Error(ErrorCode::kDivergence, "run diverged");
            cell.losses.push_back(final_window_loss(res.records, sc.window));
          }
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
          cell.losses.clear();
        }
        if (cache_file && !cell.failed) detail::store_cell(*cache_file, cell);
      }
      if (!cell.failed) {
        double acc = 0.0;
        for (double x : cell.losses) acc += x;
        cell.mean = acc / static_cast<double>(cell.losses.size());
        cell.stdev = sample_stdev(cell.losses);
      }
      std::lock_guard<std::mutex> lock(report_mu);
      report.cells[i] = std::move(cell);
      if (opt.on_cell) opt.on_cell(i, report.cells[i]);
    }
  };

  const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(assignments.size())));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const auto& c = report.cells[i];
    if (c.failed || !std::isfinite(c.mean)) continue;
    if (!report.best || c.mean < report.cells[*report.best].mean) report.best = i;
  }
  return report;
}

inline Json to_json(const SweepReport& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    Json assign = Json::object();
    for (const auto& [k, v] : c.assignment) assign[k] = v;
    Json jc{{"assignment", assign}, {"hash", c.hash}, {"failed", c.failed}, {"from_cache", c.from_cache}};
    if (c.failed) {
      jc["error"] = c.error;
    } else {
      jc["losses"] = c.losses;
      jc["mean"] = c.mean;
      jc["stdev"] = c.stdev;
    }
    cells.push_back(std::move(jc));
  }
  Json out{{"version", kVersion}, {"seeds", r.seeds}, {"cells", cells}};
  out["best"] = r.best ? Json(*r.best) : Json(nullptr);
  return out;
}

}  // namespace feddua

#endif  // FEDDUA_SWEEP_HPP
