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

// feddua: run, sweep and verify from one binary.
//
// Exit codes (stable):
//   0  success
//   1  theorem violations found by `verify`
//   2  configuration error (bad file, unknown key, invalid value)
//   3  runtime error, including divergence (partial trace is still written)
//   4  inconclusive oracle in `verify`

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "feddua/config.hpp"
#include "feddua/error.hpp"
#include "feddua/reporting.hpp"
#include "feddua/simulation.hpp"
#include "feddua/sweep.hpp"
#include "feddua/version.hpp"

namespace {

namespace fs = std::filesystem;

enum Exit : int {
  kOk = 0,
  kViolations = 1,
  kConfigError = 2,
  kRuntimeError = 3,
  kInconclusive = 4,
};

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "experiment file (JSON)");
  cmd->add_option("--set", args.overrides, "override a key, e.g. --set optimizer.family=fedexp")
      ->allow_extra_args(false);
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_flag("--quiet", args.quiet, "print nothing on success");
}

feddua::Experiment load(const CommonArgs& args) {
  return feddua::load_experiment(args.config.empty() ? std::nullopt : std::optional<std::string>(args.config),
                                 args.overrides);
}

// --out, then output.dir, then $FEDDUA_OUT, then ./feddua-out.
fs::path output_dir(const CommonArgs& args, const feddua::Experiment& ex) {
  fs::path dir;
  if (!args.out.empty()) {
    dir = args.out;
  } else if (ex.output.dir) {
    dir = *ex.output.dir;
  } else if (const char* env = std::getenv("FEDDUA_OUT"); env != nullptr && *env != '\0') {
    dir = env;
  } else {
    dir = "feddua-out";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw feddua::Error(feddua::ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw feddua::Error(feddua::ErrorCode::kIo, "cannot write " + file.string());
  out << text;
  if (!out) throw feddua::Error(feddua::ErrorCode::kIo, "write failed for " + file.string());
}

int exit_for(const feddua::Error& e) {
  switch (e.code()) {
    case feddua::ErrorCode::kConfig:
    case feddua::ErrorCode::kIo:
      return kConfigError;
    case feddua::ErrorCode::kInconclusive:
      return kInconclusive;
    default:
      return kRuntimeError;
  }
}

int cmd_run(const CommonArgs& args) {
  const feddua::Experiment ex = load(args);
  const fs::path dir = output_dir(args, ex);
  const feddua::FederationInstance inst = feddua::build_instance(ex.dataset);
  const feddua::RunConfig cfg = feddua::resolve_run(ex, inst);
  const feddua::RunResult res = feddua::run(cfg, inst);

  std::ostringstream csv;
  feddua::write_trace_csv(res.records, csv);
  const fs::path csv_path = dir / (ex.output.name + ".csv");
  write_text(csv_path, csv.str());
  write_text(dir / (ex.output.name + ".json"),
             feddua::run_metadata(ex, inst, res, ex.sweep.window).dump(2) + "\n");

  if (res.diverged) {
    std::cerr << "feddua: run diverged at round " << res.records.back().round
              << "; partial trace in " << csv_path.string() << "\n";
    return kRuntimeError;
  }
  if (!args.quiet) {
    std::cout << "rounds " << res.records.size() << ", final-window loss "
              << feddua::format_real(feddua::final_window_loss(res.records, ex.sweep.window))
              << ", skipped " << res.skipped_rounds << "\n"
              << "trace " << csv_path.string() << "\n";
  }
  return kOk;
}

int cmd_sweep(const CommonArgs& args, int threads) {
  const feddua::Experiment ex = load(args);
  const fs::path dir = output_dir(args, ex);
  feddua::SweepOptions opt;
  opt.threads = threads;
  opt.cache_dir = dir / (ex.output.name + "-cells");
  if (!args.quiet) {
    opt.on_cell = [](std::size_t i, const feddua::SweepCell& c) {
      std::cout << "cell " << i << (c.from_cache ? " (cached)" : "") << ": "
                << (c.failed ? "failed: " + c.error : "mean " + feddua::format_real(c.mean)) << "\n";
    };
  }
  const feddua::SweepReport report = feddua::run_sweep(ex, opt);
  feddua::Json j = feddua::to_json(report);
  j["config"] = ex.document;
  const fs::path path = dir / (ex.output.name + "-sweep.json");
  write_text(path, j.dump(2) + "\n");
  if (!args.quiet) {
    if (report.best) {
      std::cout << "best cell " << *report.best << " mean "
                << feddua::format_real(report.cells[*report.best].mean) << "\n";
    } else {
      std::cout << "no cell finished\n";
    }
    std::cout << "report " << path.string() << "\n";
  }
  return kOk;
}

int cmd_verify(const CommonArgs& args, double inject) {
  const feddua::Experiment ex = load(args);
  const fs::path dir = output_dir(args, ex);
  if (!(inject > 0.0)) {
    throw feddua::Error(feddua::ErrorCode::kConfig, "--inject-eta-scale must be positive");
  }
  const feddua::VerificationOutcome out = feddua::run_verification(ex.verify, inject);
  const fs::path path = dir / (ex.output.name + "-verify.json");
  write_text(path, out.report.dump(2) + "\n");
  if (!args.quiet) {
    std::cout << "violations " << out.violations << (out.inconclusive ? ", inconclusive" : "") << "\n"
              << "report " << path.string() << "\n";
  }
  if (out.violations > 0) return kViolations;
  if (out.inconclusive) return kInconclusive;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedDuA federated-learning simulator"};
  app.set_version_flag("--version", std::string(feddua::kVersion));
  app.require_subcommand(1);

  CommonArgs run_args;
  CommonArgs sweep_args;
  CommonArgs verify_args;
  int threads = 1;
  double inject = 1.0;

  auto* run = app.add_subcommand("run", "run one experiment and write its trace");
  add_common(run, run_args);
  auto* sweep = app.add_subcommand("sweep", "grid search over config keys and seeds");
  add_common(sweep, sweep_args);
  sweep->add_option("--threads", threads, "worker threads for cells")->check(CLI::PositiveNumber);
  auto* verify = app.add_subcommand("verify", "check step-size theorems on random federations");
  add_common(verify, verify_args);
  // Negative control: scales the server step so the verifier has something to catch.
  verify->add_option("--inject-eta-scale", inject)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*sweep) return cmd_sweep(sweep_args, threads);
    return cmd_verify(verify_args, inject);
  } catch (const feddua::Error& e) {
    std::cerr << "feddua: " << e.what() << "\n";
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << "feddua: " << e.what() << "\n";
    return kRuntimeError;
  }
}
