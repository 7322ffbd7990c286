/*
Copyright 2026 The lbsgd Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef LBSGD_HARNESS_EXPERIMENT_H_
#define LBSGD_HARNESS_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbsgd/harness/config.h"
#include "lbsgd/harness/report.h"
#include "lbsgd/parallel/train.h"
#include "lbsgd/perf/perfmodel.h"

namespace lbsgd::harness {

inline constexpr const char* kOutputRootEnv = "LBSGD_OUTPUT_ROOT";

// Parameter count and forward+backward flops per example (6 per dense
// multiply-accumulate) of a network.
perf::ModelProfile profile_of(std::span<const nn::LayerSpec> network, const std::string& name = "network");

// Relative output directories are placed under $LBSGD_OUTPUT_ROOT when set.
std::filesystem::path resolve_output_dir(const std::string& dir);

struct ExperimentResult {
  parallel::TrainingLog log;
  perf::CostReport cost;
  std::filesystem::path output_dir;
  bool completed() const { return log.status == parallel::RunStatus::kCompleted; }
};

struct RunOptions {
  // Overrides config.output.dir (after root resolution) when set.
  std::optional<std::filesystem::path> output_dir;
  bool write_files = true;
};

// Trains, prices the run with the perf model and writes train_log.csv,
// schedule.csv, cost.csv and config.conf (plus summary.json when the
// output formats include json).
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct SweepEntry {
  std::string name;
  ExperimentConfig config;
};

// Every *.conf file in a directory, sorted by file name.
std::vector<SweepEntry> load_sweep_dir(const std::filesystem::path& dir);

// First epoch whose closing test accuracy reaches the target.
std::optional<std::int64_t> epochs_to_target(const parallel::TrainingLog& log, double target_acc);

// Runs every entry into out_dir/<name>/ and returns one row per entry in
// input order. Entries must share the dataset and the epoch budget.
std::vector<SweepRow> sweep(const std::vector<SweepEntry>& entries, const std::filesystem::path& out_dir,
                            double target_acc, std::size_t jobs = 1);

}  // namespace lbsgd::harness

#endif  // LBSGD_HARNESS_EXPERIMENT_H_
