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

#ifndef LBSGD_PARALLEL_TRAIN_H_
#define LBSGD_PARALLEL_TRAIN_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lbsgd/nn/network.h"
#include "lbsgd/optim/optim.h"
#include "lbsgd/parallel/cluster.h"

namespace lbsgd::parallel {

struct Dataset {
  nn::Batch train;
  nn::Batch test;
};

// One row per executed iteration. test_acc is present on epoch-closing rows
// and on the final row.
struct LogRow {
  std::int64_t epoch = 0;
  std::int64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_acc = 0.0;  // argmax accuracy on this iteration's global batch
  std::optional<double> test_acc;
  double lambda_min = 1.0;
  double lambda_med = 1.0;
  double lambda_max = 1.0;
  double wall_ms = 0.0;

  friend bool operator==(const LogRow&, const LogRow&) = default;
};

enum class RunStatus { kCompleted, kDiverged };

struct TrainingLog {
  std::vector<LogRow> rows;
  RunStatus status = RunStatus::kCompleted;
  std::int64_t diverged_at = -1;  // iteration that failed; rows end just before it
  std::string divergence_reason;
  std::vector<std::string> group_names;
  std::vector<optim::StepReport> steps;

  std::optional<double> final_test_acc() const;
};

// Equality of everything except wall-clock time.
bool same_trajectory(const TrainingLog& a, const TrainingLog& b);

struct TrainOptions {
  // Stop after this many iterations (the schedule still spans the full budget).
  std::optional<std::int64_t> max_steps;
  bool record_steps = true;
  // Called after every global step with the synchronized cluster.
  std::function<void(std::int64_t iteration, const Cluster&)> on_step;
};

// Fixed-epoch synchronous data-parallel training. Runs floor(E*n/B)
// iterations; epoch e draws batches from a permutation seeded by (seed, e).
// Divergence ends the run with a diverged status instead of throwing.
TrainingLog train(const ClusterRun& run, std::span<const nn::LayerSpec> network, const Dataset& data,
                  const optim::HyperParams& hp, const TrainOptions& options = {});

}  // namespace lbsgd::parallel

#endif  // LBSGD_PARALLEL_TRAIN_H_
