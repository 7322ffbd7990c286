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

#include "lbsgd/parallel/train.h"

#include <chrono>

#include "lbsgd/error.h"
#include "lbsgd/rng.h"

namespace lbsgd::parallel {

std::optional<double> TrainingLog::final_test_acc() const {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
    if (it->test_acc) return it->test_acc;
  }
  return std::nullopt;
}

bool same_trajectory(const TrainingLog& a, const TrainingLog& b) {
  if (a.status != b.status || a.diverged_at != b.diverged_at || a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    LogRow x = a.rows[i];
    LogRow y = b.rows[i];
    x.wall_ms = y.wall_ms = 0.0;
    if (!(x == y)) return false;
  }
  return true;
}

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

}  // namespace

TrainingLog train(const ClusterRun& run, std::span<const nn::LayerSpec> network, const Dataset& data,
                  const optim::HyperParams& hp, const TrainOptions& options) {
  run.validate();
  if (static_cast<std::int64_t>(run.global_batch) != hp.batch_size) {
    throw ConfigError("cluster global batch " + std::to_string(run.global_batch) +
                      " differs from hyper batch_size " + std::to_string(hp.batch_size));
  }
  const std::size_t n = data.train.size();
  optim::ScheduleState st = optim::make_schedule(hp, static_cast<std::int64_t>(n));
  const nn::ParamSet initial = nn::init_network(network, derive_seed(run.seed, kInitStream));
  Cluster cluster(initial, run.workers);

  TrainingLog log;
  for (const auto& g : initial.groups) log.group_names.push_back(g.name);

  std::int64_t limit = st.max_iterations;
  if (options.max_steps) limit = std::min(limit, *options.max_steps);

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> perm;
  std::int64_t perm_epoch = -1;
  const std::size_t batch = run.global_batch;

  for (std::int64_t it = 0; it < limit; ++it) {
    const std::int64_t epoch = it / st.iterations_per_epoch;
    if (epoch != perm_epoch) {
      perm = random_permutation(n, derive_seed(run.seed, kShuffleStream + static_cast<std::uint64_t>(epoch)));
      perm_epoch = epoch;
    }
    const std::size_t offset = static_cast<std::size_t>(it % st.iterations_per_epoch) * batch;
    const std::span<const std::size_t> idx(perm.data() + offset, batch);
    cluster.scatter(nn::gather_batch(data.train.inputs, data.train.labels, idx));

    LogRow row;
    row.epoch = epoch;
    row.iteration = it;
    try {
      LocalPass pass = cluster.local_gradients();
      const nn::GradSet summed = all_reduce(pass.grads);
      optim::StepReport report = cluster.global_step(summed, *pass.cache, hp, st);
      row.lr = report.lr;
      row.loss = pass.loss;
      row.train_acc = static_cast<double>(pass.correct) / static_cast<double>(batch);
      const optim::LambdaSummary lam = optim::summarize_lambdas(report, cluster.worker(0).local_params, hp);
      row.lambda_min = lam.min;
      row.lambda_med = lam.median;
      row.lambda_max = lam.max;
      if (options.record_steps) log.steps.push_back(std::move(report));
      const bool epoch_end = (it + 1) % st.iterations_per_epoch == 0 || it + 1 == limit;
      if (epoch_end && data.test.size() > 0) {
        row.test_acc = nn::evaluate_accuracy(cluster.worker(0).local_params, data.test);
      }
    } catch (const NumericError& e) {
      log.status = RunStatus::kDiverged;
      log.diverged_at = it;
      log.divergence_reason = e.what();
      break;
    } catch (const DivergenceError& e) {
      log.status = RunStatus::kDiverged;
      log.diverged_at = it;
      log.divergence_reason = e.what();
      break;
    }
    row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    log.rows.push_back(row);
    if (options.on_step) options.on_step(it, cluster);
  }
  return log;
}

}  // namespace lbsgd::parallel
