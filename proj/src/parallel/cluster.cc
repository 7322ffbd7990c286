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

#include "lbsgd/parallel/cluster.h"

#include "lbsgd/error.h"
#include "lbsgd/nn/reduce.h"

namespace lbsgd::parallel {

void ClusterRun::validate() const {
  if (workers == 0) throw PartitionError("cluster needs at least one worker");
  if (global_batch == 0) throw PartitionError("global batch must be positive");
  if (global_batch % workers != 0) {
    throw PartitionError("global batch " + std::to_string(global_batch) + " is not divisible by " +
                         std::to_string(workers) + " workers");
  }
}

std::vector<nn::Batch> partition_batch(const nn::Batch& batch, std::size_t workers) {
  ClusterRun{workers, batch.size(), 0}.validate();
  const std::size_t local = batch.size() / workers;
  std::vector<nn::Batch> parts;
  parts.reserve(workers);
  for (std::size_t j = 0; j < workers; ++j) parts.push_back(nn::slice_batch(batch, j * local, (j + 1) * local));
  return parts;
}

nn::GradSet all_reduce(std::span<const nn::GradSet> worker_grads) {
  if (worker_grads.empty()) throw ProtocolError("all_reduce over zero workers");
  const nn::GradSet& first = worker_grads.front();
  for (std::size_t j = 1; j < worker_grads.size(); ++j) {
    const nn::GradSet& other = worker_grads[j];
    if (other.size() != first.size()) {
      throw ProtocolError("worker " + std::to_string(j) + " sent " + std::to_string(other.size()) +
                          " groups, expected " + std::to_string(first.size()));
    }
    for (std::size_t g = 0; g < first.size(); ++g) {
      if (other[g].name != first[g].name || other[g].value.shape() != first[g].value.shape()) {
        throw ProtocolError("group '" + first[g].name + "' mismatched on worker " + std::to_string(j));
      }
    }
  }
  nn::GradSet out;
  out.reserve(first.size());
  std::vector<std::span<const double>> parts(worker_grads.size());
  for (std::size_t g = 0; g < first.size(); ++g) {
    for (std::size_t j = 0; j < worker_grads.size(); ++j) parts[j] = worker_grads[j][g].value.values();
    out.push_back({first[g].name, nn::Tensor(first[g].value.shape(), nn::tree_sum_parts(parts))});
  }
  return out;
}

Cluster::Cluster(const nn::ParamSet& initial, std::size_t workers) {
  if (workers == 0) throw PartitionError("cluster needs at least one worker");
  workers_.resize(workers);
  for (std::size_t j = 0; j < workers; ++j) {
    workers_[j].worker_id = j;
    workers_[j].local_params = initial;
  }
}

void Cluster::scatter(const nn::Batch& global_batch) {
  std::vector<nn::Batch> parts = partition_batch(global_batch, workers_.size());
  for (std::size_t j = 0; j < workers_.size(); ++j) workers_[j].local_batch = std::move(parts[j]);
}

void Cluster::check_synchronized() const {
  const std::uint64_t ref = nn::replica_checksum(workers_.front().local_params);
  for (std::size_t j = 1; j < workers_.size(); ++j) {
    if (nn::replica_checksum(workers_[j].local_params) != ref) {
      throw ConsistencyError("replica " + std::to_string(j) + " diverged from replica 0");
    }
  }
}

LocalPass Cluster::local_gradients() const {
  check_synchronized();
  std::vector<const nn::ParamSet*> replicas;
  std::vector<nn::Batch> shards;
  for (const auto& w : workers_) {
    if (w.local_batch.size() == 0) throw UsageError("worker " + std::to_string(w.worker_id) + " has no data");
    replicas.push_back(&w.local_params);
    shards.push_back(w.local_batch);
  }
  auto cache = std::make_shared<nn::ForwardCache>(nn::forward_shards(replicas, shards, nn::Mode::kTrain));
  LocalPass pass;
  pass.loss = cache->loss;
  pass.correct = cache->correct;
  pass.grads = nn::backward_shards(replicas, *cache);
  pass.cache = std::move(cache);
  return pass;
}

optim::StepReport Cluster::global_step(const nn::GradSet& summed, const nn::ForwardCache& cache,
                                       const optim::HyperParams& hp, optim::ScheduleState& st) {
  const double inv_rows = 1.0 / static_cast<double>(cache.batch_size);
  nn::GradSet mean = summed;
  for (auto& g : mean) {
    for (double& v : g.value.values()) v *= inv_rows;
  }
  optim::StepReport report;
  optim::ScheduleState next = st;
  for (std::size_t j = 0; j < workers_.size(); ++j) {
    nn::ParamSet& ps = workers_[j].local_params;
    nn::load_grads(ps, mean);
    nn::update_running_stats(ps, cache);
    optim::ScheduleState local = st;
    optim::StepReport r = optim::sgd_step(ps, hp, local);
    if (j == 0) {
      report = std::move(r);
      next = local;
    }
  }
  st = next;
  check_synchronized();
  return report;
}

}  // namespace lbsgd::parallel
