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

#ifndef LBSGD_PARALLEL_CLUSTER_H_
#define LBSGD_PARALLEL_CLUSTER_H_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "lbsgd/nn/engine.h"
#include "lbsgd/nn/network.h"
#include "lbsgd/optim/optim.h"

namespace lbsgd::parallel {

// P simulated workers sharing one global batch of size B (B divisible by P).
struct ClusterRun {
  std::size_t workers = 1;
  std::size_t global_batch = 1;
  std::uint64_t seed = 0;

  std::size_t local_batch() const { return global_batch / workers; }
  // Throws PartitionError when B mod P != 0.
  void validate() const;
};

// Contiguous slices in index order: worker j gets [j*B/P, (j+1)*B/P).
std::vector<nn::Batch> partition_batch(const nn::Batch& batch, std::size_t workers);

struct WorkerState {
  std::size_t worker_id = 0;
  nn::ParamSet local_params;
  nn::Batch local_batch;
};

// Elementwise sum over workers along the fixed reduction tree (ascending
// worker id, power-of-two left children). Throws ProtocolError naming the
// first group whose name or shape disagrees.
nn::GradSet all_reduce(std::span<const nn::GradSet> worker_grads);

struct LocalPass {
  double loss = 0.0;        // mean loss over the global batch
  std::size_t correct = 0;  // argmax hits over the global batch
  std::vector<nn::GradSet> grads;  // per worker, sum over its slice
  std::shared_ptr<const nn::ForwardCache> cache;
};

// In-process replicas of one network plus their current data slices.
class Cluster {
 public:
  Cluster(const nn::ParamSet& initial, std::size_t workers);

  std::size_t size() const { return workers_.size(); }
  const WorkerState& worker(std::size_t j) const { return workers_.at(j); }
  WorkerState& mutable_worker(std::size_t j) { return workers_.at(j); }

  // Splits the global batch across workers.
  void scatter(const nn::Batch& global_batch);

  // Each worker's gradient of the summed loss over its own slice. Batchnorm
  // statistics are exchanged across workers through the same reduction tree.
  // Throws ConsistencyError if replicas are not bitwise identical.
  LocalPass local_gradients() const;

  // Divides the all-reduced example sum by B, folds batchnorm statistics into
  // the running averages and applies the same sgd_step on every replica.
  optim::StepReport global_step(const nn::GradSet& summed, const nn::ForwardCache& cache,
                                const optim::HyperParams& hp, optim::ScheduleState& st);

  void check_synchronized() const;

 private:
  std::vector<WorkerState> workers_;
};

}  // namespace lbsgd::parallel

#endif  // LBSGD_PARALLEL_CLUSTER_H_
