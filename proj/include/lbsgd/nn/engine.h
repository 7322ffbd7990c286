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

#ifndef LBSGD_NN_ENGINE_H_
#define LBSGD_NN_ENGINE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "lbsgd/nn/network.h"

namespace lbsgd::nn {

// Activations recorded for one contiguous shard of the global batch.
struct ShardRecord {
  std::vector<Tensor> inputs;  // inputs[l] is the input of layer l; the last is the logits
  std::vector<Tensor> xhat;    // normalized activations, batchnorm layers only
  Tensor probs;                // softmax of the logits
  std::vector<std::int32_t> labels;
  std::uint64_t param_checksum = 0;
  double loss_sum = 0.0;       // tree sum of this shard's per-example losses
  std::size_t correct = 0;
};

class ForwardCache {
 public:
  Mode mode = Mode::kTrain;
  std::size_t batch_size = 0;
  double loss_sum = 0.0;
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<ShardRecord> shards;
  // Global batch statistics per layer; empty for non-batchnorm layers.
  std::vector<std::vector<double>> bn_mean;
  std::vector<std::vector<double>> bn_var;
  std::vector<std::vector<double>> bn_inv_std;
};

// Forward pass over a global batch held as contiguous shards, shard s being
// evaluated with replicas[s]. Batchnorm statistics are global: per-shard
// partial sums are combined with the fixed reduction tree, so the result is
// independent of how the batch was sharded when shard sizes are powers of two.
ForwardCache forward_shards(std::span<const ParamSet* const> replicas,
                            std::span<const Batch> shards, Mode mode);

// Per-shard gradients of the summed (not averaged) loss. Each shard's
// gradient is the tree sum of its per-example contributions.
std::vector<GradSet> backward_shards(std::span<const ParamSet* const> replicas,
                                     const ForwardCache& cache);

}  // namespace lbsgd::nn

#endif  // LBSGD_NN_ENGINE_H_
