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

#ifndef LBSGD_NN_NETWORK_H_
#define LBSGD_NN_NETWORK_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lbsgd/nn/tensor.h"

namespace lbsgd::nn {

enum class LayerKind { kDense, kBatchNorm, kRelu, kSoftmaxXent };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view text);

inline constexpr double kDefaultBatchNormEps = 1e-5;
inline constexpr double kRunningStatMomentum = 0.99;

// One layer of a feed-forward stack. in_dim/out_dim are required for dense
// layers; for the other kinds they are filled in by resolve_layers() from the
// preceding layer (or may be given explicitly when the layer comes first).
struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  double eps = kDefaultBatchNormEps;
  bool bias = true;

  static LayerSpec dense(std::size_t in, std::size_t out, bool bias = true);
  static LayerSpec batchnorm(double eps = kDefaultBatchNormEps, std::size_t dim = 0);
  static LayerSpec relu(std::size_t dim = 0);
  static LayerSpec softmax_xent(std::size_t classes = 0);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Checks dimension compatibility and the single trailing softmax-xent layer,
// and returns the specs with every in_dim/out_dim filled in.
std::vector<LayerSpec> resolve_layers(std::span<const LayerSpec> specs);

enum class ParamCategory { kWeight, kBias, kNormScale, kNormShift };

std::string_view to_string(ParamCategory category);
std::optional<ParamCategory> parse_param_category(std::string_view text);

struct ParamGroup {
  std::string name;
  ParamCategory category = ParamCategory::kWeight;
  std::size_t layer = 0;
  Tensor param;
  Tensor grad;
  Tensor momentum;
};

// Non-trainable per-layer state (batchnorm running statistics).
struct StateBuffer {
  std::string name;
  std::size_t layer = 0;
  Tensor value;
};

// The network: resolved architecture plus every named parameter group. Plain
// data; copying a ParamSet yields an independent replica.
struct ParamSet {
  std::vector<LayerSpec> layers;
  std::vector<ParamGroup> groups;
  std::vector<StateBuffer> buffers;

  std::size_t input_dim() const { return layers.front().in_dim; }
  std::size_t num_classes() const { return layers.back().out_dim; }
  std::size_t num_parameters() const;

  ParamGroup& group(std::string_view name);
  const ParamGroup& group(std::string_view name) const;
  // Index of the group for (layer, category), or npos.
  std::size_t find_group(std::size_t layer, ParamCategory category) const;
  std::size_t find_buffer(std::size_t layer, std::string_view suffix) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

// Scaled-uniform weights (limit sqrt(6/(fan_in+fan_out))) from xoshiro256**;
// biases and shifts zero, scales one, momentum zero. Deterministic in seed.
ParamSet init_network(std::span<const LayerSpec> specs, std::uint64_t seed);

// FNV-1a over the bit patterns of every parameter tensor (not grads, momenta
// or running statistics).
std::uint64_t param_checksum(const ParamSet& params);

// FNV-1a over parameters, momenta and running statistics: the full replica
// state that must agree across workers.
std::uint64_t replica_checksum(const ParamSet& params);

// Bitwise equality of parameters, momenta and running statistics.
bool identical(const ParamSet& a, const ParamSet& b);

// Gradients detached from a ParamSet, one tensor per group in group order.
struct GradGroup {
  std::string name;
  Tensor value;
};
using GradSet = std::vector<GradGroup>;

GradSet extract_grads(const ParamSet& params);
void load_grads(ParamSet& params, const GradSet& grads);

struct Batch {
  Tensor inputs;  // [B, d]
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
};

// Rows [begin, end) of a batch.
Batch slice_batch(const Batch& batch, std::size_t begin, std::size_t end);
Batch concat_batches(std::span<const Batch> parts);
Batch gather_batch(const Tensor& inputs, std::span<const std::int32_t> labels,
                   std::span<const std::size_t> indices);

enum class Mode { kTrain, kEval };

class ForwardCache;

struct LossResult {
  double loss = 0.0;        // mean softmax cross-entropy
  std::size_t correct = 0;  // argmax hits in the batch
  std::shared_ptr<const ForwardCache> cache;
};

// Mean softmax cross-entropy over the batch, in training mode (batchnorm uses
// batch statistics). The cache is what backward() consumes.
LossResult forward_loss(const ParamSet& params, const Batch& batch);

// Fills params' grad buffers with the gradient of the mean loss. Throws
// UsageError if params changed since the forward pass that built `cache`.
void backward(ParamSet& params, const ForwardCache& cache);

// Folds the batch statistics recorded in `cache` into the running statistics.
void update_running_stats(ParamSet& params, const ForwardCache& cache,
                          double momentum = kRunningStatMomentum);

// Logits in the requested mode; evaluation mode uses running statistics.
Tensor predict_logits(const ParamSet& params, const Tensor& inputs, Mode mode = Mode::kEval);

// Fraction of argmax hits in evaluation mode.
double evaluate_accuracy(const ParamSet& params, const Batch& batch);

}  // namespace lbsgd::nn

#endif  // LBSGD_NN_NETWORK_H_
