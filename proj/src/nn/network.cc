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

#include "lbsgd/nn/network.h"

#include <cmath>
#include <cstring>

#include "lbsgd/error.h"
#include "lbsgd/rng.h"

namespace lbsgd::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSoftmaxXent: return "softmax_xent";
  }
  return "?";
}

std::optional<LayerKind> parse_layer_kind(std::string_view text) {
  if (text == "dense") return LayerKind::kDense;
  if (text == "batchnorm") return LayerKind::kBatchNorm;
  if (text == "relu") return LayerKind::kRelu;
  if (text == "softmax_xent") return LayerKind::kSoftmaxXent;
  return std::nullopt;
}

std::string_view to_string(ParamCategory category) {
  switch (category) {
    case ParamCategory::kWeight: return "weight";
    case ParamCategory::kBias: return "bias";
    case ParamCategory::kNormScale: return "norm_scale";
    case ParamCategory::kNormShift: return "norm_shift";
  }
  return "?";
}

std::optional<ParamCategory> parse_param_category(std::string_view text) {
  if (text == "weight") return ParamCategory::kWeight;
  if (text == "bias") return ParamCategory::kBias;
  if (text == "norm_scale") return ParamCategory::kNormScale;
  if (text == "norm_shift") return ParamCategory::kNormShift;
  return std::nullopt;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, bool bias) {
  return {LayerKind::kDense, in, out, kDefaultBatchNormEps, bias};
}

LayerSpec LayerSpec::batchnorm(double eps, std::size_t dim) {
  return {LayerKind::kBatchNorm, dim, dim, eps, true};
}

LayerSpec LayerSpec::relu(std::size_t dim) { return {LayerKind::kRelu, dim, dim, kDefaultBatchNormEps, true}; }

LayerSpec LayerSpec::softmax_xent(std::size_t classes) {
  return {LayerKind::kSoftmaxXent, classes, classes, kDefaultBatchNormEps, true};
}

namespace {

std::string layer_label(std::size_t index, const LayerSpec& spec) {
  return std::to_string(index) + " (" + std::string(to_string(spec.kind)) + ")";
}

}  // namespace

std::vector<LayerSpec> resolve_layers(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ConfigError("network has no layers");
  std::vector<LayerSpec> out(specs.begin(), specs.end());
  std::size_t width = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    LayerSpec& s = out[i];
    const bool last = i + 1 == out.size();
    if (s.kind == LayerKind::kSoftmaxXent && !last) {
      throw ConfigError("softmax_xent must be the final layer, found at layer " + layer_label(i, s));
    }
    if (last && s.kind != LayerKind::kSoftmaxXent) {
      throw ConfigError("network must end in exactly one softmax_xent layer");
    }
    if (s.kind == LayerKind::kDense) {
      if (s.in_dim == 0 || s.out_dim == 0) {
        throw ConfigError("dense layer " + layer_label(i, s) + " needs positive in/out dimensions");
      }
    } else {
      if (s.in_dim == 0) s.in_dim = width;
      if (s.out_dim == 0) s.out_dim = s.in_dim;
      if (s.in_dim == 0) {
        throw ConfigError("layer " + layer_label(i, s) + " has no known input width");
      }
      if (s.in_dim != s.out_dim) {
        throw ConfigError("layer " + layer_label(i, s) + " must preserve its width");
      }
      if (s.kind == LayerKind::kBatchNorm && !(s.eps > 0.0 && std::isfinite(s.eps))) {
        throw ConfigError("batchnorm layer " + layer_label(i, s) + " needs eps > 0");
      }
    }
    if (i > 0 && s.in_dim != width) {
      throw ConfigError("incompatible dimensions between layer " + layer_label(i - 1, out[i - 1]) +
                        " (out " + std::to_string(width) + ") and layer " + layer_label(i, s) +
                        " (in " + std::to_string(s.in_dim) + ")");
    }
    width = s.out_dim;
  }
  if (out.back().out_dim < 2) throw ConfigError("softmax_xent needs at least two classes");
  return out;
}

std::size_t ParamSet::num_parameters() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.param.size();
  return n;
}

ParamGroup& ParamSet::group(std::string_view name) {
  for (auto& g : groups) {
    if (g.name == name) return g;
  }
  throw UsageError("no parameter group named '" + std::string(name) + "'");
}

const ParamGroup& ParamSet::group(std::string_view name) const {
  return const_cast<ParamSet*>(this)->group(name);
}

std::size_t ParamSet::find_group(std::size_t layer, ParamCategory category) const {
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].layer == layer && groups[i].category == category) return i;
  }
  return npos;
}

std::size_t ParamSet::find_buffer(std::size_t layer, std::string_view suffix) const {
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    if (buffers[i].layer == layer && buffers[i].name.ends_with(suffix)) return i;
  }
  return npos;
}

namespace {

void add_group(ParamSet& ps, std::string name, ParamCategory cat, std::size_t layer, Tensor init) {
  ParamGroup g;
  g.name = std::move(name);
  g.category = cat;
  g.layer = layer;
  g.grad = Tensor(init.shape());
  g.momentum = Tensor(init.shape());
  g.param = std::move(init);
  ps.groups.push_back(std::move(g));
}

}  // namespace

ParamSet init_network(std::span<const LayerSpec> specs, std::uint64_t seed) {
  ParamSet ps;
  ps.layers = resolve_layers(specs);
  Xoshiro256 rng(seed);
  for (std::size_t l = 0; l < ps.layers.size(); ++l) {
    const LayerSpec& s = ps.layers[l];
    const std::string prefix = std::string(to_string(s.kind)) + std::to_string(l);
    if (s.kind == LayerKind::kDense) {
      Tensor w({s.in_dim, s.out_dim});
      const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
      for (double& v : w.values()) v = limit * (2.0 * rng.uniform() - 1.0);
      add_group(ps, prefix + ".weight", ParamCategory::kWeight, l, std::move(w));
      if (s.bias) add_group(ps, prefix + ".bias", ParamCategory::kBias, l, Tensor({s.out_dim}, 0.0));
    } else if (s.kind == LayerKind::kBatchNorm) {
      add_group(ps, prefix + ".scale", ParamCategory::kNormScale, l, Tensor({s.out_dim}, 1.0));
      add_group(ps, prefix + ".shift", ParamCategory::kNormShift, l, Tensor({s.out_dim}, 0.0));
      ps.buffers.push_back({prefix + ".running_mean", l, Tensor({s.out_dim}, 0.0)});
      ps.buffers.push_back({prefix + ".running_var", l, Tensor({s.out_dim}, 1.0)});
    }
  }
  return ps;
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, const Tensor& t) {
  for (double v : t.values()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= kFnvPrime;
    }
  }
}

}  // namespace

std::uint64_t param_checksum(const ParamSet& params) {
  std::uint64_t h = kFnvOffset;
  for (const auto& g : params.groups) fnv_mix(h, g.param);
  return h;
}

std::uint64_t replica_checksum(const ParamSet& params) {
  std::uint64_t h = kFnvOffset;
  for (const auto& g : params.groups) {
    fnv_mix(h, g.param);
    fnv_mix(h, g.momentum);
  }
  for (const auto& b : params.buffers) fnv_mix(h, b.value);
  return h;
}

bool identical(const ParamSet& a, const ParamSet& b) {
  if (a.layers != b.layers || a.groups.size() != b.groups.size() || a.buffers.size() != b.buffers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.groups.size(); ++i) {
    if (a.groups[i].name != b.groups[i].name || !a.groups[i].param.identical(b.groups[i].param) ||
        !a.groups[i].momentum.identical(b.groups[i].momentum)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.buffers.size(); ++i) {
    if (!a.buffers[i].value.identical(b.buffers[i].value)) return false;
  }
  return true;
}

GradSet extract_grads(const ParamSet& params) {
  GradSet out;
  out.reserve(params.groups.size());
  for (const auto& g : params.groups) out.push_back({g.name, g.grad});
  return out;
}

void load_grads(ParamSet& params, const GradSet& grads) {
  if (grads.size() != params.groups.size()) {
    throw UsageError("gradient set has " + std::to_string(grads.size()) + " groups, network has " +
                     std::to_string(params.groups.size()));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    ParamGroup& g = params.groups[i];
    if (grads[i].name != g.name || grads[i].value.shape() != g.param.shape()) {
      throw UsageError("gradient group '" + grads[i].name + "' does not match '" + g.name + "'");
    }
    g.grad = grads[i].value;
  }
}

Batch slice_batch(const Batch& batch, std::size_t begin, std::size_t end) {
  if (begin >= end || end > batch.size()) throw UsageError("invalid batch slice");
  const std::size_t d = batch.inputs.dim(1);
  std::vector<double> data(batch.inputs.data() + begin * d, batch.inputs.data() + end * d);
  return {Tensor({end - begin, d}, std::move(data)),
          std::vector<std::int32_t>(batch.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                                    batch.labels.begin() + static_cast<std::ptrdiff_t>(end))};
}

Batch concat_batches(std::span<const Batch> parts) {
  if (parts.empty()) throw UsageError("nothing to concatenate");
  const std::size_t d = parts.front().inputs.dim(1);
  std::vector<double> data;
  std::vector<std::int32_t> labels;
  for (const Batch& p : parts) {
    if (p.inputs.dim(1) != d) throw UsageError("batch widths differ");
    data.insert(data.end(), p.inputs.values().begin(), p.inputs.values().end());
    labels.insert(labels.end(), p.labels.begin(), p.labels.end());
  }
  return {Tensor({labels.size(), d}, std::move(data)), std::move(labels)};
}

Batch gather_batch(const Tensor& inputs, std::span<const std::int32_t> labels,
                   std::span<const std::size_t> indices) {
  const std::size_t d = inputs.dim(1);
  Batch out{Tensor({indices.size(), d}), {}};
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = inputs.row(indices[r]);
    auto dst = out.inputs.row(r);
    for (std::size_t k = 0; k < d; ++k) dst[k] = src[k];
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

}  // namespace lbsgd::nn
