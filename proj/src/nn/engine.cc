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

#include "lbsgd/nn/engine.h"

#include <algorithm>
#include <cmath>

#include "lbsgd/error.h"
#include "lbsgd/nn/reduce.h"

namespace lbsgd::nn {

std::vector<double> tree_sum_parts(std::span<const std::span<const double>> parts) {
  if (parts.empty()) return {};
  const std::size_t width = parts.front().size();
  for (const auto& p : parts) {
    if (p.size() != width) throw ProtocolError("partial sums differ in length");
  }
  std::vector<double> out(width);
  TreeSum sum(width);
  sum.run(parts.size(), out, [&](std::size_t i, double* dst) {
    std::copy(parts[i].begin(), parts[i].end(), dst);
  });
  return out;
}

double tree_sum_scalars(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double out = 0.0;
  TreeSum sum(1);
  sum.run(values.size(), std::span<double>(&out, 1), [&](std::size_t i, double* dst) { *dst = values[i]; });
  return out;
}

namespace {

void check_finite(const Tensor& t, std::size_t layer) {
  if (!t.all_finite()) throw NumericError(layer, "non-finite activation");
}

const ParamGroup* group_or_null(const ParamSet& ps, std::size_t layer, ParamCategory cat) {
  const std::size_t idx = ps.find_group(layer, cat);
  return idx == ParamSet::npos ? nullptr : &ps.groups[idx];
}

// Tree sum over the rows of a shard, each row producing `width` values.
template <class Leaf>
std::vector<double> shard_tree_sum(std::size_t rows, std::size_t width, Leaf&& leaf) {
  std::vector<double> out(width);
  TreeSum sum(width);
  sum.run(rows, out, leaf);
  return out;
}

std::vector<double> combine(const std::vector<std::vector<double>>& partials) {
  std::vector<std::span<const double>> views(partials.begin(), partials.end());
  return tree_sum_parts(views);
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const ParamGroup* bias) {
  const std::size_t rows = x.dim(0);
  const std::size_t in = w.dim(0);
  const std::size_t out = w.dim(1);
  Tensor y({rows, out}, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double* yr = y.data() + i * out;
    if (bias != nullptr) std::copy(bias->param.data(), bias->param.data() + out, yr);
    const double* xr = x.data() + i * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = xr[k];
      const double* wr = w.data() + k * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xv * wr[o];
    }
  }
  return y;
}

void softmax_rows(const Tensor& logits, std::span<const std::int32_t> labels, std::size_t layer,
                  ShardRecord& rec) {
  const std::size_t rows = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  rec.probs = Tensor({rows, classes});
  std::vector<double> losses(rows);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto z = logits.row(i);
    auto p = rec.probs.row(i);
    std::size_t argmax = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (z[c] > z[argmax]) argmax = c;
    }
    const double zmax = z[argmax];
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p[c] = std::exp(z[c] - zmax);
      denom += p[c];
    }
    for (std::size_t c = 0; c < classes; ++c) p[c] /= denom;
    const auto y = static_cast<std::size_t>(labels[i]);
    losses[i] = zmax + std::log(denom) - z[y];
    if (argmax == y) ++correct;
  }
  double loss_sum = 0.0;
  TreeSum sum(1);
  sum.run(rows, std::span<double>(&loss_sum, 1), [&](std::size_t i, double* dst) { *dst = losses[i]; });
  if (!std::isfinite(loss_sum)) throw NumericError(layer, "non-finite loss");
  rec.loss_sum = loss_sum;
  rec.correct = correct;
}

}  // namespace

ForwardCache forward_shards(std::span<const ParamSet* const> replicas, std::span<const Batch> shards,
                            Mode mode) {
  if (shards.empty() || replicas.size() != shards.size()) {
    throw UsageError("forward needs one replica per shard");
  }
  const ParamSet& ref = *replicas.front();
  const std::size_t num_layers = ref.layers.size();
  const std::size_t classes = ref.num_classes();

  ForwardCache cache;
  cache.mode = mode;
  cache.shards.resize(shards.size());
  cache.bn_mean.resize(num_layers);
  cache.bn_var.resize(num_layers);
  cache.bn_inv_std.resize(num_layers);

  for (std::size_t s = 0; s < shards.size(); ++s) {
    const Batch& b = shards[s];
    if (b.size() == 0) throw UsageError("empty shard");
    if (b.inputs.rank() != 2 || b.inputs.dim(0) != b.size() || b.inputs.dim(1) != ref.input_dim()) {
      throw UsageError("batch shape does not match the first layer (expected width " +
                       std::to_string(ref.input_dim()) + ")");
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b.labels[i] < 0 || static_cast<std::size_t>(b.labels[i]) >= classes) {
        throw DomainError("label " + std::to_string(b.labels[i]) + " at example " + std::to_string(i) +
                          " is outside [0, " + std::to_string(classes) + ")");
      }
    }
    ShardRecord& rec = cache.shards[s];
    rec.param_checksum = param_checksum(*replicas[s]);
    rec.labels = b.labels;
    rec.inputs.reserve(num_layers);
    rec.inputs.push_back(b.inputs);
    rec.xhat.resize(num_layers);
    cache.batch_size += b.size();
  }
  const std::size_t global_rows = cache.batch_size;

  for (std::size_t l = 0; l + 1 < num_layers; ++l) {
    const LayerSpec& spec = ref.layers[l];
    switch (spec.kind) {
      case LayerKind::kDense: {
        for (std::size_t s = 0; s < shards.size(); ++s) {
          const ParamSet& ps = *replicas[s];
          const ParamGroup* w = group_or_null(ps, l, ParamCategory::kWeight);
          Tensor y = dense_forward(cache.shards[s].inputs[l], w->param, group_or_null(ps, l, ParamCategory::kBias));
          check_finite(y, l);
          cache.shards[s].inputs.push_back(std::move(y));
        }
        break;
      }
      case LayerKind::kRelu: {
        for (auto& rec : cache.shards) {
          Tensor y = rec.inputs[l];
          for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
          check_finite(y, l);
          rec.inputs.push_back(std::move(y));
        }
        break;
      }
      case LayerKind::kBatchNorm: {
        const std::size_t width = spec.out_dim;
        std::vector<double> mean(width), var(width), inv_std(width);
        if (mode == Mode::kTrain) {
          if (global_rows < 2) {
            throw DegenerateBatchError("batchnorm layer " + std::to_string(l) +
                                       " needs at least 2 examples in training mode");
          }
          const double inv_rows = 1.0 / static_cast<double>(global_rows);
          std::vector<std::vector<double>> partial;
          for (const auto& rec : cache.shards) {
            const Tensor& x = rec.inputs[l];
            partial.push_back(shard_tree_sum(x.dim(0), width, [&](std::size_t i, double* dst) {
              const auto r = x.row(i);
              std::copy(r.begin(), r.end(), dst);
            }));
          }
          const std::vector<double> sum = combine(partial);
          for (std::size_t f = 0; f < width; ++f) mean[f] = sum[f] * inv_rows;
          partial.clear();
          for (const auto& rec : cache.shards) {
            const Tensor& x = rec.inputs[l];
            partial.push_back(shard_tree_sum(x.dim(0), width, [&](std::size_t i, double* dst) {
              const auto r = x.row(i);
              for (std::size_t f = 0; f < width; ++f) {
                const double c = r[f] - mean[f];
                dst[f] = c * c;
              }
            }));
          }
          const std::vector<double> sq = combine(partial);
          for (std::size_t f = 0; f < width; ++f) var[f] = sq[f] * inv_rows;
        } else {
          const ParamSet& ps = *replicas.front();
          const Tensor& rm = ps.buffers[ps.find_buffer(l, ".running_mean")].value;
          const Tensor& rv = ps.buffers[ps.find_buffer(l, ".running_var")].value;
          for (std::size_t f = 0; f < width; ++f) {
            mean[f] = rm[f];
            var[f] = rv[f];
          }
        }
        for (std::size_t f = 0; f < width; ++f) inv_std[f] = 1.0 / std::sqrt(var[f] + spec.eps);
        for (std::size_t s = 0; s < shards.size(); ++s) {
          ShardRecord& rec = cache.shards[s];
          const ParamSet& ps = *replicas[s];
          const Tensor& gamma = group_or_null(ps, l, ParamCategory::kNormScale)->param;
          const Tensor& beta = group_or_null(ps, l, ParamCategory::kNormShift)->param;
          const Tensor& x = rec.inputs[l];
          Tensor xhat(x.shape());
          Tensor y(x.shape());
          for (std::size_t i = 0; i < x.dim(0); ++i) {
            for (std::size_t f = 0; f < width; ++f) {
              const double h = (x.at(i, f) - mean[f]) * inv_std[f];
              xhat.at(i, f) = h;
              y.at(i, f) = gamma[f] * h + beta[f];
            }
          }
          check_finite(y, l);
          rec.xhat[l] = std::move(xhat);
          rec.inputs.push_back(std::move(y));
        }
        cache.bn_mean[l] = std::move(mean);
        cache.bn_var[l] = std::move(var);
        cache.bn_inv_std[l] = std::move(inv_std);
        break;
      }
      case LayerKind::kSoftmaxXent:
        break;
    }
  }

  const std::size_t last = num_layers - 1;
  std::vector<double> shard_losses;
  for (auto& rec : cache.shards) {
    softmax_rows(rec.inputs[last], rec.labels, last, rec);
    shard_losses.push_back(rec.loss_sum);
    cache.correct += rec.correct;
  }
  cache.loss_sum = tree_sum_scalars(shard_losses);
  cache.loss = cache.loss_sum / static_cast<double>(global_rows);
  if (!std::isfinite(cache.loss)) throw NumericError(last, "non-finite loss");
  return cache;
}

std::vector<GradSet> backward_shards(std::span<const ParamSet* const> replicas, const ForwardCache& cache) {
  if (replicas.size() != cache.shards.size()) throw UsageError("backward needs one replica per shard");
  if (cache.mode != Mode::kTrain) throw UsageError("backward requires a training-mode forward pass");
  for (std::size_t s = 0; s < replicas.size(); ++s) {
    if (param_checksum(*replicas[s]) != cache.shards[s].param_checksum) {
      throw UsageError("stale forward cache: parameters changed since the forward pass");
    }
  }
  const ParamSet& ref = *replicas.front();
  const std::size_t num_layers = ref.layers.size();
  const std::size_t num_shards = cache.shards.size();
  const double inv_rows = 1.0 / static_cast<double>(cache.batch_size);

  std::vector<GradSet> grads(num_shards);
  for (std::size_t s = 0; s < num_shards; ++s) grads[s] = extract_grads(*replicas[s]);

  // Upstream gradient of the summed loss, per shard.
  std::vector<Tensor> delta(num_shards);
  for (std::size_t s = 0; s < num_shards; ++s) {
    const ShardRecord& rec = cache.shards[s];
    delta[s] = rec.probs;
    for (std::size_t i = 0; i < rec.labels.size(); ++i) delta[s].at(i, static_cast<std::size_t>(rec.labels[i])) -= 1.0;
  }

  for (std::size_t l = num_layers - 1; l-- > 0;) {
    const LayerSpec& spec = ref.layers[l];
    switch (spec.kind) {
      case LayerKind::kDense: {
        const std::size_t in = spec.in_dim;
        const std::size_t out = spec.out_dim;
        for (std::size_t s = 0; s < num_shards; ++s) {
          const ParamSet& ps = *replicas[s];
          const Tensor& x = cache.shards[s].inputs[l];
          const Tensor& dy = delta[s];
          const std::size_t rows = x.dim(0);
          const std::size_t wi = ps.find_group(l, ParamCategory::kWeight);
          Tensor& dw = grads[s][wi].value;
          TreeSum wsum(in * out);
          wsum.run(rows, dw.values(), [&](std::size_t i, double* dst) {
            const double* xr = x.data() + i * in;
            const double* dr = dy.data() + i * out;
            for (std::size_t k = 0; k < in; ++k) {
              const double xv = xr[k];
              double* d = dst + k * out;
              for (std::size_t o = 0; o < out; ++o) d[o] = xv * dr[o];
            }
          });
          const std::size_t bi = ps.find_group(l, ParamCategory::kBias);
          if (bi != ParamSet::npos) {
            TreeSum bsum(out);
            bsum.run(rows, grads[s][bi].value.values(), [&](std::size_t i, double* dst) {
              const double* dr = dy.data() + i * out;
              std::copy(dr, dr + out, dst);
            });
          }
          if (l > 0) {
            const Tensor& w = ps.groups[wi].param;
            Tensor dx({rows, in});
            for (std::size_t i = 0; i < rows; ++i) {
              const double* dr = dy.data() + i * out;
              double* xr = dx.data() + i * in;
              for (std::size_t k = 0; k < in; ++k) {
                const double* wr = w.data() + k * out;
                double acc = 0.0;
                for (std::size_t o = 0; o < out; ++o) acc += dr[o] * wr[o];
                xr[k] = acc;
              }
            }
            delta[s] = std::move(dx);
          }
        }
        break;
      }
      case LayerKind::kRelu: {
        for (std::size_t s = 0; s < num_shards; ++s) {
          const Tensor& x = cache.shards[s].inputs[l];
          Tensor& d = delta[s];
          for (std::size_t k = 0; k < d.size(); ++k) {
            if (!(x[k] > 0.0)) d[k] = 0.0;
          }
        }
        break;
      }
      case LayerKind::kBatchNorm: {
        const std::size_t width = spec.out_dim;
        std::vector<std::vector<double>> dbeta(num_shards), dgamma(num_shards);
        for (std::size_t s = 0; s < num_shards; ++s) {
          const Tensor& dy = delta[s];
          const Tensor& xhat = cache.shards[s].xhat[l];
          dbeta[s] = shard_tree_sum(dy.dim(0), width, [&](std::size_t i, double* dst) {
            const auto r = dy.row(i);
            std::copy(r.begin(), r.end(), dst);
          });
          dgamma[s] = shard_tree_sum(dy.dim(0), width, [&](std::size_t i, double* dst) {
            const auto r = dy.row(i);
            const auto h = xhat.row(i);
            for (std::size_t f = 0; f < width; ++f) dst[f] = r[f] * h[f];
          });
          const ParamSet& ps = *replicas[s];
          grads[s][ps.find_group(l, ParamCategory::kNormScale)].value =
              Tensor({width}, std::vector<double>(dgamma[s]));
          grads[s][ps.find_group(l, ParamCategory::kNormShift)].value =
              Tensor({width}, std::vector<double>(dbeta[s]));
        }
        if (l == 0) break;
        const std::vector<double> dbeta_all = combine(dbeta);
        const std::vector<double> dgamma_all = combine(dgamma);
        const std::vector<double>& inv_std = cache.bn_inv_std[l];
        std::vector<double> mean_dxhat(width), mean_dxhat_xhat(width);
        for (std::size_t s = 0; s < num_shards; ++s) {
          const ParamSet& ps = *replicas[s];
          const Tensor& gamma = ps.groups[ps.find_group(l, ParamCategory::kNormScale)].param;
          for (std::size_t f = 0; f < width; ++f) {
            mean_dxhat[f] = gamma[f] * dbeta_all[f] * inv_rows;
            mean_dxhat_xhat[f] = gamma[f] * dgamma_all[f] * inv_rows;
          }
          const Tensor& xhat = cache.shards[s].xhat[l];
          Tensor& d = delta[s];
          for (std::size_t i = 0; i < d.dim(0); ++i) {
            for (std::size_t f = 0; f < width; ++f) {
              d.at(i, f) = inv_std[f] * (gamma[f] * d.at(i, f) - mean_dxhat[f] - xhat.at(i, f) * mean_dxhat_xhat[f]);
            }
          }
        }
        break;
      }
      case LayerKind::kSoftmaxXent:
        break;
    }
  }
  return grads;
}

LossResult forward_loss(const ParamSet& params, const Batch& batch) {
  const ParamSet* replicas[] = {&params};
  auto cache = std::make_shared<ForwardCache>(forward_shards(replicas, std::span<const Batch>(&batch, 1), Mode::kTrain));
  LossResult out;
  out.loss = cache->loss;
  out.correct = cache->correct;
  out.cache = std::move(cache);
  return out;
}

void backward(ParamSet& params, const ForwardCache& cache) {
  if (cache.shards.size() != 1) throw UsageError("backward() expects a single-shard cache");
  const ParamSet* replicas[] = {&params};
  GradSet grads = std::move(backward_shards(replicas, cache).front());
  const double inv_rows = 1.0 / static_cast<double>(cache.batch_size);
  for (auto& g : grads) {
    for (double& v : g.value.values()) v *= inv_rows;
  }
  load_grads(params, grads);
}

void update_running_stats(ParamSet& params, const ForwardCache& cache, double momentum) {
  if (cache.mode != Mode::kTrain) return;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (params.layers[l].kind != LayerKind::kBatchNorm) continue;
    Tensor& rm = params.buffers[params.find_buffer(l, ".running_mean")].value;
    Tensor& rv = params.buffers[params.find_buffer(l, ".running_var")].value;
    for (std::size_t f = 0; f < rm.size(); ++f) {
      rm[f] = momentum * rm[f] + (1.0 - momentum) * cache.bn_mean[l][f];
      rv[f] = momentum * rv[f] + (1.0 - momentum) * cache.bn_var[l][f];
    }
  }
}

Tensor predict_logits(const ParamSet& params, const Tensor& inputs, Mode mode) {
  Batch b{inputs, std::vector<std::int32_t>(inputs.dim(0), 0)};
  const ParamSet* replicas[] = {&params};
  ForwardCache cache = forward_shards(replicas, std::span<const Batch>(&b, 1), mode);
  return std::move(cache.shards.front().inputs.back());
}

double evaluate_accuracy(const ParamSet& params, const Batch& batch) {
  const ParamSet* replicas[] = {&params};
  ForwardCache cache = forward_shards(replicas, std::span<const Batch>(&batch, 1), Mode::kEval);
  return static_cast<double>(cache.correct) / static_cast<double>(batch.size());
}

}  // namespace lbsgd::nn
