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

#ifndef LBSGD_TESTS_GRAD_CHECK_H_
#define LBSGD_TESTS_GRAD_CHECK_H_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lbsgd/nn/network.h"
#include "lbsgd/rng.h"

namespace lbsgd::testing {

// Network touching every layer kind and parameter category. Biases never
// feed a batchnorm layer, whose mean subtraction would zero their gradient.
inline std::vector<nn::LayerSpec> all_kinds_network() {
  using nn::LayerSpec;
  return {LayerSpec::dense(4, 6),   LayerSpec::relu(),       LayerSpec::dense(6, 5, false),
          LayerSpec::batchnorm(1e-3), LayerSpec::relu(),     LayerSpec::dense(5, 5, false),
          LayerSpec::batchnorm(),   LayerSpec::dense(5, 3), LayerSpec::softmax_xent()};
}

inline nn::Batch random_batch(std::size_t rows, std::size_t dim, std::size_t classes, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  nn::Batch b{nn::Tensor({rows, dim}), {}};
  for (std::size_t i = 0; i < b.inputs.size(); ++i) b.inputs[i] = rng.normal();
  for (std::size_t i = 0; i < rows; ++i) b.labels.push_back(static_cast<std::int32_t>(rng.below(classes)));
  return b;
}

struct GroupCheck {
  std::string name;
  double rel_error = 0.0;
};

// Relative error ||analytic - numeric|| / (||analytic|| + ||numeric||) per
// group, numeric from central differences of forward_loss.
inline std::vector<GroupCheck> check_gradients(nn::ParamSet params, const nn::Batch& batch, double h = 1e-5) {
  const auto res = nn::forward_loss(params, batch);
  nn::backward(params, *res.cache);
  std::vector<GroupCheck> out;
  for (auto& g : params.groups) {
    double diff = 0.0, na = 0.0, nn_ = 0.0;
    for (std::size_t i = 0; i < g.param.size(); ++i) {
      const double saved = g.param[i];
      g.param[i] = saved + h;
      const double up = nn::forward_loss(params, batch).loss;
      g.param[i] = saved - h;
      const double down = nn::forward_loss(params, batch).loss;
      g.param[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = g.grad[i];
      diff += (analytic - numeric) * (analytic - numeric);
      na += analytic * analytic;
      nn_ += numeric * numeric;
    }
    const double denom = std::sqrt(na) + std::sqrt(nn_);
    out.push_back({g.name, denom == 0.0 ? 0.0 : std::sqrt(diff) / denom});
  }
  return out;
}

}  // namespace lbsgd::testing

#endif  // LBSGD_TESTS_GRAD_CHECK_H_
