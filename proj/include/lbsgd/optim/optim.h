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

#ifndef LBSGD_OPTIM_OPTIM_H_
#define LBSGD_OPTIM_OPTIM_H_

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "lbsgd/nn/network.h"

namespace lbsgd::optim {

inline constexpr double kDefaultLarsTrust = 0.001;

struct HyperParams {
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double poly_power = 2.0;
  std::int64_t warmup_epochs = 0;
  std::int64_t epochs = 1;
  std::int64_t batch_size = 32;
  bool lars_enabled = false;
  double lars_trust = kDefaultLarsTrust;
  std::set<nn::ParamCategory> lars_skip = {nn::ParamCategory::kBias, nn::ParamCategory::kNormScale,
                                           nn::ParamCategory::kNormShift};

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct ScheduleState {
  std::int64_t iteration = 0;
  std::int64_t max_iterations = 1;
  std::int64_t iterations_per_epoch = 1;

  friend bool operator==(const ScheduleState&, const ScheduleState&) = default;
};

// floor(E * n / B) total iterations and floor(n / B) per epoch. Throws
// ConfigError when the training set is smaller than one batch.
ScheduleState make_schedule(const HyperParams& hp, std::int64_t num_examples);

std::int64_t warmup_iterations(const HyperParams& hp, const ScheduleState& st);

// base_lr * new_batch / base_batch.
double linear_scaled_lr(double base_lr, std::int64_t base_batch, std::int64_t new_batch);

// Learning rate for st.iteration: a linear ramp base_lr * (i + 1) / W over the
// first W warmup iterations, then base_lr * (1 - progress)^poly_power over the
// remaining budget. Both pieces equal base_lr at the boundary.
double scheduled_lr(const HyperParams& hp, const ScheduleState& st);

struct LocalLr {
  double value = 1.0;
  bool fallback = false;  // set when the denominator vanished and 1.0 was substituted
};

// trust * |w| / (|g| + weight_decay * |w|), layer-wise adaptive rate scaling.
LocalLr lars_local_lr(const nn::Tensor& param, const nn::Tensor& grad, double weight_decay, double trust);

struct StepReport {
  std::int64_t iteration = 0;  // the iteration this step consumed
  double lr = 0.0;
  std::vector<double> lambdas;  // one per group, 1.0 where LARS is off or skipped
  std::vector<bool> fallbacks;
};

// One momentum-SGD update with coupled weight decay and optional LARS, using
// the gradients already in params' grad buffers:
//   g = grad + wd * w;  v = m * v + (lambda * lr) * g;  w = w - v.
// Nothing is written if any updated value would be non-finite.
StepReport sgd_step(nn::ParamSet& params, const HyperParams& hp, ScheduleState& st);

struct LambdaSummary {
  double min = 1.0;
  double median = 1.0;
  double max = 1.0;
};

// Summary over the groups LARS actually scaled (all ones when none were).
LambdaSummary summarize_lambdas(const StepReport& report, const nn::ParamSet& params, const HyperParams& hp);

// Per-iteration schedule dump: iteration, lr, then one lambda column per group.
void write_schedule_csv(std::ostream& os, const std::vector<std::string>& group_names,
                        const std::vector<StepReport>& steps);

}  // namespace lbsgd::optim

#endif  // LBSGD_OPTIM_OPTIM_H_
