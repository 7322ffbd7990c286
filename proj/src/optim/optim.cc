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

#include "lbsgd/optim/optim.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "lbsgd/error.h"
#include "lbsgd/util/format.h"

namespace lbsgd::optim {

void HyperParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(finite(base_lr) && base_lr > 0.0)) throw ConfigError("base_lr must be finite and > 0");
  if (!(finite(momentum) && momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(finite(weight_decay) && weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(finite(poly_power) && poly_power > 0.0)) throw ConfigError("poly_power must be > 0");
  if (epochs <= 0) throw ConfigError("epochs must be > 0");
  if (batch_size <= 0) throw ConfigError("batch_size must be > 0");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) throw ConfigError("warmup_epochs must be in [0, epochs)");
  if (!(finite(lars_trust) && lars_trust > 0.0)) throw ConfigError("lars_trust must be > 0");
}

ScheduleState make_schedule(const HyperParams& hp, std::int64_t num_examples) {
  hp.validate();
  if (num_examples < hp.batch_size) {
    throw ConfigError("training set of " + std::to_string(num_examples) + " examples is smaller than batch size " +
                      std::to_string(hp.batch_size));
  }
  ScheduleState st;
  st.iterations_per_epoch = num_examples / hp.batch_size;
  st.max_iterations = hp.epochs * num_examples / hp.batch_size;
  st.iteration = 0;
  return st;
}

std::int64_t warmup_iterations(const HyperParams& hp, const ScheduleState& st) {
  return hp.warmup_epochs * st.iterations_per_epoch;
}

double linear_scaled_lr(double base_lr, std::int64_t base_batch, std::int64_t new_batch) {
  if (base_batch <= 0 || new_batch <= 0) throw DomainError("batch sizes must be positive");
  return base_lr * (static_cast<double>(new_batch) / static_cast<double>(base_batch));
}

double scheduled_lr(const HyperParams& hp, const ScheduleState& st) {
  if (st.iteration < 0 || st.max_iterations <= 0) throw DomainError("invalid schedule state");
  if (st.iteration > st.max_iterations) {
    throw ScheduleExhaustedError("iteration " + std::to_string(st.iteration) + " exceeds budget of " +
                                 std::to_string(st.max_iterations));
  }
  const std::int64_t warmup = warmup_iterations(hp, st);
  if (st.iteration < warmup) {
    return hp.base_lr * (static_cast<double>(st.iteration + 1) / static_cast<double>(warmup));
  }
  const double span = static_cast<double>(st.max_iterations - warmup);
  const double progress = static_cast<double>(st.iteration - warmup) / span;
  return hp.base_lr * std::pow(1.0 - progress, hp.poly_power);
}

LocalLr lars_local_lr(const nn::Tensor& param, const nn::Tensor& grad, double weight_decay, double trust) {
  if (param.shape() != grad.shape()) throw DomainError("param and grad shapes differ");
  const double w_norm = param.l2_norm();
  if (w_norm == 0.0) return {0.0, false};
  const double denom = grad.l2_norm() + weight_decay * w_norm;
  if (denom == 0.0) return {1.0, true};
  return {trust * (w_norm / denom), false};
}

StepReport sgd_step(nn::ParamSet& params, const HyperParams& hp, ScheduleState& st) {
  if (st.iteration >= st.max_iterations) {
    throw ScheduleExhaustedError("no iterations left (iteration " + std::to_string(st.iteration) + " of " +
                                 std::to_string(st.max_iterations) + ")");
  }
  StepReport report;
  report.iteration = st.iteration;
  report.lr = scheduled_lr(hp, st);
  report.lambdas.assign(params.groups.size(), 1.0);
  report.fallbacks.assign(params.groups.size(), false);

  std::vector<std::vector<double>> new_param(params.groups.size());
  std::vector<std::vector<double>> new_mom(params.groups.size());
  for (std::size_t gi = 0; gi < params.groups.size(); ++gi) {
    const nn::ParamGroup& g = params.groups[gi];
    if (hp.lars_enabled && !hp.lars_skip.contains(g.category)) {
      const LocalLr local = lars_local_lr(g.param, g.grad, hp.weight_decay, hp.lars_trust);
      report.lambdas[gi] = local.value;
      report.fallbacks[gi] = local.fallback;
    }
    const double scale = report.lambdas[gi] * report.lr;
    const std::size_t n = g.param.size();
    new_param[gi].resize(n);
    new_mom[gi].resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double step_dir = g.grad[k] + hp.weight_decay * g.param[k];
      const double v = hp.momentum * g.momentum[k] + scale * step_dir;
      const double w = g.param[k] - v;
      if (!std::isfinite(v) || !std::isfinite(w)) {
        throw DivergenceError(st.iteration, "non-finite update in group '" + g.name + "'");
      }
      new_mom[gi][k] = v;
      new_param[gi][k] = w;
    }
  }
  for (std::size_t gi = 0; gi < params.groups.size(); ++gi) {
    nn::ParamGroup& g = params.groups[gi];
    std::copy(new_param[gi].begin(), new_param[gi].end(), g.param.data());
    std::copy(new_mom[gi].begin(), new_mom[gi].end(), g.momentum.data());
  }
  ++st.iteration;
  return report;
}

LambdaSummary summarize_lambdas(const StepReport& report, const nn::ParamSet& params, const HyperParams& hp) {
  std::vector<double> scaled;
  if (hp.lars_enabled) {
    for (std::size_t gi = 0; gi < params.groups.size() && gi < report.lambdas.size(); ++gi) {
      if (!hp.lars_skip.contains(params.groups[gi].category)) scaled.push_back(report.lambdas[gi]);
    }
  }
  if (scaled.empty()) return {};
  std::sort(scaled.begin(), scaled.end());
  const std::size_t n = scaled.size();
  const double median = n % 2 == 1 ? scaled[n / 2] : 0.5 * (scaled[n / 2 - 1] + scaled[n / 2]);
  return {scaled.front(), median, scaled.back()};
}

void write_schedule_csv(std::ostream& os, const std::vector<std::string>& group_names,
                        const std::vector<StepReport>& steps) {
  os << "iteration,lr";
  for (const auto& name : group_names) os << ",lambda:" << name;
  os << '\n';
  for (const auto& s : steps) {
    os << s.iteration << ',' << util::format_double(s.lr);
    for (double l : s.lambdas) os << ',' << util::format_double(l);
    os << '\n';
  }
}

}  // namespace lbsgd::optim
