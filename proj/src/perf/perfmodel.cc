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

#include "lbsgd/perf/perfmodel.h"

#include <cmath>

#include "lbsgd/error.h"

namespace lbsgd::perf {

void ModelProfile::validate() const {
  if (num_params <= 0) throw DomainError("model '" + name + "' needs a positive parameter count");
  if (!(flops_per_image > 0.0 && std::isfinite(flops_per_image))) {
    throw DomainError("model '" + name + "' needs a positive flop count");
  }
}

void ClusterSpec::validate() const {
  if (procs < 1) throw DomainError("cluster '" + name + "' needs P >= 1");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw DomainError("cluster '" + name + "' needs alpha, beta >= 0");
  if (!(gamma > 0.0)) throw DomainError("cluster '" + name + "' needs gamma > 0");
  if (word_bytes <= 0) throw DomainError("cluster '" + name + "' needs a positive word size");
}

IterationCount iterations(std::int64_t epochs, std::int64_t n, std::int64_t batch) {
  if (epochs <= 0 || n <= 0 || batch <= 0) throw DomainError("epochs, n and batch must be positive");
  const std::int64_t examples = epochs * n;
  if (batch > examples) return {0, true};
  return {examples / batch, false};
}

std::int64_t comm_volume(const ModelProfile& profile, std::int64_t epochs, std::int64_t n, std::int64_t batch) {
  profile.validate();
  return profile.num_params * iterations(epochs, n, batch).count;
}

double tree_stages(std::int64_t procs) {
  if (procs < 1) throw DomainError("P must be >= 1");
  return procs == 1 ? 0.0 : std::log2(static_cast<double>(procs));
}

std::int64_t messages_per_iteration(std::int64_t procs) {
  if (procs < 1) throw DomainError("P must be >= 1");
  std::int64_t stages = 0;
  while ((std::int64_t{1} << stages) < procs) ++stages;
  return stages;
}

IterationTime iteration_time(const ModelProfile& profile, const ClusterSpec& spec, std::int64_t batch,
                             const CostOptions& options) {
  profile.validate();
  spec.validate();
  if (batch <= 0 || batch % spec.procs != 0) {
    throw DomainError("batch " + std::to_string(batch) + " is not divisible by P=" + std::to_string(spec.procs));
  }
  IterationTime t;
  const double local = static_cast<double>(batch / spec.procs);
  t.t_comp = profile.flops_per_image * local * spec.gamma;
  double payload = static_cast<double>(profile.num_params);
  if (options.payload == StagePayload::kModelOverProcs) payload /= static_cast<double>(spec.procs);
  t.t_comm = spec.alpha + spec.beta * payload;
  t.t_iter = t.t_comp + tree_stages(spec.procs) * t.t_comm;
  return t;
}

double total_flops(const ModelProfile& profile, std::int64_t epochs, std::int64_t n) {
  return static_cast<double>(epochs * n) * profile.flops_per_image;
}

namespace {

double energy_price(const EnergyTable& table, const std::string& key) {
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("energy table has no entry '" + key + "'");
  if (!(it->second > 0.0)) throw ConfigError("energy entry '" + key + "' must be positive");
  return it->second;
}

const char* comm_energy_key(CommEnergyClass c) {
  switch (c) {
    case CommEnergyClass::kDram: return "32 bit DRAM access";
    case CommEnergyClass::kSram: return "32 bit SRAM access";
    case CommEnergyClass::kRegister: return "32 bit register access";
  }
  return "32 bit DRAM access";
}

constexpr double kPicojoule = 1e-12;

}  // namespace

CostReport total_time(const ModelProfile& profile, const ClusterSpec& spec, std::int64_t epochs, std::int64_t n,
                      std::int64_t batch, const EnergyTable& energy, const CostOptions& options) {
  const IterationTime t = iteration_time(profile, spec, batch, options);
  const IterationCount count = iterations(epochs, n, batch);
  CostReport r;
  r.iterations = count.count;
  r.below_one_batch = count.below_one_batch;
  r.messages = r.iterations * messages_per_iteration(spec.procs);
  r.comm_volume_words = profile.num_params * r.iterations;
  r.t_comp_per_iter = t.t_comp;
  r.t_comm_stage = t.t_comm;
  r.t_comm_per_iter = tree_stages(spec.procs) * t.t_comm;
  r.total_time = static_cast<double>(r.iterations) * (r.t_comp_per_iter + r.t_comm_per_iter);
  r.total_flops = total_flops(profile, epochs, n);
  // Flops priced as an even mix of float adds and multiplies.
  const double flop_pj = 0.5 * (energy_price(energy, "32 bit float add") + energy_price(energy, "32 bit float multiply"));
  const double word_pj = energy_price(energy, comm_energy_key(options.comm_energy));
  r.energy_joules = (r.total_flops * flop_pj + static_cast<double>(r.comm_volume_words) * word_pj) * kPicojoule;
  if (spec.flops_per_second_total) r.machine_time = r.total_flops / *spec.flops_per_second_total;
  return r;
}

double scaling_ratio(const ModelProfile& profile) {
  profile.validate();
  return profile.flops_per_image / static_cast<double>(profile.num_params);
}

const std::vector<ModelProfile>& model_presets() {
  static const std::vector<ModelProfile> presets = {
      {"alexnet", 61'000'000, 1.5e9},
      {"resnet50", 25'000'000, 7.7e9},
  };
  return presets;
}

const std::vector<ClusterSpec>& cluster_presets() {
  static const std::vector<ClusterSpec> presets = {
      {"mellanox_fdr", 1, 0.7e-6, 0.2e-9, kP100Gamma, 4, std::nullopt},
      {"intel_qdr", 1, 1.2e-6, 0.3e-9, kP100Gamma, 4, std::nullopt},
      {"intel_10gbe", 1, 7.2e-6, 0.9e-9, kP100Gamma, 4, std::nullopt},
      {"p100", 1, 0.0, 0.0, kP100Gamma, 4, std::nullopt},
      {"peak_200pflops", 1, 0.0, 0.0, kP100Gamma, 4, kFastestMachineFlops},
  };
  return presets;
}

const std::vector<std::string>& energy_order() {
  static const std::vector<std::string> order = {
      "32 bit int add",      "32 bit float add",      "32 bit register access", "32 bit int multiply",
      "32 bit float multiply", "32 bit SRAM access", "32 bit DRAM access",
  };
  return order;
}

const EnergyTable& energy_preset() {
  static const EnergyTable table = {
      {"32 bit int add", 0.1},      {"32 bit float add", 0.9},      {"32 bit register access", 1.0},
      {"32 bit int multiply", 3.1}, {"32 bit float multiply", 3.7}, {"32 bit SRAM access", 5.0},
      {"32 bit DRAM access", 640.0},
  };
  return table;
}

ModelProfile model_preset(const std::string& name) {
  for (const auto& m : model_presets()) {
    if (m.name == name) return m;
  }
  throw ConfigError("unknown model preset '" + name + "'");
}

ClusterSpec cluster_preset(const std::string& name) {
  for (const auto& c : cluster_presets()) {
    if (c.name == name) return c;
  }
  throw ConfigError("unknown cluster preset '" + name + "'");
}

}  // namespace lbsgd::perf
