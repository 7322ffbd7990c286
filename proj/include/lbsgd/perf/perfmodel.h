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

#ifndef LBSGD_PERF_PERFMODEL_H_
#define LBSGD_PERF_PERFMODEL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lbsgd::perf {

struct ModelProfile {
  std::string name;
  std::int64_t num_params = 0;   // |W|
  double flops_per_image = 0.0;  // forward + backward, per example

  void validate() const;
};

// Alpha-beta-gamma machine description.
struct ClusterSpec {
  std::string name;
  std::int64_t procs = 1;
  double alpha = 0.0;  // seconds per message
  double beta = 0.0;   // seconds per word
  double gamma = 0.0;  // seconds per flop
  std::int64_t word_bytes = 4;
  std::optional<double> flops_per_second_total;

  void validate() const;
};

// Operation name -> picojoules.
using EnergyTable = std::map<std::string, double>;

enum class StagePayload { kFullModel, kModelOverProcs };
enum class CommEnergyClass { kDram, kSram, kRegister };

struct CostOptions {
  StagePayload payload = StagePayload::kFullModel;
  CommEnergyClass comm_energy = CommEnergyClass::kDram;
};

struct CostReport {
  std::int64_t iterations = 0;
  std::int64_t messages = 0;
  std::int64_t comm_volume_words = 0;
  double t_comp_per_iter = 0.0;
  double t_comm_per_iter = 0.0;  // log2(P) tree stages
  double t_comm_stage = 0.0;     // one stage: alpha + beta * payload
  double total_time = 0.0;       // iterations * (t_comp_per_iter + t_comm_per_iter)
  double total_flops = 0.0;
  double energy_joules = 0.0;
  std::optional<double> machine_time;  // total_flops / flops_per_second_total
  bool below_one_batch = false;        // B > E*n, zero iterations
};

struct IterationCount {
  std::int64_t count = 0;
  bool below_one_batch = false;
};

// floor(E * n / B); zero with the flag set when B > E * n.
IterationCount iterations(std::int64_t epochs, std::int64_t n, std::int64_t batch);

// |W| * iterations(E, n, B) words.
std::int64_t comm_volume(const ModelProfile& profile, std::int64_t epochs, std::int64_t n, std::int64_t batch);

// log2(P), with log2(1) == 0.
double tree_stages(std::int64_t procs);
// ceil(log2(P)) messages per iteration.
std::int64_t messages_per_iteration(std::int64_t procs);

struct IterationTime {
  double t_comp = 0.0;
  double t_comm = 0.0;  // per stage
  double t_iter = 0.0;  // t_comp + log2(P) * t_comm
};

// Throws DomainError when B is not divisible by P.
IterationTime iteration_time(const ModelProfile& profile, const ClusterSpec& spec, std::int64_t batch,
                             const CostOptions& options = {});

CostReport total_time(const ModelProfile& profile, const ClusterSpec& spec, std::int64_t epochs, std::int64_t n,
                      std::int64_t batch, const EnergyTable& energy, const CostOptions& options = {});

double total_flops(const ModelProfile& profile, std::int64_t epochs, std::int64_t n);

// flops_per_image / num_params.
double scaling_ratio(const ModelProfile& profile);

// Built-in constants.
const std::vector<ModelProfile>& model_presets();
const std::vector<ClusterSpec>& cluster_presets();
const EnergyTable& energy_preset();
// Row order of the energy table as printed.
const std::vector<std::string>& energy_order();

// Throws ConfigError for unknown names.
ModelProfile model_preset(const std::string& name);
ClusterSpec cluster_preset(const std::string& name);

inline constexpr double kP100Gamma = 0.9e-13;
// ResNet-50 per-image operation count quoted in prose, which differs from
// the 7.7e9 used in the scaling-ratio table.
inline constexpr double kResNet50ProseFlops = 7.72e9;
inline constexpr double kImageNetTrainImages = 1.28e6;
inline constexpr double kFastestMachineFlops = 200e15;

}  // namespace lbsgd::perf

#endif  // LBSGD_PERF_PERFMODEL_H_
