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

#ifndef LBSGD_HARNESS_CONFIG_H_
#define LBSGD_HARNESS_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lbsgd/nn/network.h"
#include "lbsgd/optim/optim.h"

namespace lbsgd::harness {

struct DatasetConfig {
  std::string kind = "spirals";  // blobs | spirals | idx
  std::int64_t n = 10000;
  std::int64_t num_classes = 3;
  std::int64_t input_dim = 2;
  std::uint64_t seed = 1;
  double noise = 0.0;
  // idx only: image/label file pair; optional separate test pair.
  std::string path;
  std::string label_path;
  std::string test_path;
  std::string test_label_path;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::vector<std::string> formats = {"csv"};

  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

// Everything needed to reproduce one run.
//
// Text form: '[section]' headers followed by 'key = value' lines, '#'
// comments. Sections in canonical order: network, hyper, cluster, dataset,
// cost, output. The network section is an ordered list of 'layer = ...'
// lines:
//   layer = dense <in> <out> [nobias]
//   layer = batchnorm [eps]
//   layer = relu
//   layer = softmax_xent
// to_text() is canonical; parse_config(to_text(c)) == c and
// to_text(parse_config(t)) == t for canonical t.
struct ExperimentConfig {
  std::vector<nn::LayerSpec> network;
  optim::HyperParams hyper;
  // When > 0, hyper.base_lr is the rate for this batch size and the run uses
  // the linearly scaled rate for hyper.batch_size.
  std::int64_t lr_reference_batch = 0;
  std::int64_t workers = 1;
  std::uint64_t seed = 1;
  DatasetConfig dataset;
  std::string cost_cluster = "mellanox_fdr";
  OutputConfig output;

  // hyper with the linear scaling rule applied.
  optim::HyperParams effective_hyper() const;
  // Cross-field checks (network shape vs dataset, divisibility, ...).
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Throws ConfigError with the line number of the offending line.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_text(const ExperimentConfig& config);

// Desk-scale default: 2 -> 64 -> 64 -> C with batchnorm
// on the spirals task.
ExperimentConfig default_spirals_config();

}  // namespace lbsgd::harness

#endif  // LBSGD_HARNESS_CONFIG_H_
