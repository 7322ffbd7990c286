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

#ifndef LBSGD_HARNESS_DATASET_H_
#define LBSGD_HARNESS_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "lbsgd/harness/config.h"
#include "lbsgd/parallel/train.h"

namespace lbsgd::harness {

enum class SyntheticKind { kBlobs, kSpirals };

// Deterministic synthetic classification task with a stratified 90/10
// train/test split. Blobs: one isotropic Gaussian per class around centres on
// a sphere of radius 2 (linearly separable as noise -> 0). Spirals: C
// interleaved arms in the plane, one full turn each (input_dim must be 2).
parallel::Dataset gen_synthetic(SyntheticKind kind, std::int64_t n, std::int64_t num_classes,
                                std::int64_t input_dim, std::uint64_t seed, double noise);

// Loads an IDX image file (magic 0x00000803, big-endian dims) and its label
// file (magic 0x00000801). Pixels are scaled to [0, 1]. Throws FormatError
// with a byte offset on malformed input and ValidationError for labels
// outside [0, num_classes).
nn::Batch load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                   std::int64_t num_classes);

// Writers used by tests and by anyone converting data into the format.
void write_idx_images(const std::filesystem::path& path, std::uint32_t count, std::uint32_t rows,
                      std::uint32_t cols, const std::vector<std::uint8_t>& pixels);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

// Dataset described by a config section.
parallel::Dataset load_dataset(const DatasetConfig& config);

}  // namespace lbsgd::harness

#endif  // LBSGD_HARNESS_DATASET_H_
