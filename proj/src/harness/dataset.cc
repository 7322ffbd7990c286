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

#include "lbsgd/harness/dataset.h"

#include <cmath>
#include <fstream>
#include <numbers>

#include "lbsgd/error.h"
#include "lbsgd/rng.h"

namespace lbsgd::harness {

namespace {

constexpr double kBlobRadius = 2.0;
constexpr double kSpiralTurns = 1.0;

struct Example {
  std::vector<double> x;
  std::int32_t label;
};

nn::Batch to_batch(const std::vector<Example>& examples, std::size_t dim) {
  nn::Batch b{nn::Tensor({examples.size(), dim}), {}};
  b.labels.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) b.inputs.at(i, k) = examples[i].x[k];
    b.labels.push_back(examples[i].label);
  }
  return b;
}

void shuffle_examples(std::vector<Example>& v, std::uint64_t seed) {
  const auto perm = random_permutation(v.size(), seed);
  std::vector<Example> out;
  out.reserve(v.size());
  for (std::size_t i : perm) out.push_back(std::move(v[i]));
  v = std::move(out);
}

}  // namespace

parallel::Dataset gen_synthetic(SyntheticKind kind, std::int64_t n, std::int64_t num_classes,
                                std::int64_t input_dim, std::uint64_t seed, double noise) {
  if (num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (input_dim < 1) throw ConfigError("synthetic data needs input_dim >= 1");
  if (n < num_classes * 10) throw ConfigError("synthetic data needs n >= 10 * num_classes");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be finite and >= 0");
  if (kind == SyntheticKind::kSpirals && input_dim != 2) throw ConfigError("spirals are two-dimensional");

  const auto classes = static_cast<std::size_t>(num_classes);
  const auto dim = static_cast<std::size_t>(input_dim);
  Xoshiro256 rng(derive_seed(seed, 11));

  std::vector<std::vector<double>> centres;
  if (kind == SyntheticKind::kBlobs) {
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<double> v(dim);
      double norm = 0.0;
      while (norm < 1e-6) {
        norm = 0.0;
        for (double& x : v) {
          x = rng.normal();
          norm += x * x;
        }
        norm = std::sqrt(norm);
      }
      for (double& x : v) x *= kBlobRadius / norm;
      centres.push_back(std::move(v));
    }
  }

  std::vector<Example> train;
  std::vector<Example> test;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t count = static_cast<std::size_t>(n) / classes + (c < static_cast<std::size_t>(n) % classes ? 1 : 0);
    for (std::size_t k = 0; k < count; ++k) {
      Example e{std::vector<double>(dim), static_cast<std::int32_t>(c)};
      if (kind == SyntheticKind::kBlobs) {
        for (std::size_t d = 0; d < dim; ++d) e.x[d] = centres[c][d] + noise * rng.normal();
      } else {
        const double t = rng.uniform();
        const double r = 0.05 + 0.95 * t;
        const double theta = 2.0 * std::numbers::pi * (static_cast<double>(c) / static_cast<double>(classes) +
                                                       kSpiralTurns * t);
        e.x[0] = r * std::cos(theta) + noise * rng.normal();
        e.x[1] = r * std::sin(theta) + noise * rng.normal();
      }
      (k % 10 == 9 ? test : train).push_back(std::move(e));
    }
  }
  shuffle_examples(train, derive_seed(seed, 12));
  shuffle_examples(test, derive_seed(seed, 13));
  return {to_batch(train, dim), to_batch(test, dim)};
}

namespace {

std::uint32_t read_be32(std::ifstream& in, std::uint64_t offset, const std::string& file) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError(offset, file + ": truncated header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::vector<std::uint8_t> read_payload(std::ifstream& in, std::uint64_t offset, std::uint64_t expected,
                                       const std::string& file) {
  const std::uint64_t size = std::filesystem::file_size(file);
  const std::uint64_t available = size > offset ? size - offset : 0;
  if (available < expected) {
    throw FormatError(size, file + ": truncated payload, expected " + std::to_string(expected) +
                                " bytes but found " + std::to_string(available));
  }
  std::vector<std::uint8_t> buf(expected);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expected));
  const auto got = static_cast<std::uint64_t>(in.gcount());
  if (got != expected) {
    throw FormatError(offset + got, file + ": truncated payload, expected " + std::to_string(expected) +
                                        " bytes but found " + std::to_string(got));
  }
  return buf;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

nn::Batch load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                   std::int64_t num_classes) {
  const std::string ifile = images.string();
  const std::string lfile = labels.string();
  std::ifstream img(images, std::ios::binary);
  if (!img) throw FormatError(0, "cannot open " + ifile);
  const std::uint32_t magic = read_be32(img, 0, ifile);
  if (magic != kImageMagic) throw FormatError(0, ifile + ": bad image magic " + std::to_string(magic));
  const std::uint32_t count = read_be32(img, 4, ifile);
  const std::uint32_t rows = read_be32(img, 8, ifile);
  const std::uint32_t cols = read_be32(img, 12, ifile);
  if (count == 0 || rows == 0 || cols == 0) throw FormatError(4, ifile + ": zero dimension");
  const std::uint64_t dim = std::uint64_t{rows} * cols;
  const auto pixels = read_payload(img, 16, dim * count, ifile);

  std::ifstream lab(labels, std::ios::binary);
  if (!lab) throw FormatError(0, "cannot open " + lfile);
  const std::uint32_t lmagic = read_be32(lab, 0, lfile);
  if (lmagic != kLabelMagic) throw FormatError(0, lfile + ": bad label magic " + std::to_string(lmagic));
  const std::uint32_t lcount = read_be32(lab, 4, lfile);
  if (lcount != count) {
    throw FormatError(4, lfile + ": " + std::to_string(lcount) + " labels for " + std::to_string(count) + " images");
  }
  const auto raw_labels = read_payload(lab, 8, count, lfile);

  nn::Batch b{nn::Tensor({count, static_cast<std::size_t>(dim)}), {}};
  for (std::size_t i = 0; i < pixels.size(); ++i) b.inputs[i] = static_cast<double>(pixels[i]) / 255.0;
  b.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (static_cast<std::int64_t>(raw_labels[i]) >= num_classes) {
      throw ValidationError(i, lfile + ": label " + std::to_string(raw_labels[i]) + " is not below num_classes " +
                                   std::to_string(num_classes));
    }
    b.labels.push_back(static_cast<std::int32_t>(raw_labels[i]));
  }
  return b;
}

void write_idx_images(const std::filesystem::path& path, std::uint32_t count, std::uint32_t rows,
                      std::uint32_t cols, const std::vector<std::uint8_t>& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  write_be32(out, kImageMagic);
  write_be32(out, count);
  write_be32(out, rows);
  write_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

parallel::Dataset load_dataset(const DatasetConfig& config) {
  if (config.kind == "blobs" || config.kind == "spirals") {
    return gen_synthetic(config.kind == "blobs" ? SyntheticKind::kBlobs : SyntheticKind::kSpirals, config.n,
                         config.num_classes, config.input_dim, config.seed, config.noise);
  }
  if (config.kind != "idx") throw ConfigError("unknown dataset kind '" + config.kind + "'");
  if (config.path.empty() || config.label_path.empty()) throw ConfigError("idx dataset needs path and label_path");
  for (const auto& p : {config.path, config.label_path}) {
    if (!std::filesystem::exists(p)) throw ConfigError("dataset file '" + p + "' does not exist");
  }
  nn::Batch all = load_idx(config.path, config.label_path, config.num_classes);
  if (!config.test_path.empty()) {
    return {std::move(all), load_idx(config.test_path, config.test_label_path, config.num_classes)};
  }
  // Hold out the last tenth as the test split.
  const std::size_t n = all.size();
  const std::size_t cut = n - n / 10;
  if (cut == 0 || cut == n) return {std::move(all), {}};
  return {nn::slice_batch(all, 0, cut), nn::slice_batch(all, cut, n)};
}

}  // namespace lbsgd::harness
