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

#include "lbsgd/harness/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "lbsgd/error.h"
#include "lbsgd/util/format.h"

namespace lbsgd::harness {

using util::format_double;

optim::HyperParams ExperimentConfig::effective_hyper() const {
  optim::HyperParams hp = hyper;
  if (lr_reference_batch > 0) hp.base_lr = optim::linear_scaled_lr(hyper.base_lr, lr_reference_batch, hyper.batch_size);
  return hp;
}

void ExperimentConfig::validate() const {
  const std::vector<nn::LayerSpec> layers = nn::resolve_layers(network);
  effective_hyper().validate();
  if (lr_reference_batch < 0) throw ConfigError("lr_reference_batch must be >= 0");
  if (workers < 1) throw ConfigError("cluster.workers must be >= 1");
  if (hyper.batch_size % workers != 0) {
    throw ConfigError("batch_size " + std::to_string(hyper.batch_size) + " is not divisible by " +
                      std::to_string(workers) + " workers");
  }
  if (dataset.kind != "blobs" && dataset.kind != "spirals" && dataset.kind != "idx") {
    throw ConfigError("unknown dataset kind '" + dataset.kind + "'");
  }
  if (dataset.kind != "idx") {
    if (layers.front().in_dim != static_cast<std::size_t>(dataset.input_dim)) {
      throw ConfigError("first layer expects width " + std::to_string(layers.front().in_dim) +
                        " but dataset.input_dim is " + std::to_string(dataset.input_dim));
    }
    if (layers.back().out_dim != static_cast<std::size_t>(dataset.num_classes)) {
      throw ConfigError("network emits " + std::to_string(layers.back().out_dim) + " classes but dataset has " +
                        std::to_string(dataset.num_classes));
    }
  } else if (dataset.path.empty() || dataset.label_path.empty()) {
    throw ConfigError("idx dataset needs path and label_path");
  }
}

namespace {

std::string layer_to_text(const nn::LayerSpec& s) {
  switch (s.kind) {
    case nn::LayerKind::kDense: {
      std::string t = "dense " + std::to_string(s.in_dim) + " " + std::to_string(s.out_dim);
      if (!s.bias) t += " nobias";
      return t;
    }
    case nn::LayerKind::kBatchNorm: return "batchnorm " + format_double(s.eps);
    case nn::LayerKind::kRelu: return "relu";
    case nn::LayerKind::kSoftmaxXent: return "softmax_xent";
  }
  return "";
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExperimentConfig run() {
    ExperimentConfig cfg;
    cfg.network.clear();
    std::istringstream in{std::string(text_)};
    std::string raw;
    std::string section;
    while (std::getline(in, raw)) {
      ++line_;
      std::string_view line = util::trim(raw);
      if (line.empty() || line.front() == '#') continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail("unterminated section header");
        section = std::string(util::trim(line.substr(1, line.size() - 2)));
        static const std::set<std::string> known = {"network", "hyper", "cluster", "dataset", "cost", "output"};
        if (!known.contains(section)) fail("unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) fail("expected 'key = value'");
      const std::string key(util::trim(line.substr(0, eq)));
      const std::string value(util::trim(line.substr(eq + 1)));
      if (section.empty()) fail("key '" + key + "' outside any section");
      if (!(section == "network" && key == "layer") && !seen_.insert(section + "." + key).second) {
        fail("duplicate key '" + key + "' in [" + section + "]");
      }
      assign(cfg, section, key, value);
    }
    return cfg;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  double as_double(const std::string& v) const {
    const auto d = util::parse_double(v);
    if (!d) fail("'" + v + "' is not a number");
    return *d;
  }
  std::int64_t as_int(const std::string& v) const {
    const auto i = util::parse_int(v);
    if (!i) fail("'" + v + "' is not an integer");
    return *i;
  }
  std::uint64_t as_uint(const std::string& v) const {
    const auto i = util::parse_uint(v);
    if (!i) fail("'" + v + "' is not a non-negative integer");
    return *i;
  }
  bool as_bool(const std::string& v) const {
    if (v == "true") return true;
    if (v == "false") return false;
    fail("'" + v + "' is not true/false");
  }

  nn::LayerSpec as_layer(const std::string& v) const {
    std::vector<std::string> tok;
    std::istringstream ts(v);
    for (std::string t; ts >> t;) tok.push_back(t);
    if (tok.empty()) fail("empty layer");
    const auto kind = nn::parse_layer_kind(tok[0]);
    if (!kind) fail("unknown layer kind '" + tok[0] + "'");
    switch (*kind) {
      case nn::LayerKind::kDense: {
        if (tok.size() < 3 || tok.size() > 4) fail("dense needs <in> <out> [nobias]");
        if (tok.size() == 4 && tok[3] != "nobias") fail("unexpected '" + tok[3] + "'");
        const std::int64_t in = as_int(tok[1]);
        const std::int64_t out = as_int(tok[2]);
        if (in <= 0 || out <= 0) fail("dense dimensions must be positive");
        return nn::LayerSpec::dense(static_cast<std::size_t>(in), static_cast<std::size_t>(out), tok.size() == 3);
      }
      case nn::LayerKind::kBatchNorm:
        if (tok.size() > 2) fail("batchnorm takes at most an eps");
        return nn::LayerSpec::batchnorm(tok.size() == 2 ? as_double(tok[1]) : nn::kDefaultBatchNormEps);
      case nn::LayerKind::kRelu:
        if (tok.size() != 1) fail("relu takes no arguments");
        return nn::LayerSpec::relu();
      case nn::LayerKind::kSoftmaxXent:
        if (tok.size() != 1) fail("softmax_xent takes no arguments");
        return nn::LayerSpec::softmax_xent();
    }
    fail("unreachable");
  }

  void assign(ExperimentConfig& c, const std::string& section, const std::string& key, const std::string& v) {
    if (section == "network") {
      if (key != "layer") fail("unknown key '" + key + "' in [network]");
      c.network.push_back(as_layer(v));
    } else if (section == "hyper") {
      auto& h = c.hyper;
      if (key == "base_lr") h.base_lr = as_double(v);
      else if (key == "lr_reference_batch") c.lr_reference_batch = as_int(v);
      else if (key == "momentum") h.momentum = as_double(v);
      else if (key == "weight_decay") h.weight_decay = as_double(v);
      else if (key == "poly_power") h.poly_power = as_double(v);
      else if (key == "warmup_epochs") h.warmup_epochs = as_int(v);
      else if (key == "epochs") h.epochs = as_int(v);
      else if (key == "batch_size") h.batch_size = as_int(v);
      else if (key == "lars") h.lars_enabled = as_bool(v);
      else if (key == "lars_trust") h.lars_trust = as_double(v);
      else if (key == "lars_skip") {
        h.lars_skip.clear();
        if (!v.empty()) {
          for (const auto& item : util::split(v, ',')) {
            const auto cat = nn::parse_param_category(util::trim(item));
            if (!cat) fail("unknown parameter category '" + item + "'");
            h.lars_skip.insert(*cat);
          }
        }
      } else fail("unknown key '" + key + "' in [hyper]");
    } else if (section == "cluster") {
      if (key == "workers") c.workers = as_int(v);
      else if (key == "seed") c.seed = as_uint(v);
      else fail("unknown key '" + key + "' in [cluster]");
    } else if (section == "dataset") {
      auto& d = c.dataset;
      if (key == "kind") d.kind = v;
      else if (key == "n") d.n = as_int(v);
      else if (key == "num_classes") d.num_classes = as_int(v);
      else if (key == "input_dim") d.input_dim = as_int(v);
      else if (key == "seed") d.seed = as_uint(v);
      else if (key == "noise") d.noise = as_double(v);
      else if (key == "path") d.path = v;
      else if (key == "label_path") d.label_path = v;
      else if (key == "test_path") d.test_path = v;
      else if (key == "test_label_path") d.test_label_path = v;
      else fail("unknown key '" + key + "' in [dataset]");
    } else if (section == "cost") {
      if (key == "cluster") c.cost_cluster = v;
      else fail("unknown key '" + key + "' in [cost]");
    } else if (section == "output") {
      if (key == "dir") c.output.dir = v;
      else if (key == "formats") {
        c.output.formats.clear();
        if (!v.empty()) {
          for (const auto& f : util::split(v, ',')) c.output.formats.emplace_back(util::trim(f));
        }
      } else fail("unknown key '" + key + "' in [output]");
    }
  }

  std::string_view text_;
  std::size_t line_ = 0;
  std::set<std::string> seen_;
};

void put(std::ostringstream& os, const std::string& key, const std::string& value) {
  os << key << " =";
  if (!value.empty()) os << ' ' << value;
  os << '\n';
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) { return Parser(text).run(); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[network]\n";
  for (const auto& l : c.network) put(os, "layer", layer_to_text(l));
  const auto& h = c.hyper;
  os << "\n[hyper]\n";
  put(os, "base_lr", format_double(h.base_lr));
  put(os, "lr_reference_batch", std::to_string(c.lr_reference_batch));
  put(os, "momentum", format_double(h.momentum));
  put(os, "weight_decay", format_double(h.weight_decay));
  put(os, "poly_power", format_double(h.poly_power));
  put(os, "warmup_epochs", std::to_string(h.warmup_epochs));
  put(os, "epochs", std::to_string(h.epochs));
  put(os, "batch_size", std::to_string(h.batch_size));
  put(os, "lars", h.lars_enabled ? "true" : "false");
  put(os, "lars_trust", format_double(h.lars_trust));
  std::vector<std::string> skip;
  for (auto cat : h.lars_skip) skip.emplace_back(nn::to_string(cat));
  put(os, "lars_skip", join(skip));
  os << "\n[cluster]\n";
  put(os, "workers", std::to_string(c.workers));
  put(os, "seed", std::to_string(c.seed));
  const auto& d = c.dataset;
  os << "\n[dataset]\n";
  put(os, "kind", d.kind);
  put(os, "n", std::to_string(d.n));
  put(os, "num_classes", std::to_string(d.num_classes));
  put(os, "input_dim", std::to_string(d.input_dim));
  put(os, "seed", std::to_string(d.seed));
  put(os, "noise", format_double(d.noise));
  put(os, "path", d.path);
  put(os, "label_path", d.label_path);
  put(os, "test_path", d.test_path);
  put(os, "test_label_path", d.test_label_path);
  os << "\n[cost]\n";
  put(os, "cluster", c.cost_cluster);
  os << "\n[output]\n";
  put(os, "dir", c.output.dir);
  put(os, "formats", join(c.output.formats));
  return os.str();
}

ExperimentConfig default_spirals_config() {
  ExperimentConfig c;
  c.network = {nn::LayerSpec::dense(2, 64), nn::LayerSpec::batchnorm(), nn::LayerSpec::relu(),
               nn::LayerSpec::dense(64, 64), nn::LayerSpec::batchnorm(), nn::LayerSpec::relu(),
               nn::LayerSpec::dense(64, 3),  nn::LayerSpec::softmax_xent()};
  c.hyper.base_lr = 0.1;
  c.hyper.momentum = 0.9;
  c.hyper.weight_decay = 0.0005;
  c.hyper.poly_power = 2.0;
  c.hyper.warmup_epochs = 0;
  c.hyper.epochs = 50;
  c.hyper.batch_size = 32;
  c.lr_reference_batch = 32;
  c.workers = 1;
  c.seed = 1;
  c.dataset.kind = "spirals";
  c.dataset.n = 10000;
  c.dataset.num_classes = 3;
  c.dataset.input_dim = 2;
  c.dataset.seed = 1;
  c.dataset.noise = 0.05;
  c.output.dir = "out/spirals";
  return c;
}

}  // namespace lbsgd::harness
