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

#include "lbsgd/harness/experiment.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lbsgd/error.h"
#include "lbsgd/harness/dataset.h"
#include "lbsgd/util/format.h"

namespace lbsgd::harness {

perf::ModelProfile profile_of(std::span<const nn::LayerSpec> network, const std::string& name) {
  const auto layers = nn::resolve_layers(network);
  perf::ModelProfile p{name, 0, 0.0};
  for (const auto& l : layers) {
    if (l.kind == nn::LayerKind::kDense) {
      const auto macs = static_cast<std::int64_t>(l.in_dim * l.out_dim);
      p.num_params += macs + (l.bias ? static_cast<std::int64_t>(l.out_dim) : 0);
      p.flops_per_image += 6.0 * static_cast<double>(macs);
    } else if (l.kind == nn::LayerKind::kBatchNorm) {
      p.num_params += 2 * static_cast<std::int64_t>(l.out_dim);
    }
  }
  return p;
}

std::filesystem::path resolve_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
    return std::filesystem::path(root) / p;
  }
  return p;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  return out;
}

void write_summary_json(const std::filesystem::path& path, const ExperimentConfig& config,
                        const ExperimentResult& r) {
  nlohmann::json j;
  j["status"] = r.completed() ? "completed" : "diverged";
  if (!r.completed()) {
    j["diverged_at"] = r.log.diverged_at;
    j["reason"] = r.log.divergence_reason;
  }
  j["iterations_run"] = r.log.rows.size();
  if (const auto acc = r.log.final_test_acc()) j["final_test_acc"] = *acc;
  j["seed"] = config.seed;
  j["dataset_seed"] = config.dataset.seed;
  j["cost"] = {{"iterations", r.cost.iterations},
               {"messages", r.cost.messages},
               {"comm_volume_words", r.cost.comm_volume_words},
               {"total_time_s", r.cost.total_time},
               {"total_flops", r.cost.total_flops},
               {"energy_joules", r.cost.energy_joules}};
  j["config"] = to_text(config);
  open_out(path) << j.dump(2) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  for (const auto& f : config.output.formats) {
    if (f != "csv" && f != "json") throw ConfigError("unknown output format '" + f + "'");
  }
  const optim::HyperParams hp = config.effective_hyper();
  const parallel::Dataset data = load_dataset(config.dataset);
  if (config.dataset.kind == "idx") {
    const auto layers = nn::resolve_layers(config.network);
    if (data.train.inputs.shape()[1] != layers.front().in_dim) {
      throw ConfigError("first layer expects width " + std::to_string(layers.front().in_dim) + " but " +
                        config.dataset.path + " has " + std::to_string(data.train.inputs.shape()[1]) +
                        " values per image");
    }
  }

  perf::ClusterSpec spec = perf::cluster_preset(config.cost_cluster);
  spec.procs = config.workers;
  const auto n = static_cast<std::int64_t>(data.train.size());

  ExperimentResult result;
  result.cost = perf::total_time(profile_of(config.network), spec, hp.epochs, n, hp.batch_size,
                                 perf::energy_preset());
  const parallel::ClusterRun run{static_cast<std::size_t>(config.workers), static_cast<std::size_t>(hp.batch_size),
                                 config.seed};
  parallel::TrainOptions topt;
  topt.record_steps = options.write_files;
  result.log = parallel::train(run, config.network, data, hp, topt);

  if (result.completed() && static_cast<std::int64_t>(result.log.rows.size()) != result.cost.iterations) {
    throw ConsistencyError("executed " + std::to_string(result.log.rows.size()) +
                           " iterations but the cost model counts " + std::to_string(result.cost.iterations));
  }

  if (!options.write_files) return result;
  result.output_dir = options.output_dir ? *options.output_dir : resolve_output_dir(config.output.dir);
  std::filesystem::create_directories(result.output_dir);
  const std::string text = to_text(config);
  {
    auto out = open_out(result.output_dir / "config.conf");
    out << text;
  }
  {
    auto out = open_out(result.output_dir / "train_log.csv");
    write_training_log(out, result.log, text);
  }
  {
    auto out = open_out(result.output_dir / "cost.csv");
    write_cost_report(out, result.cost, text);
  }
  {
    auto out = open_out(result.output_dir / "schedule.csv");
    std::istringstream echo(text);
    for (std::string line; std::getline(echo, line);) out << "#|" << (line.empty() ? "" : " ") << line << '\n';
    optim::write_schedule_csv(out, result.log.group_names, result.log.steps);
  }
  if (std::find(config.output.formats.begin(), config.output.formats.end(), "json") !=
      config.output.formats.end()) {
    write_summary_json(result.output_dir / "summary.json", config, result);
  }
  return result;
}

std::vector<SweepEntry> load_sweep_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".conf") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .conf files in '" + dir.string() + "'");
  std::vector<SweepEntry> entries;
  for (const auto& f : files) {
    try {
      entries.push_back({f.stem().string(), load_config(f)});
    } catch (const ConfigError& e) {
      throw ConfigError(f.filename().string() + ": " + e.what());
    }
  }
  return entries;
}

std::optional<std::int64_t> epochs_to_target(const parallel::TrainingLog& log, double target_acc) {
  for (const auto& r : log.rows) {
    if (r.test_acc && *r.test_acc >= target_acc) return r.epoch + 1;
  }
  return std::nullopt;
}

std::vector<SweepRow> sweep(const std::vector<SweepEntry>& entries, const std::filesystem::path& out_dir,
                            double target_acc, std::size_t jobs) {
  if (entries.empty()) throw ConfigError("sweep needs at least one config");
  const auto& first = entries.front();
  for (const auto& e : entries) {
    if (e.name.empty() || e.name.find_first_of(",\n/") != std::string::npos) {
      throw ConfigError("sweep entry name '" + e.name + "' must be non-empty without ',' or '/'");
    }
    if (e.config.hyper.epochs != first.config.hyper.epochs) {
      throw ConfigError(e.name + ": epochs " + std::to_string(e.config.hyper.epochs) + " differ from " + first.name +
                        "'s " + std::to_string(first.config.hyper.epochs));
    }
    if (!(e.config.dataset == first.config.dataset)) {
      throw ConfigError(e.name + ": dataset differs from " + first.name + "'s");
    }
    e.config.validate();
  }

  std::vector<SweepRow> rows(entries.size());
  std::vector<std::exception_ptr> errors(entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      try {
        const auto& e = entries[i];
        RunOptions opt;
        opt.output_dir = out_dir / e.name;
        const ExperimentResult r = run_experiment(e.config, opt);
        const optim::HyperParams hp = e.config.effective_hyper();
        SweepRow& row = rows[i];
        row.name = e.name;
        row.batch = hp.batch_size;
        row.workers = e.config.workers;
        row.lr = hp.base_lr;
        row.warmup_epochs = hp.warmup_epochs;
        row.lars = hp.lars_enabled;
        row.epochs = hp.epochs;
        row.status = r.completed() ? "completed" : "diverged@" + std::to_string(r.log.diverged_at);
        row.final_test_acc = r.log.final_test_acc();
        row.epochs_to_target = epochs_to_target(r.log, target_acc);
        row.iterations = r.cost.iterations;
        row.predicted_time_s = r.cost.total_time;
        row.comm_volume_words = r.cost.comm_volume_words;
        row.messages = r.cost.messages;
        row.energy_joules = r.cost.energy_joules;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, entries.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::filesystem::create_directories(out_dir);
  auto out = open_out(out_dir / "sweep.csv");
  write_sweep_csv(out, rows, target_acc);
  return rows;
}

}  // namespace lbsgd::harness
