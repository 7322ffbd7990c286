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

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lbsgd/error.h"
#include "lbsgd/harness/config.h"
#include "lbsgd/harness/experiment.h"
#include "lbsgd/harness/report.h"
#include "lbsgd/perf/perfmodel.h"
#include "lbsgd/perf/tables.h"
#include "lbsgd/util/format.h"

namespace {

using namespace lbsgd;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitConfig = 3;
constexpr int kExitFormat = 4;

int cmd_train(const std::string& path, const std::optional<std::string>& out_dir) {
  const harness::ExperimentConfig config = harness::load_config(path);
  harness::RunOptions opt;
  if (out_dir) opt.output_dir = harness::resolve_output_dir(*out_dir);
  const harness::ExperimentResult r = harness::run_experiment(config, opt);
  const auto acc = r.log.final_test_acc();
  if (r.completed()) {
    std::cout << "completed " << r.log.rows.size() << " iterations";
    if (acc) std::cout << ", test accuracy " << util::format_double(*acc);
    std::cout << "\n";
  } else {
    std::cout << "diverged at iteration " << r.log.diverged_at << ": " << r.log.divergence_reason << "\n";
  }
  std::cout << "predicted time " << util::format_double(r.cost.total_time) << " s on " << config.cost_cluster
            << " with P=" << config.workers << "\n";
  std::cout << "wrote " << r.output_dir.string() << "\n";
  return r.completed() ? kExitOk : kExitDiverged;
}

int cmd_sweep(const std::string& dir, const std::optional<std::string>& out_dir, double target, std::size_t jobs) {
  const auto entries = harness::load_sweep_dir(dir);
  const std::filesystem::path out = harness::resolve_output_dir(out_dir.value_or("sweep"));
  const auto rows = harness::sweep(entries, out, target, jobs);
  harness::write_sweep_csv(std::cout, rows, target);
  for (const auto& r : rows) {
    if (r.status != "completed") return kExitDiverged;
  }
  return kExitOk;
}

int cmd_cost(const std::string& model, const std::string& cluster, std::int64_t batch, std::int64_t epochs,
             std::int64_t n, std::int64_t procs, bool split_payload) {
  perf::ClusterSpec spec = perf::cluster_preset(cluster);
  spec.procs = procs;
  perf::CostOptions opt;
  if (split_payload) opt.payload = perf::StagePayload::kModelOverProcs;
  const perf::CostReport r =
      perf::total_time(perf::model_preset(model), spec, epochs, n, batch, perf::energy_preset(), opt);
  const std::string echo = "model = " + model + "\ncluster = " + cluster + "\nbatch = " + std::to_string(batch) +
                           "\nepochs = " + std::to_string(epochs) + "\nn = " + std::to_string(n) +
                           "\nprocs = " + std::to_string(procs) +
                           "\npayload = " + (split_payload ? "model_over_procs" : "full_model") + "\n";
  harness::write_cost_report(std::cout, r, echo);
  return kExitOk;
}

void emit(const std::optional<std::string>& out_dir, const std::string& name,
          const std::function<void(std::ostream&)>& body) {
  if (!out_dir) {
    std::cout << "# " << name << "\n";
    body(std::cout);
    std::cout << "\n";
    return;
  }
  const auto dir = harness::resolve_output_dir(*out_dir);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw UsageError("cannot write " + (dir / name).string());
  body(out);
  std::cout << "wrote " << (dir / name).string() << "\n";
}

int cmd_tables(const std::optional<std::string>& out_dir, const std::string& model, const std::string& cluster) {
  const auto rows = perf::imagenet_iteration_table(perf::model_preset(model), perf::cluster_preset(cluster));
  emit(out_dir, "iterations.csv", [&](std::ostream& os) { perf::write_iteration_table_csv(os, rows); });
  emit(out_dir, "scaling_ratio.csv", [](std::ostream& os) { perf::write_scaling_table_csv(os, perf::model_presets()); });
  emit(out_dir, "networks.csv", [](std::ostream& os) { perf::write_network_table_csv(os, perf::cluster_presets()); });
  emit(out_dir, "energy.csv", [](std::ostream& os) {
    perf::write_energy_table_csv(os, perf::energy_preset(), perf::energy_order());
  });
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-batch synchronous SGD simulator and cost model"};
  app.require_subcommand(1);

  std::string train_config;
  std::optional<std::string> train_out;
  auto* train = app.add_subcommand("train", "Run one experiment config");
  train->add_option("config", train_config, "Config file")->required();
  train->add_option("--out", train_out, "Output directory (overrides [output] dir)");

  std::string sweep_dir;
  std::optional<std::string> sweep_out;
  double sweep_target = 0.9;
  std::size_t sweep_jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run every .conf in a directory and compare");
  sweep->add_option("config-dir", sweep_dir, "Directory of config files")->required();
  sweep->add_option("--out", sweep_out, "Output directory (default: sweep)");
  sweep->add_option("--target", sweep_target, "Test accuracy target for epochs-to-target")->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--jobs", sweep_jobs, "Configs run concurrently")->check(CLI::PositiveNumber);

  std::string cost_model;
  std::string cost_cluster;
  std::int64_t cost_batch = 0;
  std::int64_t cost_epochs = 0;
  std::int64_t cost_n = 0;
  std::int64_t cost_procs = 1;
  bool cost_split = false;
  auto* cost = app.add_subcommand("cost", "Price a run with the alpha-beta-gamma model");
  cost->add_option("--model", cost_model, "Model preset")->required();
  cost->add_option("--cluster", cost_cluster, "Cluster preset")->required();
  cost->add_option("--batch", cost_batch, "Global batch size")->required();
  cost->add_option("--epochs", cost_epochs, "Epochs")->required();
  cost->add_option("--n", cost_n, "Training set size")->required();
  cost->add_option("--procs", cost_procs, "Processors (default 1)");
  cost->add_flag("--split-payload", cost_split, "Each tree stage carries |W|/P words instead of |W|");

  std::optional<std::string> tables_out;
  std::string tables_model = "resnet50";
  std::string tables_cluster = "mellanox_fdr";
  auto* tables = app.add_subcommand("tables", "Emit the iteration, scaling-ratio, network and energy tables");
  tables->add_option("--out", tables_out, "Write CSV files into this directory instead of stdout");
  tables->add_option("--model", tables_model, "Model preset for the numeric time columns");
  tables->add_option("--cluster", tables_cluster, "Cluster preset for the numeric time columns");

  auto* presets = app.add_subcommand("presets", "Print built-in presets as a config fragment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_config, train_out);
    if (*sweep) return cmd_sweep(sweep_dir, sweep_out, sweep_target, sweep_jobs);
    if (*cost) return cmd_cost(cost_model, cost_cluster, cost_batch, cost_epochs, cost_n, cost_procs, cost_split);
    if (*tables) return cmd_tables(tables_out, tables_model, tables_cluster);
    if (*presets) {
      perf::write_presets(std::cout);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PartitionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const ValidationError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
