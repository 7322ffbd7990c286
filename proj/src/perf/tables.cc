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

#include "lbsgd/perf/tables.h"

#include <ostream>

#include "lbsgd/error.h"
#include "lbsgd/util/format.h"

namespace lbsgd::perf {

using util::format_double;

std::vector<IterationTableRow> iteration_table(const ModelProfile& model, const ClusterSpec& cluster,
                                               std::int64_t epochs, std::int64_t n, std::int64_t local_batch,
                                               const std::vector<std::int64_t>& batches) {
  if (local_batch <= 0) throw DomainError("local batch must be positive");
  std::vector<IterationTableRow> rows;
  for (std::int64_t b : batches) {
    if (b % local_batch != 0) {
      throw DomainError("batch " + std::to_string(b) + " is not a multiple of " + std::to_string(local_batch));
    }
    IterationTableRow r;
    r.batch = b;
    r.epochs = epochs;
    r.iterations = iterations(epochs, n, b).count;
    r.procs = b / local_batch;
    const std::string count = std::to_string(r.iterations);
    if (r.procs == 1) {
      r.t_iter_expr = "t_comp";
      r.total_time_expr = count + " x t_comp";
    } else {
      r.t_iter_expr = "t_comp + log(" + std::to_string(r.procs) + ")t_comm";
      r.total_time_expr = count + " x (" + r.t_iter_expr + ")";
    }
    ClusterSpec spec = cluster;
    spec.procs = r.procs;
    r.time = iteration_time(model, spec, b);
    r.total_time = static_cast<double>(r.iterations) * r.time.t_iter;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<IterationTableRow> imagenet_iteration_table(const ModelProfile& model, const ClusterSpec& cluster) {
  return iteration_table(model, cluster, 100, 1'280'000, 512, {512, 1024, 2048, 4096, 8192, 1'280'000});
}

void write_iteration_table_csv(std::ostream& os, const std::vector<IterationTableRow>& rows) {
  os << "batch,epochs,iterations,procs,t_iter,total_time,t_comp_s,t_comm_s,t_iter_s,total_time_s\n";
  for (const auto& r : rows) {
    os << r.batch << ',' << r.epochs << ',' << r.iterations << ',' << r.procs << ',' << r.t_iter_expr << ','
       << r.total_time_expr << ',' << format_double(r.time.t_comp) << ',' << format_double(r.time.t_comm) << ','
       << format_double(r.time.t_iter) << ',' << format_double(r.total_time) << '\n';
  }
}

void write_scaling_table_csv(std::ostream& os, const std::vector<ModelProfile>& models) {
  os << "model,num_params,flops_per_image,scaling_ratio\n";
  for (const auto& m : models) {
    os << m.name << ',' << m.num_params << ',' << format_double(m.flops_per_image) << ','
       << format_double(scaling_ratio(m)) << '\n';
  }
}

void write_network_table_csv(std::ostream& os, const std::vector<ClusterSpec>& clusters) {
  os << "network,alpha_s,beta_s,gamma_s\n";
  for (const auto& c : clusters) {
    os << c.name << ',' << format_double(c.alpha) << ',' << format_double(c.beta) << ',' << format_double(c.gamma)
       << '\n';
  }
}

void write_energy_table_csv(std::ostream& os, const EnergyTable& table, const std::vector<std::string>& order) {
  os << "operation,energy_pj\n";
  for (const auto& name : order) {
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError("energy table has no entry '" + name + "'");
    os << name << ',' << format_double(it->second) << '\n';
  }
}

void write_presets(std::ostream& os) {
  bool first = true;
  auto section = [&](const std::string& header) {
    if (!first) os << '\n';
    first = false;
    os << '[' << header << "]\n";
  };
  for (const auto& m : model_presets()) {
    section("model " + m.name);
    os << "num_params = " << m.num_params << '\n';
    os << "flops_per_image = " << format_double(m.flops_per_image) << '\n';
  }
  for (const auto& c : cluster_presets()) {
    section("cluster " + c.name);
    os << "alpha = " << format_double(c.alpha) << '\n';
    os << "beta = " << format_double(c.beta) << '\n';
    os << "gamma = " << format_double(c.gamma) << '\n';
    os << "word_bytes = " << c.word_bytes << '\n';
    if (c.flops_per_second_total) os << "flops_per_second_total = " << format_double(*c.flops_per_second_total) << '\n';
  }
  section("energy");
  for (const auto& name : energy_order()) os << name << " = " << format_double(energy_preset().at(name)) << '\n';
}

}  // namespace lbsgd::perf
