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

#ifndef LBSGD_PERF_TABLES_H_
#define LBSGD_PERF_TABLES_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lbsgd/perf/perfmodel.h"

namespace lbsgd::perf {

// One row of the fixed-epoch iteration table: P grows with B so the local
// batch stays at batch / procs.
struct IterationTableRow {
  std::int64_t batch = 0;
  std::int64_t epochs = 0;
  std::int64_t iterations = 0;
  std::int64_t procs = 0;
  std::string t_iter_expr;
  std::string total_time_expr;
  IterationTime time;
  double total_time = 0.0;
};

// Rows for the given batch sizes with P = B / local_batch. Numeric columns
// use the supplied model and cluster (whose procs field is overridden).
std::vector<IterationTableRow> iteration_table(const ModelProfile& model, const ClusterSpec& cluster,
                                               std::int64_t epochs, std::int64_t n, std::int64_t local_batch,
                                               const std::vector<std::int64_t>& batches);

// The ImageNet setting: E=100, n=1,280,000, 512 per processor.
std::vector<IterationTableRow> imagenet_iteration_table(const ModelProfile& model, const ClusterSpec& cluster);

void write_iteration_table_csv(std::ostream& os, const std::vector<IterationTableRow>& rows);
void write_scaling_table_csv(std::ostream& os, const std::vector<ModelProfile>& models);
void write_network_table_csv(std::ostream& os, const std::vector<ClusterSpec>& clusters);
void write_energy_table_csv(std::ostream& os, const EnergyTable& table, const std::vector<std::string>& order);

// Presets as a config fragment ('[model NAME]', '[cluster NAME]', '[energy]'
// sections of key = value lines).
void write_presets(std::ostream& os);

}  // namespace lbsgd::perf

#endif  // LBSGD_PERF_TABLES_H_
