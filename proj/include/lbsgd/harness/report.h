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

#ifndef LBSGD_HARNESS_REPORT_H_
#define LBSGD_HARNESS_REPORT_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lbsgd/parallel/train.h"
#include "lbsgd/perf/perfmodel.h"

namespace lbsgd::harness {

// CSV files written by the harness start with '#' comment lines. Lines that
// begin with "#| " carry the resolved config verbatim, so every file can
// reproduce its own rows; "# key: value" lines carry run metadata. Then one
// header row and the data rows. Doubles use shortest round-trip text.

void write_training_log(std::ostream& os, const parallel::TrainingLog& log, std::string_view config_text);

struct ParsedLog {
  parallel::TrainingLog log;  // rows and status; group names and step reports are not stored here
  std::string config_text;
};
ParsedLog read_training_log(std::istream& is);

void write_cost_report(std::ostream& os, const perf::CostReport& report, std::string_view config_text);
perf::CostReport read_cost_report(std::istream& is);

// Embedded config text from a file's comment header.
std::string read_config_echo(std::istream& is);

struct SweepRow {
  std::string name;
  std::int64_t batch = 0;
  std::int64_t workers = 1;
  double lr = 0.0;
  std::int64_t warmup_epochs = 0;
  bool lars = false;
  std::int64_t epochs = 0;
  std::string status;
  std::optional<double> final_test_acc;
  std::optional<std::int64_t> epochs_to_target;
  std::int64_t iterations = 0;
  double predicted_time_s = 0.0;
  std::int64_t comm_volume_words = 0;
  std::int64_t messages = 0;
  double energy_joules = 0.0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, double target_acc);
std::vector<SweepRow> read_sweep_csv(std::istream& is);

}  // namespace lbsgd::harness

#endif  // LBSGD_HARNESS_REPORT_H_
