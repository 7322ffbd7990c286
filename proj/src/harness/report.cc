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

#include "lbsgd/harness/report.h"

#include <istream>
#include <ostream>
#include <sstream>

#include "lbsgd/error.h"
#include "lbsgd/util/format.h"

namespace lbsgd::harness {

using util::format_double;

namespace {

constexpr std::string_view kConfigPrefix = "#|";
constexpr std::string_view kLogHeader =
    "epoch,iteration,lr,loss,train_acc,test_acc,lambda_min,lambda_med,lambda_max,wall_ms";
constexpr std::string_view kCostHeader =
    "iterations,messages,comm_volume_words,t_comp_per_iter_s,t_comm_per_iter_s,t_comm_stage_s,total_time_s,"
    "total_flops,energy_joules,machine_time_s,below_one_batch";
constexpr std::string_view kSweepHeader =
    "name,batch,workers,lr,warmup_epochs,lars,epochs,status,final_test_acc,epochs_to_target,iterations,"
    "predicted_time_s,comm_volume_words,messages,energy_joules";

void write_config_echo(std::ostream& os, std::string_view config_text) {
  std::istringstream in{std::string(config_text)};
  for (std::string line; std::getline(in, line);) {
    os << kConfigPrefix;
    if (!line.empty()) os << ' ' << line;
    os << '\n';
  }
}

// Splits a file into config echo, "# key: value" metadata and CSV lines.
struct Sections {
  std::string config;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> lines;
};

Sections read_sections(std::istream& is) {
  Sections s;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.starts_with(kConfigPrefix)) {
      std::string_view rest = std::string_view(line).substr(kConfigPrefix.size());
      if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
      s.config += rest;
      s.config += '\n';
    } else if (line.starts_with("#")) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        s.meta.emplace_back(std::string(util::trim(std::string_view(line).substr(1, colon - 1))),
                            std::string(util::trim(std::string_view(line).substr(colon + 1))));
      }
    } else if (!line.empty()) {
      s.lines.push_back(line);
    }
  }
  return s;
}

void expect_header(const Sections& s, std::string_view header) {
  if (s.lines.empty() || s.lines.front() != header) throw FormatError(0, "unexpected CSV header");
}

double num(const std::string& field, std::size_t row) {
  const auto v = util::parse_double(field);
  if (!v) throw ValidationError(row, "bad number '" + field + "'");
  return *v;
}

std::int64_t integer(const std::string& field, std::size_t row) {
  const auto v = util::parse_int(field);
  if (!v) throw ValidationError(row, "bad integer '" + field + "'");
  return *v;
}

std::vector<std::string> fields(const std::string& line, std::size_t expected, std::size_t row) {
  auto f = util::split(line, ',');
  if (f.size() != expected) {
    throw ValidationError(row, "expected " + std::to_string(expected) + " fields, found " + std::to_string(f.size()));
  }
  return f;
}

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

void write_training_log(std::ostream& os, const parallel::TrainingLog& log, std::string_view config_text) {
  os << "# lbsgd training log\n";
  write_config_echo(os, config_text);
  if (log.status == parallel::RunStatus::kCompleted) {
    os << "# status: completed\n";
  } else {
    os << "# status: diverged\n";
    os << "# diverged_at: " << log.diverged_at << '\n';
    os << "# reason: " << log.divergence_reason << '\n';
  }
  os << kLogHeader << '\n';
  for (const auto& r : log.rows) {
    os << r.epoch << ',' << r.iteration << ',' << format_double(r.lr) << ',' << format_double(r.loss) << ','
       << format_double(r.train_acc) << ',' << opt_double(r.test_acc) << ',' << format_double(r.lambda_min) << ','
       << format_double(r.lambda_med) << ',' << format_double(r.lambda_max) << ',' << format_double(r.wall_ms)
       << '\n';
  }
}

ParsedLog read_training_log(std::istream& is) {
  const Sections s = read_sections(is);
  expect_header(s, kLogHeader);
  ParsedLog out;
  out.config_text = s.config;
  for (const auto& [key, value] : s.meta) {
    if (key == "status") {
      if (value == "completed") out.log.status = parallel::RunStatus::kCompleted;
      else if (value == "diverged") out.log.status = parallel::RunStatus::kDiverged;
      else throw FormatError(0, "unknown status '" + value + "'");
    } else if (key == "diverged_at") {
      out.log.diverged_at = integer(value, 0);
    } else if (key == "reason") {
      out.log.divergence_reason = value;
    }
  }
  for (std::size_t i = 1; i < s.lines.size(); ++i) {
    const auto f = fields(s.lines[i], 10, i);
    parallel::LogRow r;
    r.epoch = integer(f[0], i);
    r.iteration = integer(f[1], i);
    r.lr = num(f[2], i);
    r.loss = num(f[3], i);
    r.train_acc = num(f[4], i);
    if (!f[5].empty()) r.test_acc = num(f[5], i);
    r.lambda_min = num(f[6], i);
    r.lambda_med = num(f[7], i);
    r.lambda_max = num(f[8], i);
    r.wall_ms = num(f[9], i);
    out.log.rows.push_back(r);
  }
  return out;
}

void write_cost_report(std::ostream& os, const perf::CostReport& r, std::string_view config_text) {
  os << "# lbsgd cost report\n";
  write_config_echo(os, config_text);
  os << kCostHeader << '\n';
  os << r.iterations << ',' << r.messages << ',' << r.comm_volume_words << ',' << format_double(r.t_comp_per_iter)
     << ',' << format_double(r.t_comm_per_iter) << ',' << format_double(r.t_comm_stage) << ','
     << format_double(r.total_time) << ',' << format_double(r.total_flops) << ',' << format_double(r.energy_joules)
     << ',' << opt_double(r.machine_time) << ',' << (r.below_one_batch ? "true" : "false") << '\n';
}

perf::CostReport read_cost_report(std::istream& is) {
  const Sections s = read_sections(is);
  expect_header(s, kCostHeader);
  if (s.lines.size() != 2) throw FormatError(0, "cost report must have exactly one row");
  const auto f = fields(s.lines[1], 11, 1);
  perf::CostReport r;
  r.iterations = integer(f[0], 1);
  r.messages = integer(f[1], 1);
  r.comm_volume_words = integer(f[2], 1);
  r.t_comp_per_iter = num(f[3], 1);
  r.t_comm_per_iter = num(f[4], 1);
  r.t_comm_stage = num(f[5], 1);
  r.total_time = num(f[6], 1);
  r.total_flops = num(f[7], 1);
  r.energy_joules = num(f[8], 1);
  if (!f[9].empty()) r.machine_time = num(f[9], 1);
  r.below_one_batch = f[10] == "true";
  return r;
}

std::string read_config_echo(std::istream& is) { return read_sections(is).config; }

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, double target_acc) {
  os << "# lbsgd sweep\n";
  os << "# target_acc: " << format_double(target_acc) << '\n';
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    os << r.name << ',' << r.batch << ',' << r.workers << ',' << format_double(r.lr) << ',' << r.warmup_epochs << ','
       << (r.lars ? "true" : "false") << ',' << r.epochs << ',' << r.status << ',' << opt_double(r.final_test_acc)
       << ',' << (r.epochs_to_target ? std::to_string(*r.epochs_to_target) : std::string()) << ',' << r.iterations
       << ',' << format_double(r.predicted_time_s) << ',' << r.comm_volume_words << ',' << r.messages << ','
       << format_double(r.energy_joules) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& is) {
  const Sections s = read_sections(is);
  expect_header(s, kSweepHeader);
  std::vector<SweepRow> rows;
  for (std::size_t i = 1; i < s.lines.size(); ++i) {
    const auto f = fields(s.lines[i], 15, i);
    SweepRow r;
    r.name = f[0];
    r.batch = integer(f[1], i);
    r.workers = integer(f[2], i);
    r.lr = num(f[3], i);
    r.warmup_epochs = integer(f[4], i);
    r.lars = f[5] == "true";
    r.epochs = integer(f[6], i);
    r.status = f[7];
    if (!f[8].empty()) r.final_test_acc = num(f[8], i);
    if (!f[9].empty()) r.epochs_to_target = integer(f[9], i);
    r.iterations = integer(f[10], i);
    r.predicted_time_s = num(f[11], i);
    r.comm_volume_words = integer(f[12], i);
    r.messages = integer(f[13], i);
    r.energy_joules = num(f[14], i);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace lbsgd::harness
