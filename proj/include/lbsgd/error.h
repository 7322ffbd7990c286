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

#ifndef LBSGD_ERROR_H_
#define LBSGD_ERROR_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lbsgd {

// Root of every error thrown by the library. Subclasses carry the structured
// context (layer index, iteration, byte offset) the callers need to report.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  NumericError(std::size_t layer, const std::string& what)
      : Error("numeric overflow at layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t iteration, const std::string& what)
      : Error("diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

class ScheduleExhaustedError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::size_t record, const std::string& what)
      : Error(what + " (record " + std::to_string(record) + ")"), record_(record) {}
  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

}  // namespace lbsgd

#endif  // LBSGD_ERROR_H_
