/*
 * Copyright 2026 The simpool Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License"); you
 * may not use this file except in compliance with the License.  You may
 * obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace simpool {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchedulingInPast : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class CapacityExceeded : public Error {
 public:
  using Error::Error;
};

class SlotNotClaimed : public Error {
 public:
  using Error::Error;
};

class RequirementsMismatch : public Error {
 public:
  using Error::Error;
};

class NotRunning : public Error {
 public:
  using Error::Error;
};

class ProviderInactive : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Carries a JSON-pointer style location ("/pools/0/ccb/max_connections").
class ValidationError : public Error {
 public:
  ValidationError(std::string path, std::string reason)
      : Error(path + ": " + reason), path_(std::move(path)), reason_(std::move(reason)) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class AssertionFailure : public Error {
 public:
  explicit AssertionFailure(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "expectation(s) violated:";
    for (const auto& s : v) {
      out += "\n  - " + s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace simpool
