// Copyright 2026 The PENME Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace penme {

enum class ErrorKind {
  kParse,
  kValidation,
  kFormat,
  kDomain,
  kLookup,
  kConfig,
  kState,
  kArgument,
  kRuntime,
};

inline const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kLookup: return "lookup error";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kState: return "state error";
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kRuntime: return "runtime error";
  }
  return "error";
}

// Every failure raised by the library is a penme::Error; the kind decides the
// CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Binary decoding failure at a known byte offset.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::uint64_t offset)
      : Error(ErrorKind::kFormat,
              message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// JSONL decoding failure on a 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Exit codes: 0 ok, 2 usage, 3 data/format error, 4 runtime failure.
inline int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument:
      return 2;
    case ErrorKind::kParse:
    case ErrorKind::kValidation:
    case ErrorKind::kFormat:
    case ErrorKind::kDomain:
    case ErrorKind::kLookup:
    case ErrorKind::kConfig:
      return 3;
    case ErrorKind::kState:
    case ErrorKind::kRuntime:
      return 4;
  }
  return 4;
}

}  // namespace penme
