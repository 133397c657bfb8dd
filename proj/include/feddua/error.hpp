/*
 * Copyright 2026 The FedDuA Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDDUA_ERROR_HPP
#define FEDDUA_ERROR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace feddua {

enum class ErrorCode {
  kDimensionMismatch,
  kNonFinite,
  kDomain,
  kEmptyInput,
  kInvalidArgument,
  kDegenerateDirection,
  kDegeneratePreconditioner,
  kDivergence,
  kSingularSystem,
  kInconclusive,
  kIo,
  kConfig,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kDomain: return "domain violation";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDegenerateDirection: return "degenerate direction";
    case ErrorCode::kDegeneratePreconditioner: return "degenerate preconditioner";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kSingularSystem: return "singular system";
    case ErrorCode::kInconclusive: return "inconclusive";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kConfig: return "config error";
  }
  return "unknown";
}

/// Structured error thrown across the library. `index()` names the first
/// offending coordinate when the failure is element-wise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message +
                           (index ? " (index " + std::to_string(*index) + ")" : "")),
        code_(code),
        index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace feddua

#endif  // FEDDUA_ERROR_HPP
