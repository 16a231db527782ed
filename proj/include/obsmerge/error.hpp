#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace obsmerge {

enum class ErrorCode {
  MalformedInput,
  UnknownRegime,
  DegenerateDistribution,
  InsufficientPoints,
  InsufficientMembers,
  NotSingleSample,
  EmptyClass,
  OverlapAmbiguity,
  EmptyCorpus,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for every recoverable failure in the library; the
/// code distinguishes the cause so callers (the CLI in particular) can map
/// failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace obsmerge
