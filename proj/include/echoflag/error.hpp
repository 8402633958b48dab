#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace echoflag {

enum class ErrorCode {
  BadMagic,
  TruncatedPayload,
  DimensionOverflow,
  TrimTooLarge,
  EmptyInput,
  InvalidConfig,
  MisalignedRecords,
  EmptySweep,
  SingleClassDataset,
  DimensionMismatch,
  EmptyTestSet,
  DegenerateKernelMatrix,
  ObjectiveFailure,
  PoolExhausted,
  Io,
  Parse,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every library failure is raised as an Error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace echoflag
