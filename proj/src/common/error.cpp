#include "echoflag/error.hpp"

namespace echoflag {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::TrimTooLarge: return "TrimTooLarge";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MisalignedRecords: return "MisalignedRecords";
    case ErrorCode::EmptySweep: return "EmptySweep";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::DegenerateKernelMatrix: return "DegenerateKernelMatrix";
    case ErrorCode::ObjectiveFailure: return "ObjectiveFailure";
    case ErrorCode::PoolExhausted: return "PoolExhausted";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace echoflag
