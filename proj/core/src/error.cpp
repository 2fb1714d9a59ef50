#include "ndup/error.hpp"

namespace ndup {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::InvalidRegion: return "InvalidRegion";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::InsufficientSample: return "InsufficientSample";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::DuplicateImageId: return "DuplicateImageId";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::MultiFeatureIndex: return "MultiFeatureIndex";
    case ErrorCode::CorruptIndex: return "CorruptIndex";
    case ErrorCode::CorruptPcaModel: return "CorruptPcaModel";
    case ErrorCode::CorruptFeatureFile: return "CorruptFeatureFile";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingSource: return "MissingSource";
    case ErrorCode::NoValidRows: return "NoValidRows";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace ndup
