#pragma once

#include <stdexcept>
#include <string>

namespace ndup {

enum class ErrorCode {
  DecodeError,
  InvalidDimension,
  InvalidRegion,
  TooSmall,
  InsufficientSample,
  KindMismatch,
  DuplicateImageId,
  EmptyQuery,
  MultiFeatureIndex,
  CorruptIndex,
  CorruptPcaModel,
  CorruptFeatureFile,
  CorruptModel,
  DegenerateLabels,
  ModeMismatch,
  EmptyInput,
  MissingSource,
  NoValidRows,
  InvalidArgument,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Every recoverable failure in the library is reported as an Error carrying
/// one of the codes above; callers branch on code(), not on the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ndup
