#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cardioseg {

enum class ErrorCode {
  // ingest
  BadMagic,
  UnsupportedDatatype,
  UnsupportedDimensions,
  TruncatedData,
  MissingPreamble,
  MissingRequiredTag,
  PixelDataSizeMismatch,
  UnsupportedTransferSyntax,
  TooFewPoints,
  MalformedLine,
  AmbiguousOrdering,
  LayoutMismatch,
  // preprocess
  DegenerateOutput,
  AllZeroImage,
  // metrics
  DimensionMismatch,
  EmptySet,
  // model
  InvalidConfig,
  ShapeMismatch,
  EmptyTrainingSet,
  NonFiniteLoss,
  UnknownKey,
  InvalidMask,
  // io / pipeline
  BadFormat,
  MissingDataset,
  AuditMismatch,
  IoError,
  Usage,
};

std::string_view to_string(ErrorCode code);

/// Process exit code for an error: 1 usage, 2 data error, 3 numeric failure.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Re-throws `e` with `context` prepended to its message, keeping the code.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context);

}  // namespace cardioseg
