#include "cardioseg/core/error.hpp"

namespace cardioseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::UnsupportedDimensions: return "UnsupportedDimensions";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::MissingPreamble: return "MissingPreamble";
    case ErrorCode::MissingRequiredTag: return "MissingRequiredTag";
    case ErrorCode::PixelDataSizeMismatch: return "PixelDataSizeMismatch";
    case ErrorCode::UnsupportedTransferSyntax: return "UnsupportedTransferSyntax";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::AmbiguousOrdering: return "AmbiguousOrdering";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::DegenerateOutput: return "DegenerateOutput";
    case ErrorCode::AllZeroImage: return "AllZeroImage";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::InvalidMask: return "InvalidMask";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::MissingDataset: return "MissingDataset";
    case ErrorCode::AuditMismatch: return "AuditMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::InvalidConfig:
      return 1;
    case ErrorCode::NonFiniteLoss:
      return 3;
    default:
      return 2;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void rethrow_with_context(const Error& e, const std::string& context) {
  std::string what = e.what();
  // strip the "<Code>: " prefix so it is not repeated
  const auto prefix = std::string(to_string(e.code())) + ": ";
  if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
  throw Error(e.code(), context + ": " + what);
}

}  // namespace cardioseg
