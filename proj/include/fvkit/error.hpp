#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fvkit {

enum class ErrorCode {
  // corpus
  BadMagic,
  TruncatedFile,
  NonFiniteValue,
  ZeroDim,
  MalformedFile,
  ZeroNormRow,
  MissingColumn,
  DuplicateImageId,
  UnparsableField,
  IdMismatch,
  NotNormalized,
  // simsearch
  DimMismatch,
  KTooLarge,
  EmptyInput,
  // overlap
  InvalidPolicy,
  UnknownIdentity,
  UnknownPairId,
  ConflictingAnnotations,
  InvalidAnnotation,
  NotEnoughIdentities,
  // pairs
  UnknownAttribute,
  MissingExposure,
  MissingAge,
  EmptyPool,
  InsufficientCandidates,
  // folds
  IndivisibleCounts,
  InfeasiblePacking,
  // eval
  MissingEmbedding,
  DegenerateLabels,
  MissingFold,
  // io
  IoError,
};

std::string_view to_string(ErrorCode code);

// Domain error carrying a machine-checkable code. The CLI maps these to exit
// status 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fvkit
