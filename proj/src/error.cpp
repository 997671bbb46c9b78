#include "fvkit/error.hpp"

namespace fvkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ZeroDim: return "ZeroDim";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::ZeroNormRow: return "ZeroNormRow";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::DuplicateImageId: return "DuplicateImageId";
    case ErrorCode::UnparsableField: return "UnparsableField";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::UnknownIdentity: return "UnknownIdentity";
    case ErrorCode::UnknownPairId: return "UnknownPairId";
    case ErrorCode::ConflictingAnnotations: return "ConflictingAnnotations";
    case ErrorCode::InvalidAnnotation: return "InvalidAnnotation";
    case ErrorCode::NotEnoughIdentities: return "NotEnoughIdentities";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::MissingExposure: return "MissingExposure";
    case ErrorCode::MissingAge: return "MissingAge";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::IndivisibleCounts: return "IndivisibleCounts";
    case ErrorCode::InfeasiblePacking: return "InfeasiblePacking";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::MissingFold: return "MissingFold";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fvkit
