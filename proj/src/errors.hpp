// errors.hpp — Error taxonomy shared by the library, the C API and the CLI.
//
// Every failure mode carries a stable machine-readable code. The C API maps
// these codes onto its status enum one-to-one; the CLI uses them as exit
// codes and prints the code string on stderr.

#pragma once

#include <stdexcept>
#include <string>

namespace qme {

enum class ErrorCode {
    kParseError = 1,
    kValidationError,
    kDimensionMismatch,
    kDomainError,
    kDecompositionFailure,
    kAmbiguousRank,
    kSupportViolation,
    kInfeasibleConstraint,
    kZeroEvidence,
    kNonConvergence,
    kRankDeficientPrior,
    kBadEpsilon,
    kBadProjectorFamily,
    kCompletionFailure,
    kInfeasibleTarget,
    kIoError,
    kCheckFailed,
    kInternalError,
};

// Stable snake_case identifier, e.g. "infeasible_constraint".
const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }
    const char* code_name() const { return error_code_name(code_); }

private:
    ErrorCode code_;
};

#define QME_DEFINE_ERROR(NAME, CODE)                          \
    class NAME : public Error {                               \
    public:                                                   \
        explicit NAME(const std::string& message)             \
            : Error(ErrorCode::CODE, message) {}              \
    }

QME_DEFINE_ERROR(ParseError, kParseError);
QME_DEFINE_ERROR(ValidationError, kValidationError);
QME_DEFINE_ERROR(DimensionMismatch, kDimensionMismatch);
QME_DEFINE_ERROR(DomainError, kDomainError);
QME_DEFINE_ERROR(DecompositionFailure, kDecompositionFailure);
QME_DEFINE_ERROR(AmbiguousRank, kAmbiguousRank);
QME_DEFINE_ERROR(SupportViolation, kSupportViolation);
QME_DEFINE_ERROR(InfeasibleConstraint, kInfeasibleConstraint);
QME_DEFINE_ERROR(ZeroEvidence, kZeroEvidence);
QME_DEFINE_ERROR(NonConvergence, kNonConvergence);
QME_DEFINE_ERROR(RankDeficientPrior, kRankDeficientPrior);
QME_DEFINE_ERROR(BadEpsilon, kBadEpsilon);
QME_DEFINE_ERROR(BadProjectorFamily, kBadProjectorFamily);
QME_DEFINE_ERROR(CompletionFailure, kCompletionFailure);
QME_DEFINE_ERROR(InfeasibleTarget, kInfeasibleTarget);
QME_DEFINE_ERROR(IoError, kIoError);

#undef QME_DEFINE_ERROR

}  // namespace qme
