#include "errors.hpp"

namespace qme {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::kParseError: return "parse_error";
        case ErrorCode::kValidationError: return "validation_error";
        case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
        case ErrorCode::kDomainError: return "domain_error";
        case ErrorCode::kDecompositionFailure: return "decomposition_failure";
        case ErrorCode::kAmbiguousRank: return "ambiguous_rank";
        case ErrorCode::kSupportViolation: return "support_violation";
        case ErrorCode::kInfeasibleConstraint: return "infeasible_constraint";
        case ErrorCode::kZeroEvidence: return "zero_evidence";
        case ErrorCode::kNonConvergence: return "nonconvergence";
        case ErrorCode::kRankDeficientPrior: return "rank_deficient_prior";
        case ErrorCode::kBadEpsilon: return "bad_epsilon";
        case ErrorCode::kBadProjectorFamily: return "bad_projector_family";
        case ErrorCode::kCompletionFailure: return "completion_failure";
        case ErrorCode::kInfeasibleTarget: return "infeasible_target";
        case ErrorCode::kIoError: return "io_error";
        case ErrorCode::kCheckFailed: return "check_failed";
        case ErrorCode::kInternalError: return "internal_error";
    }
    return "internal_error";
}

}  // namespace qme
