#include "survkit/errors.hpp"

namespace survkit {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingHeader: return "MissingHeader";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateStatic: return "DuplicateStatic";
    case ErrorCode::NonPositiveTime: return "NonPositiveTime";
    case ErrorCode::BadEventFlag: return "BadEventFlag";
    case ErrorCode::DuplicateSubject: return "DuplicateSubject";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::NoEvents: return "NoEvents";
    case ErrorCode::NoPermissiblePairs: return "NoPermissiblePairs";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NonConvergenceAtLambda: return "NonConvergenceAtLambda";
    case ErrorCode::AllMissingColumn: return "AllMissingColumn";
    case ErrorCode::UnknownFeature: return "UnknownFeature";
    case ErrorCode::IncompleteMatrix: return "IncompleteMatrix";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::NoOobSubjects: return "NoOobSubjects";
    case ErrorCode::MismatchedFeatureSets: return "MismatchedFeatureSets";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::FoldDegenerate: return "FoldDegenerate";
    case ErrorCode::EmptyHorizons: return "EmptyHorizons";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadFormat: return "BadFormat";
  }
  return "UnknownError";
}

}  // namespace survkit
