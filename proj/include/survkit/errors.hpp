#pragma once

#include <stdexcept>
#include <string>

namespace survkit {

enum class ErrorCode {
  // ingest
  MissingHeader,
  MalformedRow,
  NonFiniteValue,
  DuplicateStatic,
  NonPositiveTime,
  BadEventFlag,
  DuplicateSubject,
  EmptyCohort,
  // features
  EmptySeries,
  // survcore
  NoEvents,
  NoPermissiblePairs,
  // linmodels
  DegenerateColumn,
  Separation,
  NotConverged,
  NonConvergenceAtLambda,
  AllMissingColumn,
  UnknownFeature,
  IncompleteMatrix,
  // forest
  DegenerateSplit,
  NoOobSubjects,
  // selection
  MismatchedFeatureSets,
  // pipeline
  BadK,
  FoldDegenerate,
  EmptyHorizons,
  // synthgen / io
  BadSpec,
  IoError,
  BadFormat,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace survkit
