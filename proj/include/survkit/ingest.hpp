#pragma once

// CSV ingestion and the in-memory cohort shared by all downstream modules.
//
// File formats (UTF-8, '.' decimal separator, mandatory header, no quoting):
//   longitudinal: subject_id,variable,delta_days,value
//   statics:      subject_id,name,value        (value numeric or categorical label)
//   outcomes:     subject_id,time_days,event   (event 0/1)

#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "survkit/survcore.hpp"

namespace survkit::ingest {

struct LongitudinalObservation {
  std::string subject_id;
  std::string variable;
  int delta_days = 0;  // days since subject baseline, may be negative
  double value = 0;

  bool operator==(const LongitudinalObservation&) const = default;
};

// A value is numeric iff the whole field parses as a real; anything else
// stays a categorical label ("61.5kg" is a label, not 61.5).
using StaticValue = std::variant<double, std::string>;

struct StaticCovariate {
  std::string subject_id;
  std::string name;
  StaticValue value;

  bool operator==(const StaticCovariate&) const = default;
};

struct OutcomeRecord {
  std::string subject_id;
  SurvivalOutcome outcome;

  bool operator==(const OutcomeRecord&) const = default;
};

struct SeriesPoint {
  int delta_days = 0;
  double value = 0;

  bool operator==(const SeriesPoint&) const = default;
};

struct AssemblyLog {
  std::size_t dropped_static_rows = 0;        // rows whose subject has no outcome
  std::size_t dropped_longitudinal_rows = 0;  // rows whose subject has no outcome
  std::size_t dropped_subjects = 0;           // distinct subjects dropped
  std::size_t duplicate_longitudinal = 0;     // (subject,variable,day) triples resolved keep-last
};

// Immutable after assembly; safe to share across threads.
struct Cohort {
  std::vector<std::string> subjects;  // outcome-file order (determinism anchor)
  std::vector<SurvivalOutcome> outcomes;  // aligned with subjects

  // per subject: name -> value; iteration via static_names for determinism
  std::vector<std::map<std::string, StaticValue>> statics;
  std::vector<std::string> static_names;  // sorted union

  // per subject: variable -> points sorted by delta_days (duplicates resolved)
  std::vector<std::map<std::string, std::vector<SeriesPoint>>> longitudinal;
  std::vector<std::string> variable_names;  // sorted union

  AssemblyLog log;

  std::size_t size() const { return subjects.size(); }
  std::size_t index_of(const std::string& subject_id) const;  // throws if absent

  bool same_contents(const Cohort& other) const;
};

// Parsers throw Error with the offending 1-based line number in the message.
std::vector<LongitudinalObservation> parse_longitudinal(std::istream& csv_source);
std::vector<StaticCovariate> parse_static(std::istream& csv_source);
std::vector<OutcomeRecord> parse_outcomes(std::istream& csv_source);

Cohort assemble_cohort(const std::vector<StaticCovariate>& statics,
                       const std::vector<LongitudinalObservation>& longitudinal,
                       const std::vector<OutcomeRecord>& outcomes);

// Convenience: parse the three files and assemble.
Cohort load_cohort(const std::string& statics_path, const std::string& longitudinal_path,
                   const std::string& outcomes_path);

// Writers emit the exact formats above; a written cohort re-parses to an
// identical cohort (field for field).
void write_longitudinal_csv(const Cohort& cohort, std::ostream& out);
void write_statics_csv(const Cohort& cohort, std::ostream& out);
void write_outcomes_csv(const Cohort& cohort, std::ostream& out);

}  // namespace survkit::ingest
