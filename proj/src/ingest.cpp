#include "survkit/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "survkit/errors.hpp"
#include "survkit/text.hpp"

namespace survkit::ingest {

namespace {

std::string line_msg(const char* what, size_t line_no) {
  return std::string(what) + " at line " + format_int(static_cast<long long>(line_no));
}

// Reads the header line and checks it against the expected column names.
void expect_header(std::istream& in, const std::vector<std::string_view>& expected) {
  std::string line;
  if (!std::getline(in, line)) raise(ErrorCode::MissingHeader, "empty input");
  auto fields = split_csv_line(line);
  bool ok = fields.size() == expected.size();
  for (size_t i = 0; ok && i < fields.size(); ++i) {
    if (trim(fields[i]) != expected[i]) ok = false;
  }
  if (!ok) {
    std::string want;
    for (size_t i = 0; i < expected.size(); ++i) {
      if (i) want += ',';
      want += expected[i];
    }
    raise(ErrorCode::MissingHeader, "expected header '" + want + "', got '" + line + "'");
  }
}

}  // namespace

std::vector<LongitudinalObservation> parse_longitudinal(std::istream& csv_source) {
  expect_header(csv_source, {"subject_id", "variable", "delta_days", "value"});
  std::vector<LongitudinalObservation> rows;
  std::string line;
  size_t line_no = 1;
  while (std::getline(csv_source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 4) raise(ErrorCode::MalformedRow, line_msg("expected 4 fields", line_no));
    std::string subject(trim(fields[0]));
    std::string variable(trim(fields[1]));
    auto delta = parse_int(fields[2]);
    auto value = parse_double(fields[3]);
    if (subject.empty() || variable.empty() || !delta || !value) {
      raise(ErrorCode::MalformedRow, line_msg("unparseable row", line_no));
    }
    if (!std::isfinite(*value)) raise(ErrorCode::NonFiniteValue, line_msg("non-finite value", line_no));
    rows.push_back({std::move(subject), std::move(variable), static_cast<int>(*delta), *value});
  }
  return rows;
}

std::vector<StaticCovariate> parse_static(std::istream& csv_source) {
  expect_header(csv_source, {"subject_id", "name", "value"});
  std::vector<StaticCovariate> rows;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  size_t line_no = 1;
  while (std::getline(csv_source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) raise(ErrorCode::MalformedRow, line_msg("expected 3 fields", line_no));
    std::string subject(trim(fields[0]));
    std::string name(trim(fields[1]));
    std::string raw(trim(fields[2]));
    if (subject.empty() || name.empty()) raise(ErrorCode::MalformedRow, line_msg("unparseable row", line_no));
    if (!seen.emplace(subject, name).second) {
      raise(ErrorCode::DuplicateStatic, "duplicate static (" + subject + "," + name + ") " +
                                            line_msg("", line_no));
    }
    StaticValue value;
    if (auto num = parse_double(raw); num && std::isfinite(*num)) {
      value = *num;
    } else {
      value = raw;  // categorical label; no silent coercion
    }
    rows.push_back({std::move(subject), std::move(name), std::move(value)});
  }
  return rows;
}

std::vector<OutcomeRecord> parse_outcomes(std::istream& csv_source) {
  expect_header(csv_source, {"subject_id", "time_days", "event"});
  std::vector<OutcomeRecord> rows;
  std::unordered_set<std::string> seen;
  std::string line;
  size_t line_no = 1;
  while (std::getline(csv_source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) raise(ErrorCode::MalformedRow, line_msg("expected 3 fields", line_no));
    std::string subject(trim(fields[0]));
    auto time = parse_double(fields[1]);
    auto event = parse_int(fields[2]);
    if (subject.empty() || !time || !std::isfinite(*time)) {
      raise(ErrorCode::MalformedRow, line_msg("unparseable row", line_no));
    }
    if (*time <= 0) raise(ErrorCode::NonPositiveTime, line_msg("time_days must be > 0", line_no));
    if (!event || (*event != 0 && *event != 1)) {
      raise(ErrorCode::BadEventFlag, line_msg("event must be 0 or 1", line_no));
    }
    if (!seen.insert(subject).second) {
      raise(ErrorCode::DuplicateSubject, "duplicate outcome for subject " + subject);
    }
    rows.push_back({std::move(subject), {*time, *event == 1}});
  }
  return rows;
}

std::size_t Cohort::index_of(const std::string& subject_id) const {
  auto it = std::find(subjects.begin(), subjects.end(), subject_id);
  if (it == subjects.end()) raise(ErrorCode::BadSpec, "unknown subject " + subject_id);
  return static_cast<std::size_t>(it - subjects.begin());
}

bool Cohort::same_contents(const Cohort& other) const {
  return subjects == other.subjects && outcomes == other.outcomes && statics == other.statics &&
         static_names == other.static_names && longitudinal == other.longitudinal &&
         variable_names == other.variable_names;
}

Cohort assemble_cohort(const std::vector<StaticCovariate>& statics,
                       const std::vector<LongitudinalObservation>& longitudinal,
                       const std::vector<OutcomeRecord>& outcomes) {
  if (outcomes.empty()) raise(ErrorCode::EmptyCohort, "no outcomes");

  Cohort cohort;
  std::unordered_map<std::string, size_t> index;
  for (const auto& rec : outcomes) {
    index.emplace(rec.subject_id, cohort.subjects.size());
    cohort.subjects.push_back(rec.subject_id);
    cohort.outcomes.push_back(rec.outcome);
  }
  cohort.statics.resize(cohort.subjects.size());
  cohort.longitudinal.resize(cohort.subjects.size());

  std::set<std::string> static_names;
  std::set<std::string> variable_names;
  std::unordered_set<std::string> dropped;

  for (const auto& row : statics) {
    auto it = index.find(row.subject_id);
    if (it == index.end()) {
      ++cohort.log.dropped_static_rows;
      dropped.insert(row.subject_id);
      continue;
    }
    cohort.statics[it->second].emplace(row.name, row.value);
    static_names.insert(row.name);
  }

  // Group per (subject, variable) in file order; keep-last resolves duplicates.
  for (const auto& row : longitudinal) {
    auto it = index.find(row.subject_id);
    if (it == index.end()) {
      ++cohort.log.dropped_longitudinal_rows;
      dropped.insert(row.subject_id);
      continue;
    }
    auto& series = cohort.longitudinal[it->second][row.variable];
    auto dup = std::find_if(series.begin(), series.end(),
                            [&](const SeriesPoint& p) { return p.delta_days == row.delta_days; });
    if (dup != series.end()) {
      dup->value = row.value;
      ++cohort.log.duplicate_longitudinal;
    } else {
      series.push_back({row.delta_days, row.value});
    }
    variable_names.insert(row.variable);
  }
  for (auto& per_subject : cohort.longitudinal) {
    for (auto& [name, series] : per_subject) {
      std::sort(series.begin(), series.end(),
                [](const SeriesPoint& a, const SeriesPoint& b) { return a.delta_days < b.delta_days; });
    }
  }

  cohort.static_names.assign(static_names.begin(), static_names.end());
  cohort.variable_names.assign(variable_names.begin(), variable_names.end());
  cohort.log.dropped_subjects = dropped.size();
  return cohort;
}

Cohort load_cohort(const std::string& statics_path, const std::string& longitudinal_path,
                   const std::string& outcomes_path) {
  auto open = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path);
    return in;
  };
  std::ifstream statics_in = open(statics_path);
  std::ifstream longi_in = open(longitudinal_path);
  std::ifstream outcomes_in = open(outcomes_path);
  auto statics = parse_static(statics_in);
  auto longi = parse_longitudinal(longi_in);
  auto outcomes = parse_outcomes(outcomes_in);
  return assemble_cohort(statics, longi, outcomes);
}

void write_longitudinal_csv(const Cohort& cohort, std::ostream& out) {
  out << "subject_id,variable,delta_days,value\n";
  for (size_t i = 0; i < cohort.size(); ++i) {
    for (const auto& [variable, series] : cohort.longitudinal[i]) {
      for (const auto& p : series) {
        out << cohort.subjects[i] << ',' << variable << ',' << format_int(p.delta_days) << ','
            << format_double(p.value) << '\n';
      }
    }
  }
}

void write_statics_csv(const Cohort& cohort, std::ostream& out) {
  out << "subject_id,name,value\n";
  for (size_t i = 0; i < cohort.size(); ++i) {
    for (const auto& [name, value] : cohort.statics[i]) {
      out << cohort.subjects[i] << ',' << name << ',';
      if (std::holds_alternative<double>(value)) {
        out << format_double(std::get<double>(value));
      } else {
        out << std::get<std::string>(value);
      }
      out << '\n';
    }
  }
}

void write_outcomes_csv(const Cohort& cohort, std::ostream& out) {
  out << "subject_id,time_days,event\n";
  for (size_t i = 0; i < cohort.size(); ++i) {
    out << cohort.subjects[i] << ',' << format_double(cohort.outcomes[i].time_days) << ','
        << (cohort.outcomes[i].event ? '1' : '0') << '\n';
  }
}

}  // namespace survkit::ingest
