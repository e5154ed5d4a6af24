#include "survkit/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <unordered_map>

#include "survkit/errors.hpp"
#include "survkit/text.hpp"

namespace survkit {

namespace {
constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
}

FeatureMatrix::FeatureMatrix(std::vector<std::string> subject_ids, std::vector<std::string> column_names)
    : subject_ids_(std::move(subject_ids)), column_names_(std::move(column_names)) {
  cells_.assign(subject_ids_.size() * column_names_.size(), kMissing);
}

std::optional<std::size_t> FeatureMatrix::column_index(const std::string& name) const {
  auto it = std::find(column_names_.begin(), column_names_.end(), name);
  if (it == column_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - column_names_.begin());
}

double FeatureMatrix::column_coverage(std::size_t col) const {
  if (n_rows() == 0) return 0;
  std::size_t present = 0;
  for (std::size_t r = 0; r < n_rows(); ++r) {
    if (!is_missing(at(r, col))) ++present;
  }
  return static_cast<double>(present) / static_cast<double>(n_rows());
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::size_t>& cols) const {
  std::vector<std::string> names;
  names.reserve(cols.size());
  for (auto c : cols) names.push_back(column_names_[c]);
  FeatureMatrix out(subject_ids_, std::move(names));
  for (std::size_t r = 0; r < n_rows(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) out.set(r, j, at(r, cols[j]));
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& rows) const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (auto r : rows) ids.push_back(subject_ids_[r]);
  FeatureMatrix out(std::move(ids), column_names_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < n_cols(); ++c) out.set(i, c, at(rows[i], c));
  }
  return out;
}

bool FeatureMatrix::operator==(const FeatureMatrix& other) const {
  if (subject_ids_ != other.subject_ids_ || column_names_ != other.column_names_) return false;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    bool ma = std::isnan(cells_[i]);
    bool mb = std::isnan(other.cells_[i]);
    if (ma != mb) return false;
    if (!ma && cells_[i] != other.cells_[i]) return false;
  }
  return true;
}

void write_matrix_csv(const FeatureMatrix& matrix, std::ostream& out) {
  out << "subject_id";
  for (const auto& name : matrix.column_names()) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
    out << matrix.subject_ids()[r];
    for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
      out << ',';
      double v = matrix.at(r, c);
      if (!FeatureMatrix::is_missing(v)) out << format_double(v);
    }
    out << '\n';
  }
}

FeatureMatrix read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) raise(ErrorCode::MissingHeader, "empty matrix file");
  auto header = split_csv_line(line);
  if (header.empty() || trim(header[0]) != "subject_id") {
    raise(ErrorCode::MissingHeader, "matrix header must start with subject_id");
  }
  std::vector<std::string> columns;
  for (std::size_t i = 1; i < header.size(); ++i) columns.emplace_back(trim(header[i]));

  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != columns.size() + 1) {
      raise(ErrorCode::MalformedRow, "wrong field count at line " + format_int((long long)line_no));
    }
    ids.emplace_back(trim(fields[0]));
    std::vector<double> row(columns.size(), kMissing);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto field = trim(fields[c + 1]);
      if (field.empty()) continue;
      auto v = parse_double(field);
      if (!v) raise(ErrorCode::MalformedRow, "unparseable cell at line " + format_int((long long)line_no));
      row[c] = *v;
    }
    rows.push_back(std::move(row));
  }
  FeatureMatrix matrix(std::move(ids), std::move(columns));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < matrix.n_cols(); ++c) matrix.set(r, c, rows[r][c]);
  }
  return matrix;
}

FeatureMatrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  return read_matrix_csv(in);
}

namespace features {

double derived_field(const DerivedFeatures& d, std::size_t suffix_index) {
  switch (suffix_index) {
    case 0: return d.mean;
    case 1: return d.sd;
    case 2: return d.max;
    case 3: return d.min;
    case 4: return d.diff;
    case 5: return d.first;
    case 6: return d.last;
    case 7: return d.len;
    case 8: return d.minmax;
    case 9: return d.slope;
  }
  throw std::out_of_range("derived_field");
}

SeriesWindow window_filter(const std::vector<SeriesPoint>& series, int low_days, int high_days) {
  if (low_days > high_days) throw std::invalid_argument("window_filter: low > high");
  SeriesWindow out;
  out.low_days = low_days;
  out.high_days = high_days;
  for (const auto& p : series) {
    if (p.delta_days >= low_days && p.delta_days <= high_days) out.points.push_back(p);
  }
  std::stable_sort(out.points.begin(), out.points.end(),
                   [](const SeriesPoint& a, const SeriesPoint& b) { return a.delta_days < b.delta_days; });
  return out;
}

DerivedFeatures derive(const SeriesWindow& window) {
  const auto& pts = window.points;
  if (pts.empty()) raise(ErrorCode::EmptySeries, "derive on empty window");

  DerivedFeatures d;
  std::size_t n = pts.size();
  d.len = static_cast<double>(n);
  d.first = pts.front().value;
  d.last = pts.back().value;

  double sum = 0;
  d.max = pts[0].value;
  d.min = pts[0].value;
  int day_at_max = pts[0].delta_days;
  int day_at_min = pts[0].delta_days;
  for (const auto& p : pts) {
    sum += p.value;
    if (p.value > d.max) {  // strict: ties keep the earliest day
      d.max = p.value;
      day_at_max = p.delta_days;
    }
    if (p.value < d.min) {
      d.min = p.value;
      day_at_min = p.delta_days;
    }
  }
  d.mean = sum / static_cast<double>(n);
  d.diff = d.max - d.min;

  if (n == 1) {
    // single observation: spread and slope statistics are all zero
    d.sd = d.diff = d.minmax = d.slope = 0;
    return d;
  }

  double ss = 0;
  for (const auto& p : pts) {
    double dev = p.value - d.mean;
    ss += dev * dev;
  }
  d.sd = std::sqrt(ss / static_cast<double>(n - 1));

  double day_mean = 0;
  for (const auto& p : pts) day_mean += p.delta_days;
  day_mean /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    double dx = p.delta_days - day_mean;
    sxx += dx * dx;
    sxy += dx * (p.value - d.mean);
  }
  d.slope = sxx > 0 ? sxy / sxx : 0.0;

  // Signed by temporal order: max before min yields a negative value.
  d.minmax = day_at_max != day_at_min ? d.diff / static_cast<double>(day_at_max - day_at_min) : 0.0;
  return d;
}

namespace {

std::string onehot_name(const std::string& name, const std::string& level) { return name + "=" + level; }

}  // namespace

BuildResult build_matrix(const ingest::Cohort& cohort, int window_low_days, int window_high_days,
                         double min_coverage) {
  if (cohort.size() == 0) raise(ErrorCode::EmptyCohort, "build_matrix on empty cohort");

  // Column layout: derived per variable, then statics (one-hot per level).
  std::vector<std::string> columns;
  for (const auto& variable : cohort.variable_names) {
    for (const char* suffix : kDerivedSuffixes) columns.push_back(variable + "_" + suffix);
  }
  std::map<std::string, std::set<std::string>> levels;  // categorical static -> labels
  std::map<std::string, bool> is_numeric_static;
  for (const auto& name : cohort.static_names) {
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      auto it = cohort.statics[i].find(name);
      if (it == cohort.statics[i].end()) continue;
      if (std::holds_alternative<double>(it->second)) {
        is_numeric_static[name] = true;
      } else {
        levels[name].insert(std::get<std::string>(it->second));
      }
    }
  }
  for (const auto& name : cohort.static_names) {
    if (levels.count(name)) {
      for (const auto& level : levels[name]) columns.push_back(onehot_name(name, level));
    } else if (is_numeric_static.count(name)) {
      columns.push_back(name);
    }
  }

  FeatureMatrix matrix(cohort.subjects, columns);

  std::size_t col = 0;
  for (const auto& variable : cohort.variable_names) {
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      auto it = cohort.longitudinal[i].find(variable);
      if (it == cohort.longitudinal[i].end()) continue;
      SeriesWindow window = window_filter(it->second, window_low_days, window_high_days);
      if (window.points.empty()) continue;  // all ten cells stay missing
      DerivedFeatures d = derive(window);
      for (std::size_t s = 0; s < kDerivedSuffixes.size(); ++s) {
        matrix.set(i, col + s, derived_field(d, s));
      }
    }
    col += kDerivedSuffixes.size();
  }
  for (const auto& name : cohort.static_names) {
    if (levels.count(name)) {
      const auto& level_set = levels[name];
      for (std::size_t i = 0; i < cohort.size(); ++i) {
        auto it = cohort.statics[i].find(name);
        if (it == cohort.statics[i].end()) continue;
        if (!std::holds_alternative<std::string>(it->second)) continue;  // mixed-type row: skip
        const auto& label = std::get<std::string>(it->second);
        std::size_t offset = 0;
        for (const auto& level : level_set) {
          matrix.set(i, col + offset, level == label ? 1.0 : 0.0);
          ++offset;
        }
      }
      col += level_set.size();
    } else if (is_numeric_static.count(name)) {
      for (std::size_t i = 0; i < cohort.size(); ++i) {
        auto it = cohort.statics[i].find(name);
        if (it == cohort.statics[i].end()) continue;
        matrix.set(i, col, std::get<double>(it->second));
      }
      ++col;
    }
  }

  BuildResult result;
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
    double coverage = matrix.column_coverage(c);
    if (coverage < min_coverage) {
      result.report.dropped_low_coverage.push_back({matrix.column_names()[c], coverage});
    } else {
      kept.push_back(c);
    }
  }
  result.matrix = matrix.select_columns(kept);
  return result;
}

double pairwise_pearson(const FeatureMatrix& matrix, std::size_t col_a, std::size_t col_b) {
  double sum_a = 0, sum_b = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
    double a = matrix.at(r, col_a);
    double b = matrix.at(r, col_b);
    if (FeatureMatrix::is_missing(a) || FeatureMatrix::is_missing(b)) continue;
    sum_a += a;
    sum_b += b;
    ++n;
  }
  if (n < 2) return 0.0;
  double mean_a = sum_a / static_cast<double>(n);
  double mean_b = sum_b / static_cast<double>(n);
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
    double a = matrix.at(r, col_a);
    double b = matrix.at(r, col_b);
    if (FeatureMatrix::is_missing(a) || FeatureMatrix::is_missing(b)) continue;
    double da = a - mean_a;
    double db = b - mean_b;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa <= 0 || sbb <= 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

PruneResult prune_correlated(const FeatureMatrix& matrix, double threshold) {
  if (!(threshold > 0 && threshold <= 1)) throw std::invalid_argument("prune threshold must be in (0,1]");

  auto is_constant = [&](std::size_t c) {
    double first = kMissing;
    std::size_t present = 0;
    for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
      double v = matrix.at(r, c);
      if (FeatureMatrix::is_missing(v)) continue;
      if (present == 0) first = v;
      else if (v != first) return false;
      ++present;
    }
    return true;  // zero or one distinct present value
  };

  PruneResult result;
  std::vector<std::size_t> retained;
  for (std::size_t j = 0; j < matrix.n_cols(); ++j) {
    if (is_constant(j)) {
      result.report.constant.push_back(matrix.column_names()[j]);
      continue;
    }
    bool dropped = false;
    for (std::size_t i : retained) {
      double rho = pairwise_pearson(matrix, i, j);
      if (std::abs(rho) > threshold) {
        result.report.correlated.push_back({matrix.column_names()[j], matrix.column_names()[i], rho});
        dropped = true;
        break;
      }
    }
    if (!dropped) retained.push_back(j);
  }
  result.matrix = matrix.select_columns(retained);
  return result;
}

}  // namespace features
}  // namespace survkit
