#pragma once

// Feature engineering: the ten per-variable window statistics, feature-matrix
// assembly (with one-hot expansion of categorical statics), and pruning of
// low-coverage / highly correlated columns.

#include <array>
#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "survkit/ingest.hpp"

namespace survkit {

// Subjects x named numeric features; quiet NaN marks a missing cell.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::vector<std::string> subject_ids, std::vector<std::string> column_names);

  std::size_t n_rows() const { return subject_ids_.size(); }
  std::size_t n_cols() const { return column_names_.size(); }

  double at(std::size_t row, std::size_t col) const { return cells_[row * n_cols() + col]; }
  void set(std::size_t row, std::size_t col, double value) { cells_[row * n_cols() + col] = value; }
  static bool is_missing(double cell) { return std::isnan(cell); }

  const std::vector<std::string>& subject_ids() const { return subject_ids_; }
  const std::vector<std::string>& column_names() const { return column_names_; }
  std::optional<std::size_t> column_index(const std::string& name) const;

  double column_coverage(std::size_t col) const;  // fraction of present cells

  FeatureMatrix select_columns(const std::vector<std::size_t>& cols) const;
  FeatureMatrix select_rows(const std::vector<std::size_t>& rows) const;

  bool operator==(const FeatureMatrix& other) const;

 private:
  std::vector<std::string> subject_ids_;
  std::vector<std::string> column_names_;
  std::vector<double> cells_;  // row-major
};

// CSV: header `subject_id,<col>,...`; missing cell = empty string.
void write_matrix_csv(const FeatureMatrix& matrix, std::ostream& out);
FeatureMatrix read_matrix_csv(std::istream& in);
FeatureMatrix load_matrix_csv(const std::string& path);

namespace features {

using ingest::SeriesPoint;

struct SeriesWindow {
  std::vector<SeriesPoint> points;  // inside window, ascending by delta_days
  int low_days = 0;
  int high_days = 0;
};

struct DerivedFeatures {
  double mean = 0;
  double sd = 0;      // sample sd (divisor len-1); 0 when len = 1
  double max = 0;
  double min = 0;
  double diff = 0;    // max - min
  double first = 0;   // value at smallest delta_days
  double last = 0;    // value at largest delta_days
  double len = 0;     // observation count
  double minmax = 0;  // slope of the line through (day_at_min, min) and (day_at_max, max)
  double slope = 0;   // OLS slope of value on delta_days
};

// Suffix order defines the derived-column order in the matrix.
inline constexpr std::array<const char*, 10> kDerivedSuffixes = {
    "mean", "sd", "max", "min", "diff", "first", "last", "len", "minmax", "slope"};

double derived_field(const DerivedFeatures& d, std::size_t suffix_index);

// Retains points with low <= delta_days <= high (inclusive), sorted ascending,
// stable for equal days. Empty results are allowed.
SeriesWindow window_filter(const std::vector<SeriesPoint>& series, int low_days, int high_days);

// Throws EmptySeries on an empty window. Ties in extreme values resolve to
// the earliest day; minmax and slope are 0 when their day span is 0.
DerivedFeatures derive(const SeriesWindow& window);

struct BuildReport {
  struct CoverageDrop {
    std::string column;
    double coverage;
  };
  std::vector<CoverageDrop> dropped_low_coverage;
};

struct BuildResult {
  FeatureMatrix matrix;
  BuildReport report;
};

// Ten derived columns per longitudinal variable (variables in sorted order),
// then static covariates in sorted name order (categoricals one-hot expanded
// as `name=level`, levels sorted). Columns with present-cell fraction below
// min_coverage are dropped and reported.
BuildResult build_matrix(const ingest::Cohort& cohort, int window_low_days, int window_high_days,
                         double min_coverage);

struct PruneReport {
  struct CorrelatedDrop {
    std::string column;
    std::string culprit;  // already-retained column it correlates with
    double rho;
  };
  std::vector<CorrelatedDrop> correlated;
  std::vector<std::string> constant;  // zero-variance columns, dropped unconditionally
};

struct PruneResult {
  FeatureMatrix matrix;
  PruneReport report;
};

// Scans columns in matrix order; drops column j iff some already-retained i
// has |pearson(i, j)| > threshold over rows where both are present (strict
// inequality). Constant columns are dropped first and reported separately.
PruneResult prune_correlated(const FeatureMatrix& matrix, double threshold);

// Pairwise-complete Pearson correlation; 0 when fewer than two joint rows or
// either column is constant on the joint rows.
double pairwise_pearson(const FeatureMatrix& matrix, std::size_t col_a, std::size_t col_b);

}  // namespace features
}  // namespace survkit
