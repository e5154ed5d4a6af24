#include "survkit/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "survkit/errors.hpp"
#include "survkit/linmodels.hpp"
#include "survkit/text.hpp"

namespace survkit::selection {

namespace {

// Ranks columns by a strict-weak comparator over column indices; the
// comparator must already encode every tie-break so the order is total.
template <typename Less>
std::vector<int> ranks_from_comparator(std::size_t p, Less&& less) {
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), less);
  std::vector<int> rank(p);
  for (std::size_t k = 0; k < p; ++k) rank[order[k]] = static_cast<int>(k) + 1;
  return rank;
}

}  // namespace

std::string_view method_name(SelectorMethod method) {
  switch (method) {
    case SelectorMethod::forest_vimp: return "forest-vimp";
    case SelectorMethod::boosted_cox: return "boosted-cox";
    case SelectorMethod::elastic_net: return "elastic-net";
  }
  return "unknown";
}

SelectorRanking rank_by_forest_vimp(const FeatureMatrix& matrix,
                                    std::span<const SurvivalOutcome> outcomes,
                                    const forest::ForestParams& params, int n_repeats,
                                    std::uint64_t importance_seed) {
  const auto fitted = forest::fit_forest(matrix, outcomes, params);
  const auto report =
      forest::permutation_importance(fitted, matrix, outcomes, n_repeats, importance_seed);

  SelectorRanking ranking;
  ranking.method = SelectorMethod::forest_vimp;
  ranking.feature = matrix.column_names();
  ranking.score.resize(matrix.n_cols());
  ranking.rank.resize(matrix.n_cols());
  // the importance report is already in rank order with column-order ties
  for (std::size_t k = 0; k < report.feature.size(); ++k) {
    const auto col = matrix.column_index(report.feature[k]);
    ranking.score[*col] = report.importance[k];
    ranking.rank[*col] = report.rank[k];
  }
  return ranking;
}

SelectorRanking rank_by_boosting(const FeatureMatrix& matrix,
                                 std::span<const SurvivalOutcome> outcomes, double nu,
                                 int iterations) {
  const auto model = linmodels::coxboost_fit(matrix, outcomes, nu, iterations);
  const auto p = matrix.n_cols();

  std::vector<int> times_picked(p, 0);
  for (int col : model.selection_log) ++times_picked[static_cast<std::size_t>(col)];

  SelectorRanking ranking;
  ranking.method = SelectorMethod::boosted_cox;
  ranking.feature = matrix.column_names();
  ranking.score.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    ranking.score[j] = std::abs(model.coefficients_std[static_cast<Eigen::Index>(j)]);
  }
  ranking.rank = ranks_from_comparator(p, [&](std::size_t a, std::size_t b) {
    if (ranking.score[a] != ranking.score[b]) return ranking.score[a] > ranking.score[b];
    if (times_picked[a] != times_picked[b]) return times_picked[a] > times_picked[b];
    return a < b;
  });
  return ranking;
}

SelectorRanking rank_by_elastic_net(const FeatureMatrix& matrix,
                                    std::span<const SurvivalOutcome> outcomes, double alpha) {
  const auto path = linmodels::elastic_net_cox_fit(matrix, outcomes, alpha);
  const auto p = matrix.n_cols();

  SelectorRanking ranking;
  ranking.method = SelectorMethod::elastic_net;
  ranking.feature = matrix.column_names();
  ranking.score.assign(p, 0.0);  // 0 = never entered the path
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t l = 0; l < path.lambdas.size(); ++l) {
      if (path.coefficients_std[l][static_cast<Eigen::Index>(j)] != 0.0) {
        ranking.score[j] = path.lambdas[l];  // grid is descending: first hit is entry
        break;
      }
    }
  }
  ranking.rank = ranks_from_comparator(p, [&](std::size_t a, std::size_t b) {
    if (ranking.score[a] != ranking.score[b]) return ranking.score[a] > ranking.score[b];
    return a < b;
  });
  return ranking;
}

std::string source_variable(const std::string& column) {
  const auto eq = column.find('=');
  if (eq != std::string::npos) return column.substr(0, eq);
  const auto underscore = column.rfind('_');
  if (underscore != std::string::npos) {
    const std::string tail = column.substr(underscore + 1);
    for (const char* suffix : features::kDerivedSuffixes) {
      if (tail == suffix) return column.substr(0, underscore);
    }
  }
  return column;
}

ConsensusSelection consensus(const std::vector<SelectorRanking>& rankings, std::size_t budget,
                             bool count_source_variables) {
  if (rankings.empty()) throw std::invalid_argument("consensus needs at least one ranking");
  if (budget < 1) throw std::invalid_argument("budget must be at least 1");
  for (const auto& r : rankings) {
    if (r.feature != rankings.front().feature) {
      raise(ErrorCode::MismatchedFeatureSets, "rankings cover different feature sets");
    }
    if (r.rank.size() != r.feature.size()) {
      throw std::invalid_argument("ranking has " + std::to_string(r.rank.size()) + " ranks for " +
                                  std::to_string(r.feature.size()) + " features");
    }
  }

  ConsensusSelection out;
  out.feature = rankings.front().feature;
  out.rankings = rankings;
  const auto p = out.feature.size();
  out.mean_rank.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0;
    for (const auto& r : rankings) sum += r.rank[j];
    out.mean_rank[j] = sum / static_cast<double>(rankings.size());
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out.mean_rank[a] != out.mean_rank[b]) return out.mean_rank[a] < out.mean_rank[b];
    return a < b;
  });

  if (!count_source_variables) {
    for (std::size_t k = 0; k < std::min(budget, p); ++k) {
      out.selected.push_back(out.feature[order[k]]);
    }
    return out;
  }

  // Variable-budget mode: the first `budget` distinct source variables met in
  // mean-rank order are charged; every column of a charged variable is kept.
  std::set<std::string> charged;
  for (std::size_t k = 0; k < p; ++k) {
    const std::string& name = out.feature[order[k]];
    const std::string source = source_variable(name);
    if (charged.count(source)) {
      out.selected.push_back(name);
    } else if (charged.size() < budget) {
      charged.insert(source);
      out.selected.push_back(name);
    }
  }
  return out;
}

void write_rankings_csv(const std::vector<SelectorRanking>& rankings, std::ostream& out) {
  out << "feature,method,score,rank\n";
  for (const auto& r : rankings) {
    std::vector<std::size_t> by_rank(r.feature.size());
    for (std::size_t j = 0; j < r.rank.size(); ++j) {
      by_rank[static_cast<std::size_t>(r.rank[j]) - 1] = j;
    }
    for (std::size_t j : by_rank) {
      out << r.feature[j] << ',' << method_name(r.method) << ',' << format_double(r.score[j])
          << ',' << r.rank[j] << '\n';
    }
  }
}

void write_consensus_csv(const ConsensusSelection& selection, std::ostream& out) {
  out << "feature,mean_rank,selected\n";
  std::vector<std::size_t> order(selection.feature.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (selection.mean_rank[a] != selection.mean_rank[b]) {
      return selection.mean_rank[a] < selection.mean_rank[b];
    }
    return a < b;
  });
  const std::set<std::string> chosen(selection.selected.begin(), selection.selected.end());
  for (std::size_t j : order) {
    out << selection.feature[j] << ',' << format_double(selection.mean_rank[j]) << ','
        << (chosen.count(selection.feature[j]) ? '1' : '0') << '\n';
  }
}

}  // namespace survkit::selection
