#include "survkit/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "survkit/errors.hpp"
#include "survkit/parallel.hpp"
#include "survkit/rng.hpp"

namespace survkit::forest {

namespace {

// Pooled event-time view of one node: distinct event times ascending, total
// at-risk and death counts, and for each member the largest time index it is
// still at risk for (-1 when it leaves before the first event).
struct NodePool {
  std::vector<double> times;
  std::vector<double> n_total;  // at risk
  std::vector<double> d_total;  // deaths
  std::vector<int> risk_idx;    // per member
  int n_events = 0;
};

NodePool build_pool(std::span<const SurvivalOutcome> outcomes, std::span<const int> members) {
  NodePool pool;
  for (int m : members) {
    const auto& o = outcomes[static_cast<std::size_t>(m)];
    if (o.event) {
      pool.times.push_back(o.time_days);
      ++pool.n_events;
    }
  }
  std::sort(pool.times.begin(), pool.times.end());
  pool.times.erase(std::unique(pool.times.begin(), pool.times.end()), pool.times.end());

  const auto k = pool.times.size();
  pool.n_total.assign(k, 0);
  pool.d_total.assign(k, 0);
  pool.risk_idx.reserve(members.size());
  for (int m : members) {
    const auto& o = outcomes[static_cast<std::size_t>(m)];
    auto it = std::upper_bound(pool.times.begin(), pool.times.end(), o.time_days);
    const int idx = static_cast<int>(it - pool.times.begin()) - 1;
    pool.risk_idx.push_back(idx);
    if (idx >= 0) {
      // at risk at every event time up to its own
      for (int j = 0; j <= idx; ++j) pool.n_total[static_cast<std::size_t>(j)] += 1;
      if (o.event) pool.d_total[static_cast<std::size_t>(idx)] += 1;
    }
  }
  return pool;
}

// (O-E)^2 / V for the current left-group tallies; n1 is rebuilt from the
// per-index counts in one descending pass. Returns false when V == 0.
bool logrank_from_tallies(const NodePool& pool, std::span<const double> left_at_idx,
                          std::span<const double> left_deaths, double* out) {
  double oe = 0;
  double v = 0;
  double n1 = 0;
  for (auto k = pool.times.size(); k-- > 0;) {
    n1 += left_at_idx[k];
    const double n = pool.n_total[k];
    const double d = pool.d_total[k];
    const double share = n1 / n;
    oe += left_deaths[k] - d * share;
    if (n > 1) v += d * share * (1 - share) * (n - d) / (n - 1);
  }
  if (v <= 0) return false;
  *out = oe * oe / v;
  return true;
}

double node_median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto m = values.size() / 2;
  if (values.size() % 2 == 1) return values[m];
  return (values[m - 1] + values[m]) / 2;
}

bool is_one_hot_name(const std::string& name) { return name.find('=') != std::string::npos; }

struct TreeGrower {
  const Eigen::MatrixXd& X;
  std::span<const SurvivalOutcome> outcomes;
  std::span<const double> grid;
  const ForestParams& params;
  std::mt19937_64& rng;
  std::vector<TreeNode> nodes;
  std::vector<int> feature_pool;

  TreeGrower(const Eigen::MatrixXd& x, std::span<const SurvivalOutcome> out,
             std::span<const double> g, const ForestParams& p, std::mt19937_64& r)
      : X(x), outcomes(out), grid(g), params(p), rng(r) {
    feature_pool.resize(static_cast<std::size_t>(X.cols()));
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
  }

  std::vector<int> draw_features() {
    const int p = static_cast<int>(feature_pool.size());
    const int mtry = std::clamp(
        params.mtry > 0 ? params.mtry : static_cast<int>(std::sqrt(static_cast<double>(p))), 1, p);
    for (int j = 0; j < mtry; ++j) {
      std::uniform_int_distribution<int> pick(j, p - 1);
      std::swap(feature_pool[static_cast<std::size_t>(j)],
                feature_pool[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<int> drawn(feature_pool.begin(), feature_pool.begin() + mtry);
    std::sort(drawn.begin(), drawn.end());  // ascending scan = lowest-index tie-break
    return drawn;
  }

  struct Split {
    int feature = -1;
    double threshold = 0;
    double statistic = -1;
  };

  Split best_split(const NodePool& pool, std::span<const int> members) {
    Split best;
    if (pool.times.empty()) return best;
    const auto k = pool.times.size();
    std::vector<double> left_at_idx(k);
    std::vector<double> left_deaths(k);
    std::vector<std::pair<double, int>> order(members.size());  // (value, member slot)

    for (int f : draw_features()) {
      for (std::size_t s = 0; s < members.size(); ++s) {
        order[s] = {X(members[s], f), static_cast<int>(s)};
      }
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;

      std::fill(left_at_idx.begin(), left_at_idx.end(), 0);
      std::fill(left_deaths.begin(), left_deaths.end(), 0);
      for (std::size_t s = 0; s < order.size(); ++s) {
        const int slot = order[s].second;
        const int idx = pool.risk_idx[static_cast<std::size_t>(slot)];
        if (idx >= 0) {
          left_at_idx[static_cast<std::size_t>(idx)] += 1;
          if (outcomes[static_cast<std::size_t>(members[static_cast<std::size_t>(slot)])].event) {
            left_deaths[static_cast<std::size_t>(idx)] += 1;
          }
        }
        if (s + 1 == order.size() || order[s].first == order[s + 1].first) continue;
        double stat = 0;
        if (!logrank_from_tallies(pool, left_at_idx, left_deaths, &stat)) continue;
        if (stat > best.statistic) {
          best = {f, (order[s].first + order[s + 1].first) / 2, stat};
        }
      }
    }
    return best;
  }

  TreeNode make_leaf(std::span<const int> members, const NodePool& pool) {
    TreeNode leaf;
    leaf.n_members = static_cast<int>(members.size());
    leaf.n_events = pool.n_events;
    leaf.chf.assign(grid.size(), 0.0);
    // Same recurrence as the plain Nelson-Aalen estimator, sampled onto the
    // shared grid; a leaf holding the whole sample reproduces it exactly.
    double h = 0;
    std::size_t next = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      while (next < pool.times.size() && pool.times[next] <= grid[g]) {
        h += pool.d_total[next] / pool.n_total[next];
        ++next;
      }
      leaf.chf[g] = h;
    }
    return leaf;
  }

  int build(std::vector<int> members) {
    const auto index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    const NodePool pool = build_pool(outcomes, members);

    Split split;
    if (static_cast<int>(members.size()) >= params.min_node_size &&
        pool.n_events >= params.min_events_per_node) {
      split = best_split(pool, members);
    }
    if (split.feature < 0) {
      nodes[static_cast<std::size_t>(index)] = make_leaf(members, pool);
      return index;
    }

    std::vector<int> left, right;
    for (int m : members) {
      (X(m, split.feature) <= split.threshold ? left : right).push_back(m);
    }
    members.clear();
    members.shrink_to_fit();
    const int left_index = build(std::move(left));
    const int right_index = build(std::move(right));
    TreeNode& node = nodes[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left_index;
    node.right = right_index;
    return index;
  }
};

const TreeNode& route(const SurvivalTree& tree, const Eigen::VectorXd& row) {
  const TreeNode* node = &tree.nodes.front();
  while (!node->is_leaf()) {
    node = &tree.nodes[static_cast<std::size_t>(row[node->feature] <= node->threshold ? node->left
                                                                                      : node->right)];
  }
  return *node;
}

Eigen::VectorXd filled_row(const SurvivalForest& forest, Eigen::VectorXd row) {
  if (static_cast<std::size_t>(row.size()) != forest.feature_names.size()) {
    raise(ErrorCode::UnknownFeature,
          "prediction row has " + std::to_string(row.size()) + " values for " +
              std::to_string(forest.feature_names.size()) + " training features");
  }
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (std::isnan(row[j])) row[j] = forest.impute.fill_values[static_cast<std::size_t>(j)];
  }
  return row;
}

// Dense imputed copy of a prediction matrix, columns checked against training.
Eigen::MatrixXd filled_matrix(const SurvivalForest& forest, const FeatureMatrix& matrix) {
  if (matrix.column_names() != forest.feature_names) {
    raise(ErrorCode::UnknownFeature, "prediction columns differ from training columns");
  }
  Eigen::MatrixXd X(matrix.n_rows(), matrix.n_cols());
  for (std::size_t i = 0; i < matrix.n_rows(); ++i) {
    for (std::size_t j = 0; j < matrix.n_cols(); ++j) {
      const double cell = matrix.at(i, j);
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          FeatureMatrix::is_missing(cell) ? forest.impute.fill_values[j] : cell;
    }
  }
  return X;
}

std::vector<char> in_bag_flags(const SurvivalForest& forest, std::size_t tree, std::size_t n) {
  std::vector<char> flags(n, 0);
  for (int i : forest.in_bag[tree]) flags[static_cast<std::size_t>(i)] = 1;
  return flags;
}

// Mortality per subject over only the trees whose sample missed it; NaN for
// subjects that were in-bag everywhere.
std::vector<double> oob_mortality(const SurvivalForest& forest, const Eigen::MatrixXd& X) {
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::vector<char>> flags(forest.trees.size());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) flags[t] = in_bag_flags(forest, t, n);

  std::vector<double> scores(n);
  parallel_for(n, forest.params.n_threads, [&](std::size_t i) {
    const Eigen::VectorXd row = X.row(static_cast<Eigen::Index>(i)).transpose();
    std::vector<double> acc(forest.grid.size(), 0.0);
    int used = 0;
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
      if (flags[t][i]) continue;
      const TreeNode& leaf = route(forest.trees[t], row);
      for (std::size_t g = 0; g < acc.size(); ++g) acc[g] += leaf.chf[g];
      ++used;
    }
    if (used == 0) {
      scores[i] = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    double total = 0;
    for (double a : acc) total += a / used;
    scores[i] = total;
  });
  return scores;
}

double concordance_of_present(std::span<const double> scores,
                              std::span<const SurvivalOutcome> outcomes, int* n_excluded) {
  std::vector<double> kept_scores;
  std::vector<SurvivalOutcome> kept_outcomes;
  int excluded = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) {
      ++excluded;
      continue;
    }
    kept_scores.push_back(scores[i]);
    kept_outcomes.push_back(outcomes[i]);
  }
  if (n_excluded) *n_excluded = excluded;
  if (kept_scores.empty()) {
    raise(ErrorCode::NoOobSubjects, "no subject was out of bag in any tree");
  }
  return concordance_index(kept_scores, kept_outcomes);
}

}  // namespace

double logrank_split_statistic(std::span<const SurvivalOutcome> left,
                               std::span<const SurvivalOutcome> right) {
  if (left.empty() || right.empty()) {
    throw std::invalid_argument("log-rank statistic needs both sides non-empty");
  }
  std::vector<SurvivalOutcome> pooled(left.begin(), left.end());
  pooled.insert(pooled.end(), right.begin(), right.end());
  std::vector<int> members(pooled.size());
  std::iota(members.begin(), members.end(), 0);
  const NodePool pool = build_pool(pooled, members);

  std::vector<double> left_at_idx(pool.times.size(), 0);
  std::vector<double> left_deaths(pool.times.size(), 0);
  for (std::size_t s = 0; s < left.size(); ++s) {
    const int idx = pool.risk_idx[s];
    if (idx < 0) continue;
    left_at_idx[static_cast<std::size_t>(idx)] += 1;
    if (left[s].event) left_deaths[static_cast<std::size_t>(idx)] += 1;
  }
  double stat = 0;
  if (!logrank_from_tallies(pool, left_at_idx, left_deaths, &stat)) {
    raise(ErrorCode::DegenerateSplit, "zero log-rank variance: one side never varies the risk set");
  }
  return stat;
}

SurvivalTree grow_tree(const Eigen::MatrixXd& X, std::span<const SurvivalOutcome> outcomes,
                       std::span<const int> sample, std::span<const double> grid,
                       const ForestParams& params, std::mt19937_64& rng) {
  if (sample.empty()) throw std::invalid_argument("tree sample is empty");
  if (static_cast<std::size_t>(X.rows()) != outcomes.size()) {
    throw std::invalid_argument("design matrix rows and outcome count differ");
  }
  TreeGrower grower(X, outcomes, grid, params, rng);
  grower.build(std::vector<int>(sample.begin(), sample.end()));
  return SurvivalTree{std::move(grower.nodes)};
}

SurvivalForest fit_forest(const FeatureMatrix& matrix, std::span<const SurvivalOutcome> outcomes,
                          const ForestParams& params) {
  if (matrix.n_rows() != outcomes.size()) {
    throw std::invalid_argument("matrix rows and outcome count differ");
  }
  if (matrix.n_rows() < 2) throw std::invalid_argument("forest needs at least two subjects");
  if (params.n_trees < 1) throw std::invalid_argument("n_trees must be positive");
  const int n = static_cast<int>(matrix.n_rows());
  const int p = static_cast<int>(matrix.n_cols());
  if (params.mtry < 0 || params.mtry > p) throw std::invalid_argument("mtry out of range");

  SurvivalForest forest;
  forest.feature_names = matrix.column_names();
  forest.params = params;

  for (const auto& o : outcomes) {
    if (o.event) forest.grid.push_back(o.time_days);
  }
  std::sort(forest.grid.begin(), forest.grid.end());
  forest.grid.erase(std::unique(forest.grid.begin(), forest.grid.end()), forest.grid.end());
  if (forest.grid.empty()) raise(ErrorCode::NoEvents, "forest needs at least one observed event");

  // Median fill for numeric columns, most frequent value for one-hot ones.
  forest.impute.column_names = forest.feature_names;
  forest.impute.fill_values.resize(static_cast<std::size_t>(p));
  Eigen::MatrixXd X(n, p);
  for (std::size_t j = 0; j < static_cast<std::size_t>(p); ++j) {
    std::vector<double> present;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
      if (!FeatureMatrix::is_missing(matrix.at(i, j))) present.push_back(matrix.at(i, j));
    }
    if (present.empty()) {
      raise(ErrorCode::AllMissingColumn, "column '" + forest.feature_names[j] + "' has no values");
    }
    double fill = 0;
    if (is_one_hot_name(forest.feature_names[j])) {
      std::sort(present.begin(), present.end());
      double best_run_value = present.front();
      std::size_t best_run = 0, run = 0;
      for (std::size_t i = 0; i < present.size(); ++i) {
        run = (i > 0 && present[i] == present[i - 1]) ? run + 1 : 1;
        if (run > best_run) {
          best_run = run;
          best_run_value = present[i];
        }
      }
      fill = best_run_value;
    } else {
      fill = node_median(present);
    }
    forest.impute.fill_values[j] = fill;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
      const double cell = matrix.at(i, j);
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          FeatureMatrix::is_missing(cell) ? fill : cell;
    }
  }

  forest.in_bag.resize(static_cast<std::size_t>(params.n_trees));
  forest.trees.resize(static_cast<std::size_t>(params.n_trees));
  parallel_for(static_cast<std::size_t>(params.n_trees), params.n_threads, [&](std::size_t t) {
    std::mt19937_64 rng(mix_seed(params.master_seed, t));
    std::vector<int> sample(static_cast<std::size_t>(n));
    if (params.sample_mode == SampleMode::identity) {
      std::iota(sample.begin(), sample.end(), 0);
    } else {
      std::uniform_int_distribution<int> draw(0, n - 1);
      for (auto& s : sample) s = draw(rng);
    }
    forest.trees[t] = grow_tree(X, outcomes, sample, forest.grid, params, rng);
    forest.in_bag[t] = std::move(sample);
  });
  return forest;
}

StepFunction predict_chf(const SurvivalForest& forest, const Eigen::VectorXd& row) {
  const Eigen::VectorXd x = filled_row(forest, row);
  std::vector<double> values(forest.grid.size(), 0.0);
  for (const auto& tree : forest.trees) {
    const TreeNode& leaf = route(tree, x);
    for (std::size_t g = 0; g < values.size(); ++g) values[g] += leaf.chf[g];
  }
  const auto n_trees = static_cast<double>(forest.trees.size());
  for (double& v : values) v /= n_trees;
  return StepFunction(forest.grid, std::move(values), 0.0);
}

double predict_mortality(const SurvivalForest& forest, const Eigen::VectorXd& row) {
  const StepFunction chf = predict_chf(forest, row);
  double total = 0;
  for (double v : chf.values()) total += v;
  return total;
}

std::vector<double> predict_mortality(const SurvivalForest& forest, const FeatureMatrix& matrix) {
  const Eigen::MatrixXd X = filled_matrix(forest, matrix);
  std::vector<double> scores(static_cast<std::size_t>(X.rows()));
  parallel_for(scores.size(), forest.params.n_threads, [&](std::size_t i) {
    scores[i] = predict_mortality(forest, X.row(static_cast<Eigen::Index>(i)).transpose());
  });
  return scores;
}

double oob_concordance(const SurvivalForest& forest, const FeatureMatrix& matrix,
                       std::span<const SurvivalOutcome> outcomes, int* n_excluded) {
  if (matrix.n_rows() != outcomes.size()) {
    throw std::invalid_argument("matrix rows and outcome count differ");
  }
  const Eigen::MatrixXd X = filled_matrix(forest, matrix);
  return concordance_of_present(oob_mortality(forest, X), outcomes, n_excluded);
}

ImportanceReport permutation_importance(const SurvivalForest& forest, const FeatureMatrix& matrix,
                                        std::span<const SurvivalOutcome> outcomes, int n_repeats,
                                        std::uint64_t seed, PermutationMode mode) {
  if (n_repeats < 1) throw std::invalid_argument("n_repeats must be at least 1");
  const Eigen::MatrixXd X = filled_matrix(forest, matrix);
  const double baseline = concordance_of_present(oob_mortality(forest, X), outcomes, nullptr);

  const auto n = static_cast<std::size_t>(X.rows());
  const auto p = static_cast<std::size_t>(X.cols());
  std::vector<double> importance(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double drop_sum = 0;
    for (int r = 0; r < n_repeats; ++r) {
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      if (mode == PermutationMode::shuffle) {
        std::mt19937_64 rng(mix_seed(seed, j, static_cast<std::uint64_t>(r)));
        std::shuffle(perm.begin(), perm.end(), rng);
      }
      Eigen::MatrixXd Xp = X;
      for (std::size_t i = 0; i < n; ++i) {
        Xp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            X(perm[i], static_cast<Eigen::Index>(j));
      }
      drop_sum += baseline - concordance_of_present(oob_mortality(forest, Xp), outcomes, nullptr);
    }
    importance[j] = drop_sum / n_repeats;
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  ImportanceReport report;
  for (std::size_t k = 0; k < p; ++k) {
    report.feature.push_back(forest.feature_names[order[k]]);
    report.importance.push_back(importance[order[k]]);
    report.rank.push_back(static_cast<int>(k) + 1);
  }
  return report;
}

}  // namespace survkit::forest
