#pragma once

// Survival trees split by the two-sample log-rank statistic, and the bagged
// ensemble on top of them: bootstrap resampling, random feature subsets per
// node, terminal-node Nelson-Aalen hazards on a shared event-time grid,
// out-of-bag concordance, and permutation importance.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "survkit/features.hpp"
#include "survkit/linmodels.hpp"
#include "survkit/survcore.hpp"

namespace survkit::forest {

// Standardized two-sample log-rank statistic in squared form, (O-E)^2/V over
// the pooled event times. Larger means better separation. Throws
// DegenerateSplit when the variance is zero (one side never contributes
// at-risk variation, e.g. all its subjects leave before the first event).
double logrank_split_statistic(std::span<const SurvivalOutcome> left,
                               std::span<const SurvivalOutcome> right);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  bool missing_goes_left = true;  // reserved; cells are imputed upstream today
  int left = -1;
  int right = -1;
  std::vector<double> chf;  // leaf only: Nelson-Aalen values on the grid
  int n_members = 0;        // leaf only, counted with bootstrap multiplicity
  int n_events = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Nodes in preorder; nodes[0] is the root, children before siblings.
struct SurvivalTree {
  std::vector<TreeNode> nodes;

  bool operator==(const SurvivalTree&) const = default;
};

enum class SampleMode { bootstrap, identity };  // identity is a test hook

struct ForestParams {
  int n_trees = 200;
  int mtry = 0;  // features tried per node; 0 = floor(sqrt(p))
  int min_node_size = 15;       // nodes smaller than this become leaves
  int min_events_per_node = 3;  // likewise for observed events
  std::uint64_t master_seed = 0;
  int n_threads = 1;
  SampleMode sample_mode = SampleMode::bootstrap;
};

struct SurvivalForest {
  std::vector<std::string> feature_names;
  linmodels::ImputeStats impute;         // training fills, reused at prediction
  std::vector<double> grid;              // distinct training event times
  std::vector<std::vector<int>> in_bag;  // per tree, drawn subject indices
  std::vector<SurvivalTree> trees;
  ForestParams params;
};

// Grows one tree on `sample` (subject indices, repeats allowed); X must be
// complete. At each node mtry features are drawn without replacement from
// rng, every midpoint between consecutive distinct values is scored, and the
// best (feature, threshold) wins with ties going to the lowest feature index
// then the lowest threshold. Leaf hazards are evaluated on `grid`. Degenerate
// inputs yield a single leaf. Exposed for tests; fitting goes through
// fit_forest.
SurvivalTree grow_tree(const Eigen::MatrixXd& X, std::span<const SurvivalOutcome> outcomes,
                       std::span<const int> sample, std::span<const double> grid,
                       const ForestParams& params, std::mt19937_64& rng);

// Fits params.n_trees trees on bootstrap samples (n draws with replacement).
// Missing cells are filled with the training median first (most frequent
// value for one-hot columns). Tree t seeds its RNG from
// mix_seed(master_seed, t), so the result is bit-identical for every thread
// count.
SurvivalForest fit_forest(const FeatureMatrix& matrix, std::span<const SurvivalOutcome> outcomes,
                          const ForestParams& params = {});

// Ensemble cumulative hazard: pointwise mean of terminal-node hazards over
// all trees. NaN cells in `row` are filled from the training stats.
StepFunction predict_chf(const SurvivalForest& forest, const Eigen::VectorXd& row);

// Mortality = ensemble hazard summed over the grid; the forest risk score.
double predict_mortality(const SurvivalForest& forest, const Eigen::VectorXd& row);

// Per-subject mortality for a whole matrix. Columns must match training
// (UnknownFeature otherwise).
std::vector<double> predict_mortality(const SurvivalForest& forest, const FeatureMatrix& matrix);

// Concordance of mortality scores computed per subject from the trees whose
// bootstrap sample missed it. Subjects that are in-bag everywhere are
// dropped (count reported through n_excluded when given); throws
// NoOobSubjects when nobody is left.
double oob_concordance(const SurvivalForest& forest, const FeatureMatrix& matrix,
                       std::span<const SurvivalOutcome> outcomes, int* n_excluded = nullptr);

struct ImportanceReport {
  std::vector<std::string> feature;  // sorted by importance, descending
  std::vector<double> importance;    // mean OOB c-index drop under permutation
  std::vector<int> rank;             // 1..p in report order
};

enum class PermutationMode { shuffle, identity };  // identity is a test hook

// Mean drop in OOB concordance when one feature's (imputed) column is
// permuted, averaged over n_repeats seeded permutations. Deterministic given
// the seed; ties in importance rank by column order.
ImportanceReport permutation_importance(const SurvivalForest& forest, const FeatureMatrix& matrix,
                                        std::span<const SurvivalOutcome> outcomes, int n_repeats,
                                        std::uint64_t seed,
                                        PermutationMode mode = PermutationMode::shuffle);

}  // namespace survkit::forest
