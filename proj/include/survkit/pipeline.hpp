#pragma once

// Cross-validated comparison of the five model families, final-model
// training, and death-probability prediction at configurable horizons.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "survkit/features.hpp"
#include "survkit/forest.hpp"
#include "survkit/linmodels.hpp"
#include "survkit/survcore.hpp"

namespace survkit::pipeline {

// Canonical comparison order; ties in mean c-index resolve to the earlier kind.
enum class ModelKind { tree, forest, cox, elastic_net, boosted };

std::string_view model_name(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::forest;

  // tree / forest (the tree always considers every feature at each node)
  int n_trees = 200;
  int mtry = 0;  // 0 = floor(sqrt(p))
  int min_node_size = 15;
  int min_events_per_node = 3;

  // elastic net: fit the automatic path, keep the grid point nearest
  // lambda_fraction * lambda_max (no tuning loop by design)
  double enet_alpha = 0.5;
  double enet_lambda_fraction = 0.1;

  // componentwise boosting
  double boost_nu = 0.1;
  int boost_iterations = 100;
};

// The five default specs in canonical order.
std::vector<ModelSpec> default_specs();

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // per subject, 0..k-1

  bool operator==(const FoldPlan&) const = default;
};

// Seeded shuffle of subject indices dealt round-robin, so fold sizes differ
// by at most one. Requires 2 <= k <= n (BadK).
FoldPlan kfold_split(std::size_t n, int k, std::uint64_t seed);

// Cox-family models predict through beta' (x - mean) and a Breslow baseline
// computed at the fitted coefficients on the training data.
struct LinearSurvivalModel {
  std::vector<std::string> feature_names;
  linmodels::ImputeStats impute;
  Eigen::VectorXd coefficients;  // input scale
  Eigen::VectorXd feature_means;
  StepFunction baseline;  // H0(t), paired with the centered linear predictor
};

struct FittedModel {
  ModelKind kind = ModelKind::forest;
  forest::SurvivalForest forest_model;  // tree / forest kinds
  LinearSurvivalModel linear_model;     // cox / elastic_net / boosted kinds
};

// Fits one spec on the given data, imputing from these rows only. `seed`
// drives the forest bootstrap; deterministic models ignore it.
FittedModel train_final(const ModelSpec& spec, const FeatureMatrix& matrix,
                        std::span<const SurvivalOutcome> outcomes, std::uint64_t seed,
                        int n_threads = 1);

// Risk scores under each family's convention: linear predictor for the Cox
// family, mortality for tree/forest. Higher = riskier. Missing cells are
// filled from the model's training statistics.
std::vector<double> risk_scores(const FittedModel& model, const FeatureMatrix& rows);

// Training column order of whichever family the model holds.
const std::vector<std::string>& feature_names(const FittedModel& model);

struct ModelCv {
  ModelKind kind = ModelKind::forest;
  std::string model;                // canonical name
  std::vector<double> fold_cindex;  // one per fold, fold order
  double mean = 0;
  double min = 0;
  double max = 0;
};

struct CvReport {
  int k = 0;
  std::uint64_t seed = 0;  // seed of the accepted fold plan
  std::vector<ModelCv> models;
  std::string winner;  // argmax mean, ties to the earlier canonical kind
};

// Fits every spec on each k-1 training split and scores the held-out fold.
// Imputation and standardization see training rows only. Plans whose
// training side lacks an event, or whose held-out side has no permissible
// pair, are re-dealt with seed+1 up to 10 attempts (then FoldDegenerate).
CvReport cross_validate(std::span<const ModelSpec> specs, const FeatureMatrix& matrix,
                        std::span<const SurvivalOutcome> outcomes, int k, std::uint64_t seed,
                        int n_threads = 1);

struct PredictionSet {
  std::vector<std::string> subject_ids;
  std::vector<double> horizons;                  // ascending, days
  std::vector<std::vector<double>> probability;  // [subject][horizon]
};

// Death probability 1 - S(t | x) at each horizon: Cox family via the Breslow
// baseline, tree/forest via 1 - exp(-ensemble CHF(t)). Horizons must be
// nonempty (EmptyHorizons), nonnegative, strictly ascending.
PredictionSet predict_death(const FittedModel& model, const FeatureMatrix& rows,
                            std::span<const double> horizons);

// `model,fold,cindex` block, then a `model,mean,min,max` summary block.
void write_cv_csv(const CvReport& report, std::ostream& out);
// One row per model: `model,mean,lower,upper` (fold minimum and maximum).
void write_fig2b_csv(const CvReport& report, std::ostream& out);
// Long form: `subject_id,horizon_days,death_probability`.
void write_predictions_csv(const PredictionSet& predictions, std::ostream& out);

}  // namespace survkit::pipeline
