#pragma once

// Cox proportional-hazards machinery: the Efron-corrected partial likelihood
// kernel with exact derivatives, Newton-Raphson fitting with a Breslow
// baseline, the elastic-net penalized path, and componentwise likelihood
// boosting. The three fitters share one likelihood kernel.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "survkit/features.hpp"
#include "survkit/survcore.hpp"

namespace survkit::linmodels {

// Dense copy of a complete matrix; throws IncompleteMatrix on any missing cell.
Eigen::MatrixXd to_eigen(const FeatureMatrix& matrix);

enum class HessianMode { none, diagonal, full };

struct PartialLikelihood {
  double value = 0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd hessian_diag;  // filled in diagonal mode
  Eigen::MatrixXd hessian;       // filled in full mode
};

// Negative log partial likelihood with the Efron correction for tied event
// times, plus exact analytic derivatives. Unscaled (no 1/n).
PartialLikelihood neg_log_partial_likelihood(const Eigen::MatrixXd& X,
                                             std::span<const SurvivalOutcome> outcomes,
                                             const Eigen::VectorXd& beta,
                                             HessianMode mode = HessianMode::full);

// Breslow cumulative baseline hazard for the given linear predictors. With
// eta = 0 this reproduces the Nelson-Aalen estimator term for term.
StepFunction breslow_cumulative_hazard(const Eigen::VectorXd& eta,
                                       std::span<const SurvivalOutcome> outcomes);

struct CoxFitOptions {
  int max_iter = 50;
  double tol = 1e-8;              // gradient max-norm
  double divergence_bound = 50;   // |beta_j| beyond this means separation
};

struct CoxModel {
  std::vector<std::string> feature_names;
  Eigen::VectorXd coefficients;    // input scale
  Eigen::VectorXd feature_means;   // centering used during the fit
  StepFunction baseline_hazard;    // Breslow H0 at beta-hat
  int iterations = 0;
  double final_gradient_norm = 0;
};

CoxModel cox_fit(const FeatureMatrix& matrix, std::span<const SurvivalOutcome> outcomes,
                 const CoxFitOptions& options = {});

// beta' (x - mean); the Cox-family risk score.
double cox_linear_predictor(const CoxModel& model, const Eigen::VectorXd& row);

// S(t | x) = exp(-H0(t) * exp(linear predictor)).
double cox_predict_survival(const CoxModel& model, const Eigen::VectorXd& row, double horizon_days);

struct PenalizedCoxPath {
  double alpha = 0.5;
  std::vector<std::string> feature_names;
  std::vector<double> lambdas;                 // descending
  std::vector<Eigen::VectorXd> coefficients;   // input scale, one per lambda
  std::vector<Eigen::VectorXd> coefficients_std;  // standardized scale (KKT space)
  std::vector<double> kkt_residuals;           // certified per lambda
  std::vector<int> n_nonzero;
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_scales;
  double lambda_max = 0;
};

// Minimizes (1/n) * neg log partial likelihood + lambda * (alpha*|beta|_1 +
// (1-alpha)/2*|beta|_2^2) over a descending lambda grid with warm starts.
// Auto grid: 100 log-spaced points from lambda_max down to 0.001*lambda_max.
PenalizedCoxPath elastic_net_cox_fit(const FeatureMatrix& matrix,
                                     std::span<const SurvivalOutcome> outcomes, double alpha,
                                     const std::vector<double>& lambda_grid = {});

// KKT subgradient residual (max-norm) of the elastic-net objective at
// beta_std, computed in standardized space from scratch. X_std must carry
// standardized columns. Exposed so certificates can be recomputed
// independently of the solver's own bookkeeping.
double elastic_net_kkt_residual(const Eigen::MatrixXd& X_std,
                                std::span<const SurvivalOutcome> outcomes,
                                const Eigen::VectorXd& beta_std, double lambda, double alpha);

struct BoostedCoxModel {
  std::vector<std::string> feature_names;
  double nu = 0.1;
  int iterations = 0;
  Eigen::VectorXd coefficients;      // input scale
  Eigen::VectorXd coefficients_std;  // standardized scale (selection scores)
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_scales;
  std::vector<int> selection_log;    // chosen column per iteration, length M
};

// Componentwise likelihood boosting: per iteration pick the column maximizing
// score^2/information at the current beta (ties -> lowest index) and take a
// nu-damped Newton step on that coordinate alone.
BoostedCoxModel coxboost_fit(const FeatureMatrix& matrix, std::span<const SurvivalOutcome> outcomes,
                             double nu, int iterations);

struct ImputeStats {
  std::vector<std::string> column_names;
  std::vector<double> fill_values;  // median for numeric, 0 for one-hot columns
};

struct ImputeResult {
  FeatureMatrix matrix;
  ImputeStats stats;
};

// Fills missing cells with the training-column median (one-hot `name=level`
// columns fill with 0 instead, so an absent source maps to an all-zero
// group). Pass training stats to reuse them verbatim on held-out rows.
ImputeResult impute_for_linear(const FeatureMatrix& matrix,
                               const ImputeStats* training_stats = nullptr);

}  // namespace survkit::linmodels
