#include "survkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "survkit/errors.hpp"
#include "survkit/parallel.hpp"
#include "survkit/rng.hpp"
#include "survkit/text.hpp"

namespace survkit::pipeline {

namespace {

Eigen::VectorXd matrix_row(const FeatureMatrix& m, std::size_t i) {
  Eigen::VectorXd row(static_cast<Eigen::Index>(m.n_cols()));
  for (std::size_t j = 0; j < m.n_cols(); ++j) row[static_cast<Eigen::Index>(j)] = m.at(i, j);
  return row;
}

double linear_predictor(const LinearSurvivalModel& model, const Eigen::VectorXd& row) {
  return model.coefficients.dot(row - model.feature_means);
}

// Imputes with the model's training fills and checks the column contract.
FeatureMatrix filled_for_linear(const LinearSurvivalModel& model, const FeatureMatrix& rows) {
  if (rows.column_names() != model.feature_names) {
    raise(ErrorCode::UnknownFeature, "prediction columns do not match the trained model");
  }
  return linmodels::impute_for_linear(rows, &model.impute).matrix;
}

LinearSurvivalModel fit_cox(const FeatureMatrix& matrix,
                            std::span<const SurvivalOutcome> outcomes) {
  const auto imputed = linmodels::impute_for_linear(matrix);
  const auto cox = linmodels::cox_fit(imputed.matrix, outcomes);
  LinearSurvivalModel model;
  model.feature_names = cox.feature_names;
  model.impute = imputed.stats;
  model.coefficients = cox.coefficients;
  model.feature_means = cox.feature_means;
  model.baseline = cox.baseline_hazard;
  return model;
}

LinearSurvivalModel fit_elastic_net(const ModelSpec& spec, const FeatureMatrix& matrix,
                                    std::span<const SurvivalOutcome> outcomes) {
  const auto imputed = linmodels::impute_for_linear(matrix);
  const auto path = linmodels::elastic_net_cox_fit(imputed.matrix, outcomes, spec.enet_alpha);
  const double target = spec.enet_lambda_fraction * path.lambda_max;
  std::size_t pick = 0;
  for (std::size_t l = 1; l < path.lambdas.size(); ++l) {
    if (std::abs(path.lambdas[l] - target) < std::abs(path.lambdas[pick] - target)) pick = l;
  }

  LinearSurvivalModel model;
  model.feature_names = path.feature_names;
  model.impute = imputed.stats;
  model.coefficients = path.coefficients[pick];
  model.feature_means = path.feature_means;

  const Eigen::MatrixXd X = linmodels::to_eigen(imputed.matrix);
  const Eigen::VectorXd eta =
      (X.rowwise() - model.feature_means.transpose()) * model.coefficients;
  model.baseline = linmodels::breslow_cumulative_hazard(eta, outcomes);
  return model;
}

LinearSurvivalModel fit_boosted(const ModelSpec& spec, const FeatureMatrix& matrix,
                                std::span<const SurvivalOutcome> outcomes) {
  const auto imputed = linmodels::impute_for_linear(matrix);
  const auto boosted =
      linmodels::coxboost_fit(imputed.matrix, outcomes, spec.boost_nu, spec.boost_iterations);
  LinearSurvivalModel model;
  model.feature_names = boosted.feature_names;
  model.impute = imputed.stats;
  model.coefficients = boosted.coefficients;
  model.feature_means = boosted.feature_means;

  const Eigen::MatrixXd X = linmodels::to_eigen(imputed.matrix);
  const Eigen::VectorXd eta =
      (X.rowwise() - model.feature_means.transpose()) * model.coefficients;
  model.baseline = linmodels::breslow_cumulative_hazard(eta, outcomes);
  return model;
}

forest::SurvivalForest fit_forest_family(const ModelSpec& spec, const FeatureMatrix& matrix,
                                         std::span<const SurvivalOutcome> outcomes,
                                         std::uint64_t seed, int n_threads) {
  forest::ForestParams params;
  params.min_node_size = spec.min_node_size;
  params.min_events_per_node = spec.min_events_per_node;
  params.master_seed = seed;
  params.n_threads = n_threads;
  if (spec.kind == ModelKind::tree) {
    params.n_trees = 1;
    params.mtry = static_cast<int>(matrix.n_cols());  // deterministic exhaustive splits
    params.sample_mode = forest::SampleMode::identity;
  } else {
    params.n_trees = spec.n_trees;
    params.mtry = spec.mtry;
    params.sample_mode = forest::SampleMode::bootstrap;
  }
  return forest::fit_forest(matrix, outcomes, params);
}

bool is_forest_family(ModelKind kind) {
  return kind == ModelKind::tree || kind == ModelKind::forest;
}

// A held-out fold is scoreable when some event subject is followed by a
// strictly longer time inside the fold (the permissible-pair condition).
bool fold_scoreable(std::span<const SurvivalOutcome> outcomes, std::span<const int> assignment,
                    int fold) {
  double earliest_event = std::numeric_limits<double>::infinity();
  double latest_time = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (assignment[i] != fold) continue;
    if (outcomes[i].event) earliest_event = std::min(earliest_event, outcomes[i].time_days);
    latest_time = std::max(latest_time, outcomes[i].time_days);
  }
  return earliest_event < latest_time;
}

bool training_has_event(std::span<const SurvivalOutcome> outcomes,
                        std::span<const int> assignment, int fold) {
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (assignment[i] != fold && outcomes[i].event) return true;
  }
  return false;
}

}  // namespace

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::tree: return "tree";
    case ModelKind::forest: return "forest";
    case ModelKind::cox: return "cox";
    case ModelKind::elastic_net: return "elastic-net";
    case ModelKind::boosted: return "boosted";
  }
  std::abort();
}

std::vector<ModelSpec> default_specs() {
  std::vector<ModelSpec> specs(5);
  specs[0].kind = ModelKind::tree;
  specs[1].kind = ModelKind::forest;
  specs[2].kind = ModelKind::cox;
  specs[3].kind = ModelKind::elastic_net;
  specs[4].kind = ModelKind::boosted;
  return specs;
}

FoldPlan kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n) {
    raise(ErrorCode::BadK, "need 2 <= k <= n, got k=" + format_int(k) +
                               " with n=" + format_int(static_cast<long long>(n)));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) plan.assignment[order[i]] = static_cast<int>(i % k);
  return plan;
}

FittedModel train_final(const ModelSpec& spec, const FeatureMatrix& matrix,
                        std::span<const SurvivalOutcome> outcomes, std::uint64_t seed,
                        int n_threads) {
  FittedModel model;
  model.kind = spec.kind;
  switch (spec.kind) {
    case ModelKind::tree:
    case ModelKind::forest:
      model.forest_model = fit_forest_family(spec, matrix, outcomes, seed, n_threads);
      break;
    case ModelKind::cox:
      model.linear_model = fit_cox(matrix, outcomes);
      break;
    case ModelKind::elastic_net:
      model.linear_model = fit_elastic_net(spec, matrix, outcomes);
      break;
    case ModelKind::boosted:
      model.linear_model = fit_boosted(spec, matrix, outcomes);
      break;
  }
  return model;
}

const std::vector<std::string>& feature_names(const FittedModel& model) {
  return is_forest_family(model.kind) ? model.forest_model.feature_names
                                      : model.linear_model.feature_names;
}

std::vector<double> risk_scores(const FittedModel& model, const FeatureMatrix& rows) {
  if (is_forest_family(model.kind)) {
    return forest::predict_mortality(model.forest_model, rows);
  }
  const FeatureMatrix filled = filled_for_linear(model.linear_model, rows);
  std::vector<double> scores(filled.n_rows());
  for (std::size_t i = 0; i < filled.n_rows(); ++i) {
    scores[i] = linear_predictor(model.linear_model, matrix_row(filled, i));
  }
  return scores;
}

CvReport cross_validate(std::span<const ModelSpec> specs, const FeatureMatrix& matrix,
                        std::span<const SurvivalOutcome> outcomes, int k, std::uint64_t seed,
                        int n_threads) {
  if (specs.empty()) throw std::invalid_argument("cross_validate: no model specs");
  if (matrix.n_rows() != outcomes.size()) {
    throw std::invalid_argument("cross_validate: row/outcome count mismatch");
  }

  FoldPlan plan;
  bool usable = false;
  for (int attempt = 0; attempt < 10; ++attempt) {
    plan = kfold_split(outcomes.size(), k, seed + static_cast<std::uint64_t>(attempt));
    usable = true;
    for (int f = 0; f < k && usable; ++f) {
      usable = training_has_event(outcomes, plan.assignment, f) &&
               fold_scoreable(outcomes, plan.assignment, f);
    }
    if (usable) break;
  }
  if (!usable) {
    raise(ErrorCode::FoldDegenerate,
          "no fold plan with events in every training split after 10 attempts");
  }

  // All cells are independent; each fits single-threaded so the cell grid can
  // fan out. Results are thread-invariant either way.
  const std::size_t n_cells = specs.size() * static_cast<std::size_t>(k);
  std::vector<double> cell_cindex(n_cells, 0.0);
  std::vector<std::exception_ptr> cell_error(n_cells);
  parallel_for(n_cells, n_threads, [&](std::size_t cell) {
    const std::size_t s = cell / static_cast<std::size_t>(k);
    const int f = static_cast<int>(cell % static_cast<std::size_t>(k));
    try {
      std::vector<std::size_t> train_rows, test_rows;
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        (plan.assignment[i] == f ? test_rows : train_rows).push_back(i);
      }
      std::vector<SurvivalOutcome> train_out, test_out;
      for (std::size_t i : train_rows) train_out.push_back(outcomes[i]);
      for (std::size_t i : test_rows) test_out.push_back(outcomes[i]);

      const FittedModel fitted =
          train_final(specs[s], matrix.select_rows(train_rows), train_out,
                      mix_seed(seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(f)),
                      1);
      const auto scores = risk_scores(fitted, matrix.select_rows(test_rows));
      cell_cindex[cell] = concordance_index(scores, test_out);
    } catch (...) {
      cell_error[cell] = std::current_exception();
    }
  });
  for (const auto& err : cell_error) {
    if (err) std::rethrow_exception(err);
  }

  CvReport report;
  report.k = k;
  report.seed = plan.seed;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    ModelCv cv;
    cv.kind = specs[s].kind;
    cv.model = std::string(model_name(specs[s].kind));
    cv.fold_cindex.assign(cell_cindex.begin() + static_cast<std::ptrdiff_t>(s * k),
                          cell_cindex.begin() + static_cast<std::ptrdiff_t>((s + 1) * k));
    cv.mean = std::accumulate(cv.fold_cindex.begin(), cv.fold_cindex.end(), 0.0) /
              static_cast<double>(k);
    cv.min = *std::min_element(cv.fold_cindex.begin(), cv.fold_cindex.end());
    cv.max = *std::max_element(cv.fold_cindex.begin(), cv.fold_cindex.end());
    report.models.push_back(std::move(cv));
  }

  std::size_t best = 0;
  for (std::size_t s = 1; s < report.models.size(); ++s) {
    const auto& a = report.models[s];
    const auto& b = report.models[best];
    if (a.mean > b.mean || (a.mean == b.mean && a.kind < b.kind)) best = s;
  }
  report.winner = report.models[best].model;
  return report;
}

PredictionSet predict_death(const FittedModel& model, const FeatureMatrix& rows,
                            std::span<const double> horizons) {
  if (horizons.empty()) raise(ErrorCode::EmptyHorizons, "at least one horizon is required");
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    if (horizons[h] < 0 || (h > 0 && horizons[h] <= horizons[h - 1])) {
      throw std::invalid_argument("horizons must be nonnegative and strictly ascending");
    }
  }

  PredictionSet set;
  set.subject_ids = rows.subject_ids();
  set.horizons.assign(horizons.begin(), horizons.end());
  set.probability.resize(rows.n_rows());

  if (is_forest_family(model.kind)) {
    const FeatureMatrix& f_rows = rows;  // predict_chf fills per row
    if (f_rows.column_names() != model.forest_model.feature_names) {
      raise(ErrorCode::UnknownFeature, "prediction columns do not match the trained model");
    }
    for (std::size_t i = 0; i < f_rows.n_rows(); ++i) {
      const StepFunction chf = forest::predict_chf(model.forest_model, matrix_row(f_rows, i));
      for (const double t : horizons) {
        set.probability[i].push_back(1.0 - std::exp(-chf(t)));
      }
    }
    return set;
  }

  const FeatureMatrix filled = filled_for_linear(model.linear_model, rows);
  for (std::size_t i = 0; i < filled.n_rows(); ++i) {
    const double eta = linear_predictor(model.linear_model, matrix_row(filled, i));
    for (const double t : horizons) {
      set.probability[i].push_back(1.0 - std::exp(-model.linear_model.baseline(t) * std::exp(eta)));
    }
  }
  return set;
}

void write_cv_csv(const CvReport& report, std::ostream& out) {
  out << "model,fold,cindex\n";
  for (const auto& cv : report.models) {
    for (std::size_t f = 0; f < cv.fold_cindex.size(); ++f) {
      out << cv.model << ',' << format_int(static_cast<long long>(f) + 1) << ','
          << format_double(cv.fold_cindex[f]) << '\n';
    }
  }
  out << "model,mean,min,max\n";
  for (const auto& cv : report.models) {
    out << cv.model << ',' << format_double(cv.mean) << ',' << format_double(cv.min) << ','
        << format_double(cv.max) << '\n';
  }
}

void write_fig2b_csv(const CvReport& report, std::ostream& out) {
  out << "model,mean,lower,upper\n";
  for (const auto& cv : report.models) {
    out << cv.model << ',' << format_double(cv.mean) << ',' << format_double(cv.min) << ','
        << format_double(cv.max) << '\n';
  }
}

void write_predictions_csv(const PredictionSet& predictions, std::ostream& out) {
  out << "subject_id,horizon_days,death_probability\n";
  for (std::size_t i = 0; i < predictions.subject_ids.size(); ++i) {
    for (std::size_t h = 0; h < predictions.horizons.size(); ++h) {
      out << predictions.subject_ids[i] << ',' << format_double(predictions.horizons[h]) << ','
          << format_double(predictions.probability[i][h]) << '\n';
    }
  }
}

}  // namespace survkit::pipeline
