#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "helpers.hpp"
#include "survkit/errors.hpp"
#include "survkit/features.hpp"
#include "survkit/forest.hpp"
#include "survkit/linmodels.hpp"
#include "survkit/pipeline.hpp"
#include "survkit/rng.hpp"
#include "survkit/survcore.hpp"
#include "survkit/synthgen.hpp"

using namespace survkit;
using namespace survkit::pipeline;
using testutil::cens;
using testutil::error_code_of;
using testutil::ev;

namespace {

FeatureMatrix make_matrix(const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& rows) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back("s" + std::to_string(i + 1));
  FeatureMatrix m(ids, names);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) m.set(i, j, rows[i][j]);
  }
  return m;
}

struct Instance {
  FeatureMatrix matrix;
  std::vector<SurvivalOutcome> outcomes;
};

// Three standard-normal covariates, only the first drives the hazard.
Instance linear_instance(std::size_t n, std::uint64_t seed, double beta1 = 1.2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0, 1);
  std::uniform_real_distribution<double> uniform(0, 1);
  std::vector<std::vector<double>> rows;
  std::vector<SurvivalOutcome> outcomes;
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = normal(rng), x2 = normal(rng), x3 = normal(rng);
    rows.push_back({x1, x2, x3});
    const double rate = 0.01 * std::exp(beta1 * x1);
    outcomes.push_back({std::max(1e-6, -std::log(1 - uniform(rng)) / rate), uniform(rng) < 0.8});
  }
  return {make_matrix({"x1", "x2", "x3"}, rows), std::move(outcomes)};
}

// Binary marker that separates survival perfectly: carriers die at day 10,
// the rest at day 20.
Instance separable_instance(std::size_t n_per_arm) {
  std::vector<std::vector<double>> rows;
  std::vector<SurvivalOutcome> outcomes;
  for (std::size_t i = 0; i < 2 * n_per_arm; ++i) {
    const double x = (i % 2 == 0) ? 1.0 : 0.0;
    rows.push_back({x});
    outcomes.push_back(ev(x > 0.5 ? 10 : 20));
  }
  return {make_matrix({"marker"}, rows), std::move(outcomes)};
}

std::vector<int> fold_sizes(const FoldPlan& plan) {
  std::vector<int> sizes(static_cast<std::size_t>(plan.k), 0);
  for (int f : plan.assignment) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

ModelSpec spec_of(ModelKind kind) {
  ModelSpec spec;
  spec.kind = kind;
  return spec;
}

ModelSpec small_forest_spec() {
  ModelSpec spec;
  spec.kind = ModelKind::forest;
  spec.n_trees = 30;
  return spec;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("round-robin folds split ten subjects into five pairs") {
  const auto plan = kfold_split(10, 5, 1);
  CHECK(plan.k == 5);
  CHECK(fold_sizes(plan) == std::vector<int>{2, 2, 2, 2, 2});

  const auto uneven = kfold_split(11, 5, 1);
  auto sizes = fold_sizes(uneven);
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  CHECK(sizes == std::vector<int>{3, 2, 2, 2, 2});

  CHECK(kfold_split(10, 5, 42) == kfold_split(10, 5, 42));
  CHECK(kfold_split(10, 5, 42) != kfold_split(10, 5, 43));
}

TEST_CASE("fold sizes never differ by more than one") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 30; ++round) {
    const std::size_t n = 2 + rng() % 40;
    const int k = 2 + static_cast<int>(rng() % (n - 1));
    const auto plan = kfold_split(n, k, rng());
    REQUIRE(plan.assignment.size() == n);
    const auto sizes = fold_sizes(plan);
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*hi - *lo <= 1);
    CHECK(std::accumulate(sizes.begin(), sizes.end(), 0) == static_cast<int>(n));
  }
}

TEST_CASE("fold counts outside 2..n are rejected") {
  CHECK(error_code_of([] { kfold_split(10, 1, 0); }) == ErrorCode::BadK);
  CHECK(error_code_of([] { kfold_split(10, 11, 0); }) == ErrorCode::BadK);
  CHECK(error_code_of([] { kfold_split(3, 0, 0); }) == ErrorCode::BadK);
}

TEST_CASE("a perfectly separable marker scores both folds identically") {
  // arms of 20 keep each training fold above the tree's size floor
  const auto inst = separable_instance(20);
  const std::vector<ModelSpec> specs = {spec_of(ModelKind::tree)};
  const auto report = cross_validate(specs, inst.matrix, inst.outcomes, 2, 3);
  REQUIRE(report.models.size() == 1);
  CHECK(report.models[0].fold_cindex[0] == 1.0);
  CHECK(report.models[0].fold_cindex[1] == 1.0);
  CHECK(report.winner == "tree");
}

TEST_CASE("report aggregates recompute from the fold values") {
  const auto inst = linear_instance(120, 5);
  const std::vector<ModelSpec> specs = {spec_of(ModelKind::tree), spec_of(ModelKind::cox)};
  const auto report = cross_validate(specs, inst.matrix, inst.outcomes, 4, 11);
  CHECK(report.k == 4);
  for (const auto& cv : report.models) {
    REQUIRE(cv.fold_cindex.size() == 4);
    const double mean = std::accumulate(cv.fold_cindex.begin(), cv.fold_cindex.end(), 0.0) / 4;
    CHECK(cv.mean == mean);
    CHECK(cv.min == *std::min_element(cv.fold_cindex.begin(), cv.fold_cindex.end()));
    CHECK(cv.max == *std::max_element(cv.fold_cindex.begin(), cv.fold_cindex.end()));
    CHECK(cv.min <= cv.mean);
    CHECK(cv.mean <= cv.max);
    for (double c : cv.fold_cindex) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
  }
}

TEST_CASE("linear truth favors the proportional-hazards fit over a single tree") {
  const auto inst = linear_instance(300, 13);
  const std::vector<ModelSpec> specs = {spec_of(ModelKind::tree), spec_of(ModelKind::cox)};
  const auto report = cross_validate(specs, inst.matrix, inst.outcomes, 5, 17);
  CHECK(report.models[1].mean >= report.models[0].mean);
  CHECK(report.winner == "cox");
}

TEST_CASE("tied means pick the earlier kind in canonical order") {
  const auto inst = separable_instance(20);
  // both models separate perfectly, so every fold scores 1.0
  const std::vector<ModelSpec> specs = {spec_of(ModelKind::boosted), spec_of(ModelKind::tree)};
  const auto report = cross_validate(specs, inst.matrix, inst.outcomes, 2, 5);
  CHECK(report.models[0].mean == 1.0);
  CHECK(report.models[1].mean == 1.0);
  CHECK(report.winner == "tree");
}

TEST_CASE("a lone event makes every two-fold plan degenerate") {
  std::vector<std::vector<double>> rows(6, {1.0});
  auto matrix = make_matrix({"x"}, rows);
  for (std::size_t i = 0; i < 6; ++i) matrix.set(i, 0, static_cast<double>(i));
  const std::vector<SurvivalOutcome> outcomes = {ev(5),   cens(10), cens(11),
                                                 cens(12), cens(13), cens(14)};
  const std::vector<ModelSpec> specs = {spec_of(ModelKind::tree)};
  CHECK(error_code_of([&] { cross_validate(specs, matrix, outcomes, 2, 1); }) ==
        ErrorCode::FoldDegenerate);
}

TEST_CASE("cross-validation is reproducible and thread-count invariant") {
  const auto inst = linear_instance(150, 19);
  const std::vector<ModelSpec> specs = {spec_of(ModelKind::tree), small_forest_spec(),
                                        spec_of(ModelKind::cox),
                                        spec_of(ModelKind::elastic_net),
                                        spec_of(ModelKind::boosted)};
  const auto serial = cross_validate(specs, inst.matrix, inst.outcomes, 3, 23, 1);
  const auto threaded = cross_validate(specs, inst.matrix, inst.outcomes, 3, 23, 4);

  std::ostringstream a, b;
  write_cv_csv(serial, a);
  write_cv_csv(threaded, b);
  CHECK(a.str() == b.str());
  CHECK(serial.winner == threaded.winner);

  const auto rerun = cross_validate(specs, inst.matrix, inst.outcomes, 3, 23, 2);
  std::ostringstream c;
  write_cv_csv(rerun, c);
  CHECK(c.str() == a.str());
}

TEST_CASE("fold scores recompute from training rows alone") {
  const auto inst = linear_instance(90, 29);
  const std::vector<ModelSpec> specs = {spec_of(ModelKind::cox), small_forest_spec()};
  const std::uint64_t seed = 31;
  const int k = 3;
  const auto report = cross_validate(specs, inst.matrix, inst.outcomes, k, seed);
  const auto plan = kfold_split(inst.outcomes.size(), k, report.seed);

  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (int f = 0; f < k; ++f) {
      std::vector<std::size_t> train_rows, test_rows;
      for (std::size_t i = 0; i < inst.outcomes.size(); ++i) {
        (plan.assignment[i] == f ? test_rows : train_rows).push_back(i);
      }
      std::vector<SurvivalOutcome> train_out, test_out;
      for (std::size_t i : train_rows) train_out.push_back(inst.outcomes[i]);
      for (std::size_t i : test_rows) test_out.push_back(inst.outcomes[i]);

      // an independent fit that by construction never sees the held-out rows
      const auto fitted = train_final(specs[s], inst.matrix.select_rows(train_rows), train_out,
                                      mix_seed(seed, s, static_cast<std::uint64_t>(f)));
      const auto scores = risk_scores(fitted, inst.matrix.select_rows(test_rows));
      CHECK(report.models[s].fold_cindex[static_cast<std::size_t>(f)] ==
            concordance_index(scores, test_out));
    }
  }
}

TEST_CASE("held-out corruption cannot reach training statistics") {
  const auto inst = linear_instance(60, 37);
  const auto plan = kfold_split(inst.outcomes.size(), 3, 41);
  std::vector<std::size_t> train_rows;
  std::vector<SurvivalOutcome> train_out;
  for (std::size_t i = 0; i < inst.outcomes.size(); ++i) {
    if (plan.assignment[i] != 0) {
      train_rows.push_back(i);
      train_out.push_back(inst.outcomes[i]);
    }
  }

  FeatureMatrix corrupted = inst.matrix;
  for (std::size_t i = 0; i < inst.outcomes.size(); ++i) {
    if (plan.assignment[i] == 0) {
      for (std::size_t j = 0; j < corrupted.n_cols(); ++j) corrupted.set(i, j, 1e9);
    }
  }

  const auto clean_fit = train_final(spec_of(ModelKind::cox), inst.matrix.select_rows(train_rows),
                                     train_out, 0);
  const auto dirty_fit = train_final(spec_of(ModelKind::cox), corrupted.select_rows(train_rows),
                                     train_out, 0);
  CHECK(clean_fit.linear_model.impute.fill_values == dirty_fit.linear_model.impute.fill_values);
  CHECK(clean_fit.linear_model.feature_means == dirty_fit.linear_model.feature_means);
  CHECK(clean_fit.linear_model.coefficients == dirty_fit.linear_model.coefficients);
  CHECK(clean_fit.linear_model.baseline == dirty_fit.linear_model.baseline);
}

TEST_CASE("risk scores follow each family's convention") {
  const auto inst = linear_instance(80, 43);

  const auto cox = train_final(spec_of(ModelKind::cox), inst.matrix, inst.outcomes, 0);
  const auto cox_scores = risk_scores(cox, inst.matrix);
  for (std::size_t i = 0; i < inst.matrix.n_rows(); ++i) {
    Eigen::VectorXd row(3);
    for (std::size_t j = 0; j < 3; ++j) row[static_cast<Eigen::Index>(j)] = inst.matrix.at(i, j);
    CHECK(cox_scores[i] ==
          cox.linear_model.coefficients.dot(row - cox.linear_model.feature_means));
  }

  const auto rsf = train_final(small_forest_spec(), inst.matrix, inst.outcomes, 7);
  CHECK(risk_scores(rsf, inst.matrix) == forest::predict_mortality(rsf.forest_model, inst.matrix));
}

TEST_CASE("a symmetric design fits a null model whose predictions are Nelson-Aalen") {
  // Pairs with opposite covariate values and identical outcomes zero the
  // score at the origin, so the fit stays exactly at beta = 0.
  const auto matrix = make_matrix({"x"}, {{-1}, {1}, {-1}, {1}, {-1}, {1}});
  const std::vector<SurvivalOutcome> outcomes = {ev(10), ev(10), ev(20), ev(20), ev(30), ev(30)};
  const auto fitted = train_final(spec_of(ModelKind::cox), matrix, outcomes, 0);
  CHECK(fitted.linear_model.coefficients.isZero(0.0));

  const StepFunction na = nelson_aalen(outcomes);
  const std::vector<double> horizons = {10, 20, 35};
  const auto predictions = predict_death(fitted, matrix, horizons);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      CHECK(predictions.probability[i][h] == 1.0 - std::exp(-na(horizons[h])));
    }
  }
}

TEST_CASE("horizon zero predicts no deaths for every family") {
  const auto inst = linear_instance(70, 47);
  const std::vector<double> horizons = {0, 365, 730};
  for (const ModelKind kind : {ModelKind::tree, ModelKind::forest, ModelKind::cox,
                               ModelKind::elastic_net, ModelKind::boosted}) {
    const auto spec = kind == ModelKind::forest ? small_forest_spec() : spec_of(kind);
    const auto fitted = train_final(spec, inst.matrix, inst.outcomes, 3);
    const auto predictions = predict_death(fitted, inst.matrix, horizons);
    for (const auto& per_subject : predictions.probability) {
      CHECK(per_subject[0] == 0.0);
    }
  }
}

TEST_CASE("death probabilities stay in range and never decrease with the horizon") {
  const auto inst = linear_instance(100, 53);
  const std::vector<double> horizons = {180, 365, 547, 730};
  for (const ModelKind kind : {ModelKind::tree, ModelKind::forest, ModelKind::cox,
                               ModelKind::elastic_net, ModelKind::boosted}) {
    const auto spec = kind == ModelKind::forest ? small_forest_spec() : spec_of(kind);
    const auto fitted = train_final(spec, inst.matrix, inst.outcomes, 5);
    const auto predictions = predict_death(fitted, inst.matrix, horizons);
    for (const auto& per_subject : predictions.probability) {
      for (std::size_t h = 0; h < horizons.size(); ++h) {
        CHECK(per_subject[h] >= 0.0);
        CHECK(per_subject[h] <= 1.0);
        if (h > 0) CHECK(per_subject[h] >= per_subject[h - 1]);
      }
    }
  }
}

TEST_CASE("at the full penalty the elastic net keeps no coefficients") {
  const auto inst = linear_instance(80, 59);
  ModelSpec spec;
  spec.kind = ModelKind::elastic_net;
  spec.enet_lambda_fraction = 1.0;
  const auto fitted = train_final(spec, inst.matrix, inst.outcomes, 0);
  CHECK(fitted.linear_model.coefficients.isZero(0.0));

  // all-tied risk scores are scored as coin flips
  const auto scores = risk_scores(fitted, inst.matrix);
  CHECK(concordance_index(scores, inst.outcomes) == 0.5);
}

TEST_CASE("the single tree ignores the seed but the forest does not") {
  const auto inst = linear_instance(100, 61);
  const auto tree_a = train_final(spec_of(ModelKind::tree), inst.matrix, inst.outcomes, 1);
  const auto tree_b = train_final(spec_of(ModelKind::tree), inst.matrix, inst.outcomes, 2);
  CHECK(tree_a.forest_model.trees == tree_b.forest_model.trees);

  const auto rsf_a = train_final(small_forest_spec(), inst.matrix, inst.outcomes, 1);
  const auto rsf_b = train_final(small_forest_spec(), inst.matrix, inst.outcomes, 2);
  CHECK(rsf_a.forest_model.in_bag != rsf_b.forest_model.in_bag);
}

TEST_CASE("prediction rejects bad horizon lists and foreign columns") {
  const auto inst = linear_instance(30, 67);
  const auto fitted = train_final(spec_of(ModelKind::cox), inst.matrix, inst.outcomes, 0);

  CHECK(error_code_of([&] { predict_death(fitted, inst.matrix, {}); }) ==
        ErrorCode::EmptyHorizons);
  const std::vector<double> descending = {365, 180};
  CHECK_THROWS_AS(predict_death(fitted, inst.matrix, descending), std::invalid_argument);
  const std::vector<double> negative = {-1, 365};
  CHECK_THROWS_AS(predict_death(fitted, inst.matrix, negative), std::invalid_argument);

  std::vector<std::vector<double>> rows(inst.matrix.n_rows(), std::vector<double>(3, 0.0));
  const auto renamed = make_matrix({"x1", "x2", "wrong"}, rows);
  const std::vector<double> horizons = {365};
  CHECK(error_code_of([&] { predict_death(fitted, renamed, horizons); }) ==
        ErrorCode::UnknownFeature);

  const auto rsf = train_final(small_forest_spec(), inst.matrix, inst.outcomes, 0);
  CHECK(error_code_of([&] { predict_death(rsf, renamed, horizons); }) ==
        ErrorCode::UnknownFeature);
}

TEST_CASE("report files render fold blocks, summaries, and predictions exactly") {
  CvReport report;
  report.k = 2;
  ModelCv tree_cv;
  tree_cv.kind = ModelKind::tree;
  tree_cv.model = "tree";
  tree_cv.fold_cindex = {0.5, 0.75};
  tree_cv.mean = 0.625;
  tree_cv.min = 0.5;
  tree_cv.max = 0.75;
  report.models.push_back(tree_cv);
  report.winner = "tree";

  std::ostringstream cv_csv;
  write_cv_csv(report, cv_csv);
  CHECK(cv_csv.str() ==
        "model,fold,cindex\n"
        "tree,1,0.5\n"
        "tree,2,0.75\n"
        "model,mean,min,max\n"
        "tree,0.625,0.5,0.75\n");

  std::ostringstream fig_csv;
  write_fig2b_csv(report, fig_csv);
  CHECK(fig_csv.str() ==
        "model,mean,lower,upper\n"
        "tree,0.625,0.5,0.75\n");

  PredictionSet predictions;
  predictions.subject_ids = {"p1", "p2"};
  predictions.horizons = {365, 730};
  predictions.probability = {{0.25, 0.5}, {0.125, 0.375}};
  std::ostringstream pred_csv;
  write_predictions_csv(predictions, pred_csv);
  CHECK(pred_csv.str() ==
        "subject_id,horizon_days,death_probability\n"
        "p1,365,0.25\n"
        "p1,730,0.5\n"
        "p2,365,0.125\n"
        "p2,730,0.375\n");
}

}  // TEST_SUITE
