// survkit: batch CLI over the survival toolkit. Subcommands cover the whole
// pipeline: synth -> engineer -> compare -> select -> train -> predict.
// Every command writes its resolved configuration next to its outputs and is
// bit-reproducible given --seed, independent of --threads.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "survkit/errors.hpp"
#include "survkit/features.hpp"
#include "survkit/forest.hpp"
#include "survkit/ingest.hpp"
#include "survkit/pipeline.hpp"
#include "survkit/rng.hpp"
#include "survkit/selection.hpp"
#include "survkit/serialize.hpp"
#include "survkit/synthgen.hpp"
#include "survkit/text.hpp"

namespace fs = std::filesystem;
using namespace survkit;

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) raise(ErrorCode::IoError, "failed while writing " + path.string());
}

// Out-dir bootstrap shared by every command: create it and echo the resolved
// configuration (config file merged, flags winning, defaults included).
void prepare_out_dir(const CLI::App& cmd, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_text_file(fs::path(out_dir) / "run_config.resolved", cmd.config_to_str(true, false));
}

std::ifstream open_or_raise(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  return in;
}

// Matches the feature matrix against an outcomes CSV by subject id.
std::vector<SurvivalOutcome> align_outcomes(const FeatureMatrix& matrix,
                                            const std::string& outcomes_path) {
  std::ifstream in = open_or_raise(outcomes_path);
  const auto records = ingest::parse_outcomes(in);
  std::map<std::string, SurvivalOutcome> by_id;
  for (const auto& rec : records) {
    if (!by_id.emplace(rec.subject_id, rec.outcome).second) {
      raise(ErrorCode::DuplicateSubject,
            "subject '" + rec.subject_id + "' appears twice in " + outcomes_path);
    }
  }
  std::vector<SurvivalOutcome> outcomes;
  outcomes.reserve(matrix.n_rows());
  for (const auto& id : matrix.subject_ids()) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw std::invalid_argument("no outcome for subject '" + id + "' in " + outcomes_path);
    }
    outcomes.push_back(it->second);
  }
  return outcomes;
}

// Restricts the matrix to the model's training columns, in training order.
FeatureMatrix columns_for_model(const FeatureMatrix& matrix,
                                const std::vector<std::string>& wanted) {
  std::vector<std::size_t> cols;
  for (const auto& name : wanted) {
    const auto idx = matrix.column_index(name);
    if (!idx) {
      raise(ErrorCode::UnknownFeature, "feature matrix has no column '" + name + "'");
    }
    cols.push_back(*idx);
  }
  return matrix.select_columns(cols);
}

double parse_double_or_raise(const std::string& field, const std::string& what) {
  const auto value = parse_double(field);
  if (!value) throw std::invalid_argument(what + ": '" + field + "' is not a number");
  return *value;
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  std::size_t n = 500;
  std::uint64_t seed = 0;
  std::vector<std::string> features;  // name=coefficient
  int noise_features = 3;
  double baseline_hazard = 0.001;
  double censor_rate = 0.0005;
  std::string interaction;  // "first,second,coefficient"
  std::string long_variable = "score";
  int visits = 6;
  int day_jitter = 5;
  double visit_noise_sd = 1.0;
  double base_value = 30;
  double slope_scale = 0.3;
};

int run_synth(const CLI::App& cmd, const SynthArgs& args) {
  synthgen::SynthSpec spec;
  spec.n = args.n;
  spec.seed = args.seed;
  spec.baseline_hazard = args.baseline_hazard;
  spec.censor_rate = args.censor_rate;

  if (args.features.empty()) {
    spec.features = {{"x1", 0.9}, {"x2", -0.6}, {"x3", 0.4}};
  } else {
    for (const auto& entry : args.features) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("--feature expects name=coefficient, got '" + entry + "'");
      }
      spec.features.push_back(
          {entry.substr(0, eq), parse_double_or_raise(entry.substr(eq + 1), "--feature")});
    }
  }
  for (int j = 1; j <= args.noise_features; ++j) {
    spec.features.push_back({"noise_" + format_int(j), 0.0});
  }

  if (!args.interaction.empty()) {
    const auto fields = split_csv_line(args.interaction);
    if (fields.size() != 3) {
      throw std::invalid_argument("--interaction expects FIRST,SECOND,COEFFICIENT");
    }
    synthgen::InteractionSpec inter;
    const auto first = parse_int(fields[0]), second = parse_int(fields[1]);
    if (!first || !second || *first < 0 || *second < 0) {
      throw std::invalid_argument("--interaction indices must be nonnegative integers");
    }
    inter.first = static_cast<std::size_t>(*first);
    inter.second = static_cast<std::size_t>(*second);
    inter.coefficient = parse_double_or_raise(std::string(fields[2]), "--interaction");
    spec.interaction = inter;
  }

  spec.longitudinal.variable = args.long_variable;
  spec.longitudinal.n_visits = args.visits;
  spec.longitudinal.day_jitter = args.day_jitter;
  spec.longitudinal.noise_sd = args.visit_noise_sd;
  spec.longitudinal.base_value = args.base_value;
  spec.longitudinal.slope_scale = args.slope_scale;

  const auto result = synthgen::generate(spec);
  prepare_out_dir(cmd, args.out_dir);
  const fs::path out(args.out_dir);

  std::ostringstream statics, longitudinal, outcomes, truth;
  ingest::write_statics_csv(result.cohort, statics);
  ingest::write_longitudinal_csv(result.cohort, longitudinal);
  ingest::write_outcomes_csv(result.cohort, outcomes);
  synthgen::write_ground_truth_csv(result.truth, truth);
  write_text_file(out / "statics.csv", statics.str());
  write_text_file(out / "longitudinal.csv", longitudinal.str());
  write_text_file(out / "outcomes.csv", outcomes.str());
  write_text_file(out / "ground_truth.csv", truth.str());

  std::cout << "wrote " << result.cohort.size() << " subjects to " << args.out_dir << "\n";
  return 0;
}

// --- engineer ------------------------------------------------------------

struct EngineerArgs {
  std::string statics_path, longitudinal_path, outcomes_path, out_dir;
  int window_low = 0;
  int window_high = 92;
  double min_coverage = 0.0;
  double prune_threshold = 0.95;
};

int run_engineer(const CLI::App& cmd, const EngineerArgs& args) {
  const auto cohort =
      ingest::load_cohort(args.statics_path, args.longitudinal_path, args.outcomes_path);
  const auto built =
      features::build_matrix(cohort, args.window_low, args.window_high, args.min_coverage);
  const auto pruned = features::prune_correlated(built.matrix, args.prune_threshold);

  prepare_out_dir(cmd, args.out_dir);
  const fs::path out(args.out_dir);

  std::ostringstream matrix_csv;
  write_matrix_csv(pruned.matrix, matrix_csv);
  write_text_file(out / "features.csv", matrix_csv.str());

  std::ostringstream dropped;
  dropped << "column,reason,culprit,value\n";
  for (const auto& drop : built.report.dropped_low_coverage) {
    dropped << drop.column << ",low_coverage,," << format_double(drop.coverage) << '\n';
  }
  for (const auto& column : pruned.report.constant) {
    dropped << column << ",constant,,\n";
  }
  for (const auto& drop : pruned.report.correlated) {
    dropped << drop.column << ",correlated," << drop.culprit << ',' << format_double(drop.rho)
            << '\n';
  }
  write_text_file(out / "dropped.csv", dropped.str());

  std::cout << "features: " << pruned.matrix.n_rows() << " subjects x "
            << pruned.matrix.n_cols() << " columns (" << built.report.dropped_low_coverage.size()
            << " low-coverage, " << pruned.report.constant.size() << " constant, "
            << pruned.report.correlated.size() << " correlated dropped)\n";
  return 0;
}

// --- model hyperparameters shared by compare / select / train -------------

struct ModelArgs {
  int trees = 200;
  int mtry = 0;
  int min_node_size = 15;
  int min_events = 3;
  double alpha = 0.5;
  double lambda_fraction = 0.1;
  double nu = 0.1;
  int boost_iterations = 100;
};

void add_model_options(CLI::App* cmd, ModelArgs& args) {
  cmd->add_option("--trees", args.trees, "trees per forest");
  cmd->add_option("--mtry", args.mtry, "features tried per node (0 = sqrt)");
  cmd->add_option("--min-node-size", args.min_node_size, "smallest splittable node");
  cmd->add_option("--min-events", args.min_events, "fewest events per node");
  cmd->add_option("--alpha", args.alpha, "elastic-net mixing weight");
  cmd->add_option("--lambda-fraction", args.lambda_fraction,
                  "elastic-net penalty as a fraction of lambda_max");
  cmd->add_option("--nu", args.nu, "boosting step damping");
  cmd->add_option("--boost-iterations", args.boost_iterations, "boosting rounds");
}

pipeline::ModelSpec spec_from_args(pipeline::ModelKind kind, const ModelArgs& args) {
  pipeline::ModelSpec spec;
  spec.kind = kind;
  spec.n_trees = args.trees;
  spec.mtry = args.mtry;
  spec.min_node_size = args.min_node_size;
  spec.min_events_per_node = args.min_events;
  spec.enet_alpha = args.alpha;
  spec.enet_lambda_fraction = args.lambda_fraction;
  spec.boost_nu = args.nu;
  spec.boost_iterations = args.boost_iterations;
  return spec;
}

// --- compare ---------------------------------------------------------------

struct CompareArgs {
  std::string features_path, outcomes_path, out_dir;
  int k = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  ModelArgs model;
};

int run_compare(const CLI::App& cmd, const CompareArgs& args) {
  const auto matrix = load_matrix_csv(args.features_path);
  const auto outcomes = align_outcomes(matrix, args.outcomes_path);

  std::vector<pipeline::ModelSpec> specs;
  for (const auto kind : {pipeline::ModelKind::tree, pipeline::ModelKind::forest,
                          pipeline::ModelKind::cox, pipeline::ModelKind::elastic_net,
                          pipeline::ModelKind::boosted}) {
    specs.push_back(spec_from_args(kind, args.model));
  }
  const auto report =
      pipeline::cross_validate(specs, matrix, outcomes, args.k, args.seed, args.threads);

  prepare_out_dir(cmd, args.out_dir);
  std::ostringstream cv_csv, fig_csv;
  pipeline::write_cv_csv(report, cv_csv);
  pipeline::write_fig2b_csv(report, fig_csv);
  write_text_file(fs::path(args.out_dir) / "cv_report.csv", cv_csv.str());
  write_text_file(fs::path(args.out_dir) / "fig2b.csv", fig_csv.str());

  std::cout << "winner: " << report.winner << "\n";
  return 0;
}

// --- select ----------------------------------------------------------------

struct SelectArgs {
  std::string features_path, outcomes_path, out_dir;
  std::size_t budget = 6;
  bool count_source_variables = false;
  std::uint64_t seed = 0;
  int threads = 1;
  int vimp_repeats = 5;
  ModelArgs model;
};

int run_select(const CLI::App& cmd, const SelectArgs& args) {
  const auto matrix = load_matrix_csv(args.features_path);
  const auto outcomes = align_outcomes(matrix, args.outcomes_path);

  forest::ForestParams params;
  params.n_trees = args.model.trees;
  params.mtry = args.model.mtry;
  params.min_node_size = args.model.min_node_size;
  params.min_events_per_node = args.model.min_events;
  params.master_seed = args.seed;
  params.n_threads = args.threads;

  const auto vimp = selection::rank_by_forest_vimp(matrix, outcomes, params, args.vimp_repeats,
                                                   mix_seed(args.seed, 1));
  const auto boost =
      selection::rank_by_boosting(matrix, outcomes, args.model.nu, args.model.boost_iterations);
  const auto enet = selection::rank_by_elastic_net(matrix, outcomes, args.model.alpha);
  const auto consensus =
      selection::consensus({vimp, boost, enet}, args.budget, args.count_source_variables);

  prepare_out_dir(cmd, args.out_dir);
  std::ostringstream rankings_csv, consensus_csv;
  selection::write_rankings_csv({vimp, boost, enet}, rankings_csv);
  selection::write_consensus_csv(consensus, consensus_csv);
  write_text_file(fs::path(args.out_dir) / "rankings.csv", rankings_csv.str());
  write_text_file(fs::path(args.out_dir) / "consensus.csv", consensus_csv.str());

  std::cout << "selected:";
  for (const auto& feature : consensus.selected) std::cout << ' ' << feature;
  std::cout << "\n";
  return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string features_path, outcomes_path, out_dir;
  std::string model_kind = "forest";
  std::string subset_path;  // consensus.csv; keep only selected columns
  std::uint64_t seed = 0;
  int threads = 1;
  ModelArgs model;
};

pipeline::ModelKind kind_from_string(const std::string& name) {
  for (const auto kind : {pipeline::ModelKind::tree, pipeline::ModelKind::forest,
                          pipeline::ModelKind::cox, pipeline::ModelKind::elastic_net,
                          pipeline::ModelKind::boosted}) {
    if (pipeline::model_name(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown model '" + name +
                              "' (expected tree, forest, cox, elastic-net, or boosted)");
}

// Reads the `feature,mean_rank,selected` consensus table; returns the
// selected features in file order.
std::vector<std::string> read_selected_features(const std::string& path) {
  std::ifstream in = open_or_raise(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "feature,mean_rank,selected") {
    raise(ErrorCode::BadFormat, path + " is not a consensus file");
  }
  std::vector<std::string> selected;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      raise(ErrorCode::BadFormat,
            path + " line " + format_int(line_no) + ": expected three fields");
    }
    if (fields[2] == "1") selected.emplace_back(fields[0]);
  }
  if (selected.empty()) {
    raise(ErrorCode::BadFormat, path + " marks no feature as selected");
  }
  return selected;
}

int run_train(const CLI::App& cmd, const TrainArgs& args) {
  auto matrix = load_matrix_csv(args.features_path);
  if (!args.subset_path.empty()) {
    matrix = columns_for_model(matrix, read_selected_features(args.subset_path));
  }
  const auto outcomes = align_outcomes(matrix, args.outcomes_path);
  const auto spec = spec_from_args(kind_from_string(args.model_kind), args.model);
  const auto fitted = pipeline::train_final(spec, matrix, outcomes, args.seed, args.threads);

  prepare_out_dir(cmd, args.out_dir);
  std::ostringstream bytes;
  serialize::write_model(fitted, bytes);
  write_text_file(fs::path(args.out_dir) / "model.txt", bytes.str());

  std::cout << "trained " << args.model_kind << " on " << matrix.n_rows() << " subjects, "
            << matrix.n_cols() << " features\n";
  return 0;
}

// --- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string model_path, features_path, out_dir;
  std::vector<double> horizons = {365, 547, 730};
};

int run_predict(const CLI::App& cmd, const PredictArgs& args) {
  const auto model = serialize::load_model(args.model_path);
  const auto matrix = load_matrix_csv(args.features_path);
  const auto rows = columns_for_model(matrix, pipeline::feature_names(model));
  const auto predictions = pipeline::predict_death(model, rows, args.horizons);

  prepare_out_dir(cmd, args.out_dir);
  std::ostringstream csv;
  pipeline::write_predictions_csv(predictions, csv);
  write_text_file(fs::path(args.out_dir) / "predictions.csv", csv.str());

  std::cout << "predicted " << predictions.subject_ids.size() << " subjects at "
            << args.horizons.size() << " horizons\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survival modeling toolkit: engineered longitudinal features, five-model "
               "cross-validation, consensus feature selection, and horizon predictions"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "",
                 "TOML file with a [subcommand] section; command-line flags win on conflict");
  app.allow_config_extras(false);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort with ground truth");
  synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
  synth_cmd->add_option("--n", synth.n, "subjects");
  synth_cmd->add_option("--seed", synth.seed, "master seed");
  synth_cmd->add_option("--feature", synth.features, "informative feature as name=coefficient");
  synth_cmd->add_option("--noise-features", synth.noise_features, "extra zero-effect features");
  synth_cmd->add_option("--baseline-hazard", synth.baseline_hazard, "events per day");
  synth_cmd->add_option("--censor-rate", synth.censor_rate, "censoring hazard per day");
  synth_cmd->add_option("--interaction", synth.interaction,
                        "FIRST,SECOND,COEFFICIENT feature-pair effect");
  synth_cmd->add_option("--long-variable", synth.long_variable, "longitudinal variable name");
  synth_cmd->add_option("--visits", synth.visits, "longitudinal visits per subject");
  synth_cmd->add_option("--day-jitter", synth.day_jitter, "visit-day jitter");
  synth_cmd->add_option("--visit-noise-sd", synth.visit_noise_sd, "per-visit noise");
  synth_cmd->add_option("--base-value", synth.base_value, "longitudinal value at day zero");
  synth_cmd->add_option("--slope-scale", synth.slope_scale,
                        "decline per day per unit of linear predictor");

  EngineerArgs engineer;
  auto* engineer_cmd =
      app.add_subcommand("engineer", "build the windowed feature matrix from raw CSVs");
  engineer_cmd->add_option("--statics", engineer.statics_path, "static covariates CSV")
      ->required();
  engineer_cmd->add_option("--longitudinal", engineer.longitudinal_path, "longitudinal CSV")
      ->required();
  engineer_cmd->add_option("--outcomes", engineer.outcomes_path, "outcomes CSV")->required();
  engineer_cmd->add_option("--out", engineer.out_dir, "output directory")->required();
  engineer_cmd->add_option("--window-low", engineer.window_low, "window start, days");
  engineer_cmd->add_option("--window-high", engineer.window_high, "window end, days");
  engineer_cmd->add_option("--min-coverage", engineer.min_coverage,
                           "drop columns observed less often than this fraction");
  engineer_cmd->add_option("--prune-threshold", engineer.prune_threshold,
                           "drop columns correlated above this with a retained one");

  CompareArgs compare;
  auto* compare_cmd =
      app.add_subcommand("compare", "cross-validate the five model families");
  compare_cmd->add_option("--features", compare.features_path, "feature matrix CSV")->required();
  compare_cmd->add_option("--outcomes", compare.outcomes_path, "outcomes CSV")->required();
  compare_cmd->add_option("--out", compare.out_dir, "output directory")->required();
  compare_cmd->add_option("--k", compare.k, "folds");
  compare_cmd->add_option("--seed", compare.seed, "master seed");
  compare_cmd->add_option("--threads", compare.threads, "worker cap (never changes results)");
  add_model_options(compare_cmd, compare.model);

  SelectArgs select;
  auto* select_cmd =
      app.add_subcommand("select", "rank features three ways and take the consensus");
  select_cmd->add_option("--features", select.features_path, "feature matrix CSV")->required();
  select_cmd->add_option("--outcomes", select.outcomes_path, "outcomes CSV")->required();
  select_cmd->add_option("--out", select.out_dir, "output directory")->required();
  select_cmd->add_option("--budget", select.budget, "variables to keep");
  select_cmd->add_flag("--count-source-variables", select.count_source_variables,
                       "charge the budget per source variable, not per derived column");
  select_cmd->add_option("--seed", select.seed, "master seed");
  select_cmd->add_option("--threads", select.threads, "worker cap (never changes results)");
  select_cmd->add_option("--vimp-repeats", select.vimp_repeats,
                         "permutations averaged per feature");
  add_model_options(select_cmd, select.model);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "fit one model on all rows and save it");
  train_cmd->add_option("--features", train.features_path, "feature matrix CSV")->required();
  train_cmd->add_option("--outcomes", train.outcomes_path, "outcomes CSV")->required();
  train_cmd->add_option("--out", train.out_dir, "output directory")->required();
  train_cmd->add_option("--model", train.model_kind,
                        "tree, forest, cox, elastic-net, or boosted");
  train_cmd->add_option("--subset", train.subset_path,
                        "consensus CSV; train only on its selected features");
  train_cmd->add_option("--seed", train.seed, "master seed");
  train_cmd->add_option("--threads", train.threads, "worker cap (never changes results)");
  add_model_options(train_cmd, train.model);

  PredictArgs predict;
  auto* predict_cmd =
      app.add_subcommand("predict", "death probabilities at fixed horizons from a saved model");
  predict_cmd->add_option("--model", predict.model_path, "model file from train")->required();
  predict_cmd->add_option("--features", predict.features_path, "feature matrix CSV")->required();
  predict_cmd->add_option("--out", predict.out_dir, "output directory")->required();
  predict_cmd->add_option("--horizons", predict.horizons, "days, ascending")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(*synth_cmd, synth);
    if (engineer_cmd->parsed()) return run_engineer(*engineer_cmd, engineer);
    if (compare_cmd->parsed()) return run_compare(*compare_cmd, compare);
    if (select_cmd->parsed()) return run_select(*select_cmd, select);
    if (train_cmd->parsed()) return run_train(*train_cmd, train);
    if (predict_cmd->parsed()) return run_predict(*predict_cmd, predict);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;  // unreachable: require_subcommand(1) guarantees a dispatch
}
