#pragma once

// Synthetic cohort generator with known ground truth. Event times follow an
// exponential proportional-hazards model; an optional longitudinal variable
// is emitted whose decline rate tracks the subject's latent risk, so that
// window-derived features carry real signal in end-to-end tests.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "survkit/ingest.hpp"

namespace survkit::synthgen {

struct FeatureSpecEntry {
  std::string name;
  double coefficient = 0;  // 0 = pure noise feature
};

struct InteractionSpec {
  std::size_t first = 0;  // indices into the feature list
  std::size_t second = 0;
  double coefficient = 0;
};

struct CategoricalSpec {
  std::string name;
  std::vector<std::string> levels;
  std::vector<double> coefficients;  // per level; same length as levels
};

struct LongitudinalSpec {
  std::string variable = "score";
  int n_visits = 0;       // 0 = no longitudinal table
  int day_jitter = 0;     // uniform integer jitter on the visit day
  double noise_sd = 0;    // per-visit observation noise
  double base_value = 30; // value at day 0 before decline
  double slope_scale = 0; // latent decline per day = slope_scale * linear predictor
};

struct SynthSpec {
  std::size_t n = 0;
  std::vector<FeatureSpecEntry> features;  // drawn iid standard normal
  double baseline_hazard = 0.001;          // events per day
  double censor_rate = 0;                  // exponential censoring hazard; 0 = none
  std::optional<InteractionSpec> interaction;
  std::optional<CategoricalSpec> categorical;
  LongitudinalSpec longitudinal;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<std::string> subject_ids;
  std::vector<double> linear_predictor;  // includes interaction and categorical effect
  std::vector<double> latent_slope;
  std::vector<double> uncensored_time;
  std::vector<bool> censored;
};

struct SynthResult {
  ingest::Cohort cohort;
  GroundTruth truth;
};

// Deterministic given (spec, seed); subject i depends only on (seed, i), so
// growing n extends existing subjects without changing them.
SynthResult generate(const SynthSpec& spec);

// subject_id,true_linpred,true_time,censored
void write_ground_truth_csv(const GroundTruth& truth, std::ostream& out);

}  // namespace survkit::synthgen
