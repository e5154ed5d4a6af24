#include "survkit/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "survkit/errors.hpp"
#include "survkit/rng.hpp"
#include "survkit/text.hpp"

namespace survkit::synthgen {

namespace {

void validate(const SynthSpec& spec) {
  if (spec.n < 2) raise(ErrorCode::BadSpec, "n must be >= 2");
  if (!(spec.baseline_hazard > 0)) raise(ErrorCode::BadSpec, "baseline hazard must be > 0");
  if (spec.censor_rate < 0) raise(ErrorCode::BadSpec, "censor rate must be >= 0");
  for (const auto& f : spec.features) {
    if (!std::isfinite(f.coefficient)) raise(ErrorCode::BadSpec, "non-finite coefficient");
    if (f.name.empty()) raise(ErrorCode::BadSpec, "empty feature name");
  }
  if (spec.interaction) {
    if (spec.interaction->first >= spec.features.size() || spec.interaction->second >= spec.features.size()) {
      raise(ErrorCode::BadSpec, "interaction indices out of range");
    }
  }
  if (spec.categorical) {
    if (spec.categorical->levels.empty() ||
        spec.categorical->levels.size() != spec.categorical->coefficients.size()) {
      raise(ErrorCode::BadSpec, "categorical levels/coefficients mismatch");
    }
  }
  if (spec.longitudinal.n_visits < 0) raise(ErrorCode::BadSpec, "negative visit count");
  if (spec.longitudinal.n_visits > 0 && spec.longitudinal.variable.empty()) {
    raise(ErrorCode::BadSpec, "longitudinal variable name empty");
  }
}

std::string subject_name(std::size_t i) { return "s" + format_int(static_cast<long long>(i + 1)); }

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  validate(spec);

  SynthResult result;
  auto& cohort = result.cohort;
  auto& truth = result.truth;

  cohort.subjects.reserve(spec.n);
  cohort.outcomes.reserve(spec.n);
  cohort.statics.resize(spec.n);
  cohort.longitudinal.resize(spec.n);

  for (const auto& f : spec.features) cohort.static_names.push_back(f.name);
  if (spec.categorical) cohort.static_names.push_back(spec.categorical->name);
  std::sort(cohort.static_names.begin(), cohort.static_names.end());
  if (spec.longitudinal.n_visits > 0) cohort.variable_names.push_back(spec.longitudinal.variable);

  for (std::size_t i = 0; i < spec.n; ++i) {
    // Subject-level stream: draws depend only on (seed, i).
    std::mt19937_64 rng(mix_seed(spec.seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::string id = subject_name(i);
    cohort.subjects.push_back(id);

    std::vector<double> x(spec.features.size());
    double linpred = 0;
    for (std::size_t j = 0; j < spec.features.size(); ++j) {
      x[j] = normal(rng);
      linpred += spec.features[j].coefficient * x[j];
      cohort.statics[i].emplace(spec.features[j].name, x[j]);
    }
    if (spec.interaction) {
      linpred += spec.interaction->coefficient * x[spec.interaction->first] * x[spec.interaction->second];
    }
    if (spec.categorical) {
      std::size_t level =
          std::min<std::size_t>(static_cast<std::size_t>(uniform(rng) * spec.categorical->levels.size()),
                                spec.categorical->levels.size() - 1);
      linpred += spec.categorical->coefficients[level];
      cohort.statics[i].emplace(spec.categorical->name, spec.categorical->levels[level]);
    }

    double rate = spec.baseline_hazard * std::exp(linpred);
    double event_time = -std::log(1.0 - uniform(rng)) / rate;
    double censor_time = spec.censor_rate > 0
                             ? -std::log(1.0 - uniform(rng)) / spec.censor_rate
                             : std::numeric_limits<double>::infinity();
    bool event = event_time <= censor_time;
    double observed = std::max(std::min(event_time, censor_time), 1e-6);  // keep time_days > 0
    cohort.outcomes.push_back({observed, event});

    double latent_slope = spec.longitudinal.slope_scale * linpred;
    if (spec.longitudinal.n_visits > 0) {
      auto& series = cohort.longitudinal[i][spec.longitudinal.variable];
      int visits = spec.longitudinal.n_visits;
      for (int v = 0; v < visits; ++v) {
        int base_day = visits == 1 ? 0 : (92 * v) / (visits - 1);
        int day = base_day;
        if (spec.longitudinal.day_jitter > 0) {
          std::uniform_int_distribution<int> jitter(-spec.longitudinal.day_jitter, spec.longitudinal.day_jitter);
          day = std::clamp(base_day + jitter(rng), 0, 92);
        }
        double value = spec.longitudinal.base_value - latent_slope * day +
                       spec.longitudinal.noise_sd * normal(rng);
        auto dup = std::find_if(series.begin(), series.end(),
                                [&](const ingest::SeriesPoint& p) { return p.delta_days == day; });
        if (dup != series.end()) dup->value = value;  // jitter collision: keep last
        else series.push_back({day, value});
      }
      std::sort(series.begin(), series.end(), [](const ingest::SeriesPoint& a, const ingest::SeriesPoint& b) {
        return a.delta_days < b.delta_days;
      });
    }

    truth.subject_ids.push_back(id);
    truth.linear_predictor.push_back(linpred);
    truth.latent_slope.push_back(latent_slope);
    truth.uncensored_time.push_back(event_time);
    truth.censored.push_back(!event);
  }

  return result;
}

void write_ground_truth_csv(const GroundTruth& truth, std::ostream& out) {
  out << "subject_id,true_linpred,true_time,censored\n";
  for (std::size_t i = 0; i < truth.subject_ids.size(); ++i) {
    out << truth.subject_ids[i] << ',' << format_double(truth.linear_predictor[i]) << ','
        << format_double(truth.uncensored_time[i]) << ',' << (truth.censored[i] ? '1' : '0') << '\n';
  }
}

}  // namespace survkit::synthgen
