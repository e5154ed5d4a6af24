#pragma once

// Survival-statistics primitives shared by every model: risk tables,
// Kaplan-Meier / Nelson-Aalen estimators, and Harrell's concordance index.

#include <span>
#include <vector>

namespace survkit {

struct SurvivalOutcome {
  double time_days = 0;
  bool event = false;  // true = death observed, false = right-censored

  bool operator==(const SurvivalOutcome&) const = default;
};

// Right-continuous piecewise-constant function: value(t) is the value at the
// largest knot <= t, or initial_value before the first knot.
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> knots, std::vector<double> values, double initial_value);

  double operator()(double t) const;

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  double initial_value() const { return initial_value_; }

  bool operator==(const StepFunction&) const = default;

 private:
  std::vector<double> knots_;   // strictly increasing
  std::vector<double> values_;  // same length
  double initial_value_ = 0;
};

struct RiskTable {
  std::vector<double> event_times;  // distinct, increasing
  std::vector<int> n_at_risk;
  std::vector<int> n_events;
  // censorings with event_times[k] <= time < event_times[k+1] (last bucket open-ended)
  std::vector<int> n_censored_in_interval;
};

// Censoring at an event time counts as at-risk at that time (censored "just after").
// Throws NoEvents when all outcomes are censored.
RiskTable risk_table(std::span<const SurvivalOutcome> outcomes);

// Product-limit estimator S(t); value 1 before the first event time.
StepFunction kaplan_meier(std::span<const SurvivalOutcome> outcomes);

// Cumulative hazard H(t) = sum of d_i/n_i over event times <= t; 0 before the first.
StepFunction nelson_aalen(std::span<const SurvivalOutcome> outcomes);

// Harrell's c-index with higher score = higher predicted risk. Permissible
// pairs are those with strictly different times whose shorter time belongs to
// an event subject; equal-time pairs are excluded (including event/event
// ties). Tied scores count 0.5. Throws NoPermissiblePairs when no pair
// qualifies.
double concordance_index(std::span<const double> risk_scores, std::span<const SurvivalOutcome> outcomes);

}  // namespace survkit
