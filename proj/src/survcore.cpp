#include "survkit/survcore.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "survkit/errors.hpp"

namespace survkit {

StepFunction::StepFunction(std::vector<double> knots, std::vector<double> values, double initial_value)
    : knots_(std::move(knots)), values_(std::move(values)), initial_value_(initial_value) {
  if (knots_.size() != values_.size()) throw std::invalid_argument("StepFunction: knots/values size mismatch");
  for (size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i - 1] < knots_[i])) throw std::invalid_argument("StepFunction: knots not strictly increasing");
  }
}

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return initial_value_;
  return values_[static_cast<size_t>(it - knots_.begin()) - 1];
}

namespace {

// Indices sorted ascending by time; within a time group order is irrelevant
// to every consumer below.
std::vector<size_t> time_order(std::span<const SurvivalOutcome> outcomes) {
  std::vector<size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return outcomes[a].time_days < outcomes[b].time_days; });
  return order;
}

}  // namespace

RiskTable risk_table(std::span<const SurvivalOutcome> outcomes) {
  if (outcomes.empty()) raise(ErrorCode::NoEvents, "no outcomes");
  auto order = time_order(outcomes);

  RiskTable table;
  size_t n = outcomes.size();
  size_t i = 0;
  int at_risk = static_cast<int>(n);
  int pending_censored = 0;  // censorings since the last listed event time
  while (i < n) {
    double t = outcomes[order[i]].time_days;
    int events = 0;
    int censored = 0;
    size_t j = i;
    while (j < n && outcomes[order[j]].time_days == t) {
      if (outcomes[order[j]].event) ++events; else ++censored;
      ++j;
    }
    if (events > 0) {
      if (!table.n_censored_in_interval.empty()) {
        table.n_censored_in_interval.back() += pending_censored;
      }
      pending_censored = 0;
      table.event_times.push_back(t);
      table.n_at_risk.push_back(at_risk);
      table.n_events.push_back(events);
      table.n_censored_in_interval.push_back(censored);
    } else {
      pending_censored += censored;
    }
    at_risk -= events + censored;
    i = j;
  }
  if (!table.n_censored_in_interval.empty()) {
    table.n_censored_in_interval.back() += pending_censored;
  }
  if (table.event_times.empty()) raise(ErrorCode::NoEvents, "all outcomes censored");
  return table;
}

StepFunction kaplan_meier(std::span<const SurvivalOutcome> outcomes) {
  RiskTable table = risk_table(outcomes);
  std::vector<double> values(table.event_times.size());
  double s = 1.0;
  for (size_t k = 0; k < table.event_times.size(); ++k) {
    s *= 1.0 - static_cast<double>(table.n_events[k]) / static_cast<double>(table.n_at_risk[k]);
    values[k] = s;
  }
  return StepFunction(table.event_times, std::move(values), 1.0);
}

StepFunction nelson_aalen(std::span<const SurvivalOutcome> outcomes) {
  RiskTable table = risk_table(outcomes);
  std::vector<double> values(table.event_times.size());
  double h = 0.0;
  for (size_t k = 0; k < table.event_times.size(); ++k) {
    h += static_cast<double>(table.n_events[k]) / static_cast<double>(table.n_at_risk[k]);
    values[k] = h;
  }
  return StepFunction(table.event_times, std::move(values), 0.0);
}

namespace {

// Fenwick tree over compressed score ranks; counts subjects still "later"
// than the time group being processed.
class RankCounter {
 public:
  explicit RankCounter(size_t size) : tree_(size + 1, 0), total_(0) {}

  void add(size_t rank, int delta) {
    total_ += delta;
    for (size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
  }

  // number of entries with rank < r
  long long count_below(size_t r) const {
    long long sum = 0;
    for (size_t i = r; i > 0; i -= i & (~i + 1)) sum += tree_[i];
    return sum;
  }

  long long total() const { return total_; }

 private:
  std::vector<long long> tree_;
  long long total_;
};

}  // namespace

double concordance_index(std::span<const double> risk_scores, std::span<const SurvivalOutcome> outcomes) {
  if (risk_scores.size() != outcomes.size()) throw std::invalid_argument("concordance_index: size mismatch");
  size_t n = outcomes.size();
  for (double s : risk_scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("concordance_index: non-finite score");
  }

  // Compress scores to ranks.
  std::vector<double> sorted_scores(risk_scores.begin(), risk_scores.end());
  std::sort(sorted_scores.begin(), sorted_scores.end());
  sorted_scores.erase(std::unique(sorted_scores.begin(), sorted_scores.end()), sorted_scores.end());
  auto rank_of = [&](double s) {
    return static_cast<size_t>(std::lower_bound(sorted_scores.begin(), sorted_scores.end(), s) -
                               sorted_scores.begin());
  };

  auto order = time_order(outcomes);
  RankCounter later(sorted_scores.size());
  for (size_t i = 0; i < n; ++i) later.add(rank_of(risk_scores[i]), +1);

  double concordant_weight = 0;
  long long permissible = 0;
  size_t i = 0;
  while (i < n) {
    double t = outcomes[order[i]].time_days;
    size_t j = i;
    // Remove the whole tied-time group first: pairs within it are never
    // permissible, and partners must have a strictly larger time.
    while (j < n && outcomes[order[j]].time_days == t) {
      later.add(rank_of(risk_scores[order[j]]), -1);
      ++j;
    }
    for (size_t k = i; k < j; ++k) {
      const auto& o = outcomes[order[k]];
      if (!o.event) continue;
      long long n_later = later.total();
      if (n_later == 0) continue;
      size_t r = rank_of(risk_scores[order[k]]);
      long long below = later.count_below(r);
      long long equal = later.count_below(r + 1) - below;
      permissible += n_later;
      // Shorter-lived subject must carry the strictly higher score.
      concordant_weight += static_cast<double>(below) + 0.5 * static_cast<double>(equal);
    }
    i = j;
  }

  if (permissible == 0) raise(ErrorCode::NoPermissiblePairs, "no permissible pairs for concordance");
  return concordant_weight / static_cast<double>(permissible);
}

}  // namespace survkit
