#pragma once

// Shared test oracles. Each is a straight-line re-derivation, deliberately
// using a different algorithm than the production code it checks.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "survkit/errors.hpp"
#include "survkit/features.hpp"
#include "survkit/survcore.hpp"

namespace testutil {

inline survkit::SurvivalOutcome ev(double t) { return {t, true}; }
inline survkit::SurvivalOutcome cens(double t) { return {t, false}; }

// Runs fn and reports which project error code it threw, if any.
template <typename Fn>
std::optional<survkit::ErrorCode> error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const survkit::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// O(n^2) concordance enumerator. Conventions mirror the documented contract:
// equal-time pairs are never permissible; the shorter time must belong to an
// event subject; tied scores count 0.5. nullopt = no permissible pairs.
inline std::optional<double> naive_cindex(const std::vector<double>& scores,
                                          const std::vector<survkit::SurvivalOutcome>& outcomes) {
  double weight = 0;
  long long permissible = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    for (std::size_t j = i + 1; j < outcomes.size(); ++j) {
      survkit::SurvivalOutcome a = outcomes[i], b = outcomes[j];
      double sa = scores[i], sb = scores[j];
      if (a.time_days == b.time_days) continue;
      if (b.time_days < a.time_days) {
        std::swap(a, b);
        std::swap(sa, sb);
      }
      if (!a.event) continue;
      ++permissible;
      if (sa > sb) weight += 1.0;
      else if (sa == sb) weight += 0.5;
    }
  }
  if (permissible == 0) return std::nullopt;
  return weight / static_cast<double>(permissible);
}

// Recomputes the ten window statistics from their textbook formulas (slope
// via the classic n*Sxy - Sx*Sy form, unlike the centered production code).
inline survkit::features::DerivedFeatures naive_derive(
    const std::vector<survkit::ingest::SeriesPoint>& pts) {
  survkit::features::DerivedFeatures d;
  std::size_t n = pts.size();
  d.len = static_cast<double>(n);
  d.first = pts.front().value;
  d.last = pts.back().value;
  d.max = d.min = pts[0].value;
  int day_max = pts[0].delta_days, day_min = pts[0].delta_days;
  double sum = 0;
  for (const auto& p : pts) {
    sum += p.value;
    if (p.value > d.max) { d.max = p.value; day_max = p.delta_days; }
    if (p.value < d.min) { d.min = p.value; day_min = p.delta_days; }
  }
  d.mean = sum / static_cast<double>(n);
  d.diff = d.max - d.min;
  if (n == 1) {
    d.sd = d.diff = d.minmax = d.slope = 0;
    return d;
  }
  double ss = 0;
  for (const auto& p : pts) ss += (p.value - d.mean) * (p.value - d.mean);
  d.sd = std::sqrt(ss / static_cast<double>(n - 1));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    sx += p.delta_days;
    sy += p.value;
    sxx += static_cast<double>(p.delta_days) * p.delta_days;
    sxy += p.delta_days * p.value;
  }
  double denom = static_cast<double>(n) * sxx - sx * sx;
  d.slope = denom > 0 ? (static_cast<double>(n) * sxy - sx * sy) / denom : 0.0;
  d.minmax = day_max != day_min ? (d.max - d.min) / static_cast<double>(day_max - day_min) : 0.0;
  return d;
}

// Random censored instance with deliberate time and score ties.
struct RandomInstance {
  std::vector<survkit::SurvivalOutcome> outcomes;
  std::vector<double> scores;
};

inline RandomInstance random_tied_instance(std::mt19937_64& rng, std::size_t max_n = 40) {
  std::uniform_int_distribution<std::size_t> n_dist(1, max_n);
  std::uniform_int_distribution<int> time_dist(1, 8);       // few values -> many ties
  std::uniform_int_distribution<int> score_dist(0, 4);      // few values -> tied scores
  std::bernoulli_distribution event_dist(0.6);
  RandomInstance inst;
  std::size_t n = n_dist(rng);
  for (std::size_t i = 0; i < n; ++i) {
    inst.outcomes.push_back({static_cast<double>(time_dist(rng)), event_dist(rng)});
    inst.scores.push_back(score_dist(rng) * 0.25);
  }
  return inst;
}

}  // namespace testutil
