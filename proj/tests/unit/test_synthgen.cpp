#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "survkit/errors.hpp"
#include "survkit/synthgen.hpp"

using namespace survkit;
using namespace survkit::synthgen;

namespace {

SynthSpec linear_spec(std::size_t n, std::uint64_t seed) {
  SynthSpec spec;
  spec.n = n;
  spec.features = {{"x1", 0.8}, {"x2", -0.5}, {"x3", 0.0}};
  spec.baseline_hazard = 0.002;
  spec.censor_rate = 0.001;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("censor rate zero means every outcome is an event") {
  auto spec = linear_spec(200, 1);
  spec.censor_rate = 0;
  auto result = generate(spec);
  REQUIRE(result.cohort.size() == 200);
  for (const auto& o : result.cohort.outcomes) {
    CHECK(o.event);
    CHECK(o.time_days > 0);
  }
  for (bool c : result.truth.censored) CHECK_FALSE(c);
}

TEST_CASE("same spec and seed give identical cohorts") {
  auto a = generate(linear_spec(100, 42));
  auto b = generate(linear_spec(100, 42));
  CHECK(a.cohort.same_contents(b.cohort));
  CHECK(a.truth.linear_predictor == b.truth.linear_predictor);
  CHECK(a.truth.uncensored_time == b.truth.uncensored_time);
}

TEST_CASE("growing n extends existing subjects without changing them") {
  auto small = generate(linear_spec(50, 7));
  auto large = generate(linear_spec(120, 7));
  for (std::size_t i = 0; i < 50; ++i) {
    CAPTURE(i);
    CHECK(large.cohort.subjects[i] == small.cohort.subjects[i]);
    CHECK(large.cohort.outcomes[i] == small.cohort.outcomes[i]);
    CHECK(large.cohort.statics[i] == small.cohort.statics[i]);
    CHECK(large.truth.linear_predictor[i] == small.truth.linear_predictor[i]);
  }
}

TEST_CASE("median uncensored time matches the exponential quantile") {
  SynthSpec spec;
  spec.n = 100000;
  spec.baseline_hazard = 0.002;
  spec.seed = 3;
  auto result = generate(spec);
  std::vector<double> times = result.truth.uncensored_time;
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  double median = times[times.size() / 2];
  double expected = std::log(2.0) / spec.baseline_hazard;
  CHECK(std::abs(median - expected) / expected < 0.05);
}

TEST_CASE("event fraction decreases as the censoring rate grows") {
  double last_fraction = 1.1;
  for (double rate : {0.0005, 0.002, 0.01}) {
    auto spec = linear_spec(10000, 11);
    spec.censor_rate = rate;
    auto result = generate(spec);
    std::size_t events = 0;
    for (const auto& o : result.cohort.outcomes) events += o.event ? 1 : 0;
    double fraction = static_cast<double>(events) / static_cast<double>(spec.n);
    CHECK(fraction < last_fraction);
    last_fraction = fraction;
  }
}

TEST_CASE("zero-coefficient interaction reduces to the plain linear generator") {
  auto plain = linear_spec(300, 5);
  auto with_zero = plain;
  with_zero.interaction = InteractionSpec{0, 1, 0.0};
  auto a = generate(plain);
  auto b = generate(with_zero);
  CHECK(a.cohort.same_contents(b.cohort));
  CHECK(a.truth.linear_predictor == b.truth.linear_predictor);
}

TEST_CASE("interaction term shifts the linear predictor by coef*x_i*x_j") {
  auto spec = linear_spec(50, 9);
  auto base = generate(spec);
  spec.interaction = InteractionSpec{0, 2, 2.0};
  auto with = generate(spec);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double x1 = std::get<double>(with.cohort.statics[i].at("x1"));
    double x3 = std::get<double>(with.cohort.statics[i].at("x3"));
    CHECK(with.truth.linear_predictor[i] ==
          doctest::Approx(base.truth.linear_predictor[i] + 2.0 * x1 * x3).epsilon(1e-12));
  }
}

TEST_CASE("categorical levels appear as labels and shift risk") {
  SynthSpec spec;
  spec.n = 500;
  spec.seed = 13;
  spec.categorical = CategoricalSpec{"site", {"bulbar", "limb"}, {1.0, -1.0}};
  auto result = generate(spec);
  CHECK(result.cohort.static_names == std::vector<std::string>{"site"});
  std::size_t bulbar = 0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto& label = std::get<std::string>(result.cohort.statics[i].at("site"));
    bool is_bulbar = label == "bulbar";
    bulbar += is_bulbar ? 1 : 0;
    CHECK(result.truth.linear_predictor[i] == (is_bulbar ? 1.0 : -1.0));
  }
  CHECK(bulbar > 100);
  CHECK(bulbar < 400);
}

TEST_CASE("longitudinal emission declines with the latent risk") {
  auto spec = linear_spec(200, 21);
  spec.longitudinal.n_visits = 4;
  spec.longitudinal.slope_scale = 0.05;
  spec.longitudinal.noise_sd = 0.0;
  spec.longitudinal.day_jitter = 0;
  auto result = generate(spec);
  CHECK(result.cohort.variable_names == std::vector<std::string>{"score"});
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto& series = result.cohort.longitudinal[i].at("score");
    REQUIRE(series.size() == 4);
    CHECK(series.front().delta_days == 0);
    CHECK(series.back().delta_days == 92);
    for (std::size_t k = 1; k < series.size(); ++k) {
      CHECK(series[k].delta_days > series[k - 1].delta_days);
    }
    // value at day d is exactly base - slope*d when noise is off
    double slope = result.truth.latent_slope[i];
    CHECK(slope == doctest::Approx(0.05 * result.truth.linear_predictor[i]).epsilon(1e-12));
    for (const auto& p : series) {
      CHECK(p.value == doctest::Approx(30.0 - slope * p.delta_days).epsilon(1e-9));
    }
  }
}

TEST_CASE("jittered visit days stay inside the emission window") {
  auto spec = linear_spec(100, 23);
  spec.longitudinal.n_visits = 5;
  spec.longitudinal.day_jitter = 10;
  auto result = generate(spec);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto& series = result.cohort.longitudinal[i].at("score");
    CHECK(series.size() <= 5);  // collisions resolve keep-last
    CHECK(!series.empty());
    for (const auto& p : series) {
      CHECK(p.delta_days >= 0);
      CHECK(p.delta_days <= 92);
    }
  }
}

TEST_CASE("ground truth CSV has one row per subject") {
  auto result = generate(linear_spec(5, 2));
  std::ostringstream out;
  write_ground_truth_csv(result.truth, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "subject_id,true_linpred,true_time,censored");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("generated tables round-trip through the ingest writers") {
  auto spec = linear_spec(30, 17);
  spec.longitudinal.n_visits = 3;
  spec.longitudinal.noise_sd = 0.5;
  spec.categorical = CategoricalSpec{"site", {"a", "b", "c"}, {0.2, 0.0, -0.2}};
  auto result = generate(spec);

  std::ostringstream statics, longi, outcomes;
  ingest::write_statics_csv(result.cohort, statics);
  ingest::write_longitudinal_csv(result.cohort, longi);
  ingest::write_outcomes_csv(result.cohort, outcomes);
  std::istringstream si(statics.str()), li(longi.str()), oi(outcomes.str());
  auto back = ingest::assemble_cohort(ingest::parse_static(si), ingest::parse_longitudinal(li),
                                      ingest::parse_outcomes(oi));
  CHECK(back.same_contents(result.cohort));
}

TEST_CASE("invalid specs are rejected") {
  SynthSpec spec;
  spec.n = 1;
  CHECK_THROWS_AS(generate(spec), Error);
  spec.n = 10;
  spec.baseline_hazard = 0;
  CHECK_THROWS_AS(generate(spec), Error);
  spec.baseline_hazard = 0.001;
  spec.censor_rate = -1;
  CHECK_THROWS_AS(generate(spec), Error);
  spec.censor_rate = 0;
  spec.interaction = InteractionSpec{0, 5, 1.0};  // out of range: no features
  CHECK_THROWS_AS(generate(spec), Error);
  spec.interaction.reset();
  spec.categorical = CategoricalSpec{"site", {"a"}, {0.1, 0.2}};  // size mismatch
  CHECK_THROWS_AS(generate(spec), Error);
}

}  // TEST_SUITE
