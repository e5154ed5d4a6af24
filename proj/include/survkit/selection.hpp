#pragma once

// The three feature-selection algorithms behind the consensus pick - forest
// permutation importance, componentwise boosting, and elastic-net entry
// order - plus the mean-rank aggregation that caps the selected set at the
// challenge's variable budget.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "survkit/features.hpp"
#include "survkit/forest.hpp"
#include "survkit/survcore.hpp"

namespace survkit::selection {

enum class SelectorMethod { forest_vimp, boosted_cox, elastic_net };

// Tag written to report files: forest-vimp | boosted-cox | elastic-net.
std::string_view method_name(SelectorMethod method);

struct SelectorRanking {
  SelectorMethod method = SelectorMethod::forest_vimp;
  std::vector<std::string> feature;  // training column order
  std::vector<double> score;         // larger = more important
  std::vector<int> rank;             // permutation of 1..p, 1 = best
};

// Fits a forest and ranks by permutation importance, descending; ties go to
// the lower column index.
SelectorRanking rank_by_forest_vimp(const FeatureMatrix& matrix,
                                    std::span<const SurvivalOutcome> outcomes,
                                    const forest::ForestParams& params, int n_repeats = 5,
                                    std::uint64_t importance_seed = 1);

// Ranks by |final boosted coefficient| on the standardized scale. Features
// the boosting never picked rank after every picked one; remaining ties
// resolve by how often a feature was picked, then by column order.
SelectorRanking rank_by_boosting(const FeatureMatrix& matrix,
                                 std::span<const SurvivalOutcome> outcomes, double nu,
                                 int iterations);

// Ranks by the penalty strength at which a feature first becomes active:
// entering earlier (larger lambda) scores higher. Features that never enter
// score 0 and fall back to column order.
SelectorRanking rank_by_elastic_net(const FeatureMatrix& matrix,
                                    std::span<const SurvivalOutcome> outcomes, double alpha);

struct ConsensusSelection {
  std::vector<std::string> selected;       // mean-rank ascending, budget-capped
  std::vector<std::string> feature;        // training column order
  std::vector<double> mean_rank;           // aligned with feature
  std::vector<SelectorRanking> rankings;   // the inputs, kept for reporting
};

// Mean-rank aggregation: order features by the average of their per-method
// ranks (ties to the lower column index) and keep the best `budget`. With
// count_source_variables, every column engineered from one subject-level
// variable shares a single budget slot, so the budget counts variables and
// all columns of a charged variable stay selectable.
ConsensusSelection consensus(const std::vector<SelectorRanking>& rankings, std::size_t budget,
                             bool count_source_variables = false);

// Subject-level variable a column came from: window-statistic columns drop
// their trailing statistic suffix, one-hot columns drop "=level"; anything
// else is its own source.
std::string source_variable(const std::string& column);

// feature,method,score,rank - one block per ranking, rank ascending.
void write_rankings_csv(const std::vector<SelectorRanking>& rankings, std::ostream& out);

// feature,mean_rank,selected - mean rank ascending, selected flag 1/0.
void write_consensus_csv(const ConsensusSelection& selection, std::ostream& out);

}  // namespace survkit::selection
