#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msar/comorbidity.hpp"
#include "msar/rules.hpp"

namespace msar {

/// Edge between two rules sharing all but one member. `a` is the rule with
/// the higher z-confidence (ties: higher z-support, then smaller key), so
/// delta_c >= 0 while delta_s keeps its sign.
struct SimilarityEdge {
  RuleKey a;
  RuleKey b;
  double delta_c = 0.0;  // z_confidence(a) - z_confidence(b)
  double delta_s = 0.0;  // z_support(a) - z_support(b)
};

struct SimilarityGraph {
  std::vector<RuleKey> vertices;
  /// Sorted by (a, b).
  std::vector<SimilarityEdge> edges;
  /// max over edges of max(delta_c, delta_s); empty when there are no edges.
  std::optional<double> delta_max;
};

/// Edges are found by bucketing rules on their (n-1)-subsets: two distinct
/// n-sets share exactly n-1 members iff they fall in the same bucket, and
/// each such pair meets in exactly one bucket.
SimilarityGraph build_similarity_graph(const RuleTable& table);

struct WeightSolution {
  double w_c = 0.5;
  double w_s = 0.5;
  double objective = 0.0;
  bool degenerate = false;
};

/// Sum over edges of sim_e^2, sim_e = w_c (dmax - delta_c) + w_s (dmax - delta_s),
/// with w_s = 1 - w_c.
double similarity_objective(const SimilarityGraph& graph, double w_c);

/// Derivative of similarity_objective with respect to w_c.
double similarity_objective_slope(const SimilarityGraph& graph, double w_c);

/// Exact minimizer of the objective on the simplex w_c + w_s = 1, w >= 0.
///
/// With a_e = dmax - delta_c and b_e = dmax - delta_s the objective is
/// sum (b_e + w_c (a_e - b_e))^2, a convex parabola in w_c whose vertex is
/// w_c = -sum b_e (a_e - b_e) / sum (a_e - b_e)^2, clamped to [0, 1]. When
/// every a_e equals b_e the objective does not depend on the weights and
/// (0.5, 0.5) is returned with degenerate set. Throws NoEdgesError.
WeightSolution solve_weights(const SimilarityGraph& graph);

/// Brute-force check of solve_weights: evaluates the objective at
/// w_c = 0, step, 2 step, ..., 1 and keeps the lowest w_c among minima.
/// Requires 0 < step <= 0.01 (ConfigError otherwise). Throws NoEdgesError.
WeightSolution grid_search_weights(const SimilarityGraph& graph, double step);

/// msar_score = w_c * z_confidence + w_s * z_support on every rule.
RuleTable score_rules(RuleTable table, const WeightSolution& weights);

enum class ExplainStatus { Ok, NoRule };

struct RankedRule {
  RuleKey key;
  double msar_score = 0.0;
  double confidence = 0.0;
  double support = 0.0;
};

struct Explanation {
  ExplainStatus status = ExplainStatus::NoRule;
  /// At most k entries, best first.
  std::vector<RankedRule> ranked;
  /// Members of the top-ranked rule.
  std::vector<CategoryIndex> top_comorbidities;
};

/// Ranks the n-subsets of `patient_set` that exist in the scored table by
/// msar_score (ties: higher confidence, then smaller key). k <= 0 keeps all.
Explanation explain_patient(ComorbiditySet patient_set, const RuleTable& scored, int k = 1);

}  // namespace msar
