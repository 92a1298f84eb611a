#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msar/cohort.hpp"
#include "msar/comorbidity.hpp"
#include "msar/ingest.hpp"
#include "msar/msar.hpp"
#include "msar/rules.hpp"

namespace msar {

/// Truncated, normalized rank-biased overlap at depth max(|a|, |b|).
///
///   rbo = sum_{d=1..D} p^(d-1) |a[:d] & b[:d]| / d  /  sum_{d=1..D} p^(d-1)
///
/// A list shorter than d contributes its whole contents to a[:d]. Identical
/// lists score exactly 1. Throws EmptyInputError on an empty list and Error
/// on duplicates or p outside (0, 1).
double rbo(std::span<const CategoryIndex> a, std::span<const CategoryIndex> b, double p = 0.9);

/// The unnormalized numerator (1 - p) sum_{d=1..D} p^(d-1) |a[:d] & b[:d]| / d.
/// Appending items to either list only adds non-negative terms, so it never
/// decreases; the normalized rbo() can fall when the appended depth agrees
/// less than the average so far. Same errors as rbo().
double rbo_agreement(std::span<const CategoryIndex> a, std::span<const CategoryIndex> b, double p = 0.9);

using CategoryFrequencies = std::array<double, kNumCategories>;

/// Share of the top ceil(top_fraction * |rules|) rules (by msar_score, ties by
/// smaller key) that contain each category. Throws EmptyInputError on an empty
/// table or empty selection, ConfigError if top_fraction is outside (0, 1].
CategoryFrequencies comorbidity_frequency(const RuleTable& scored, double top_fraction = 0.259);

/// Categories with non-zero frequency, most frequent first; ties by the best
/// score among selected rules holding the category, then by index.
std::vector<CategoryIndex> rank_comorbidities(const RuleTable& scored, double top_fraction = 0.259);

struct MiningParams {
  int n = 3;
  int min_count = 5;
  double top_fraction = 0.259;
};

struct CrossValidationParams {
  int folds = 10;
  double sample_fraction = 0.8;
  std::uint64_t seed = 0;
  MiningParams mining;
  unsigned threads = 1;
};

struct FoldResult {
  int fold_index = 0;
  bool ok = false;
  std::string error;  // set when !ok
  std::size_t train_rows = 0;
  std::size_t rule_count = 0;
  double delta_max = 0.0;
  WeightSolution weights;
  CategoryFrequencies frequencies{};
  std::vector<CategoryIndex> ranked_comorbidities;
};

/// Rows a fold trains on: the floor(fraction * |rows|) rows with the smallest
/// hash of (seed, fold, patient_id). Independent of row order.
std::vector<TrainingRow> subsample_fold(std::span<const TrainingRow> rows, int fold,
                                        double fraction, std::uint64_t seed);

/// Independent subsamples (not a partition), each run through enumerate,
/// z-normalize, graph, solve and score. A fold whose normalization or solve
/// fails is reported with ok = false and the run continues. Requires at
/// least 100 rows.
std::vector<FoldResult> cross_validate(std::span<const TrainingRow> rows,
                                       const CrossValidationParams& params);

struct CohortSummary {
  std::size_t total_patients = 0;
  double recurrent_fraction = 0.0;
  double readmit_30d_rate = 0.0;
  double ed_recurrent_fraction_of_recurrent = 0.0;
  double inpatient_recurrent_rate = 0.0;
  double ed_recurrent_rate = 0.0;
};

/// Per-patient rates at each patient's last visit. Throws EmptyInputError.
CohortSummary summarize_cohort(const Dataset& dataset, const CohortConfig& config);

}  // namespace msar
