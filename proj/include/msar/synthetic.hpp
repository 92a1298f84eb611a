#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "msar/comorbidity.hpp"
#include "msar/ingest.hpp"

namespace msar {

/// Parameters of the synthetic visit-population generator.
///
/// Each patient draws every category independently with its prevalence, then
/// a recurrence label with probability
///   sigmoid(logit(baseline_recurrence_probability) + sum of recurrence_logit
///           over the patient's categories).
/// Visit sequences are built to agree with the label under the default
/// CohortConfig: recurrent patients get a <=30-day readmission pair, more
/// than four ED visits within a year, or more than four non-elective
/// inpatient visits within a year; other patients get visits spaced at least
/// 100 days apart. Category codes land on the (up to) three most recent
/// visits inside the one-year lookback, so collect_comorbidities() at the
/// last visit recovers exactly the drawn set.
struct SyntheticConfig {
  int num_patients = 500;
  std::array<double, kNumCategories> base_prevalence{};
  std::array<double, kNumCategories> recurrence_logit{};
  double baseline_recurrence_probability = 0.2;
  /// Visit count range for non-recurrent patients.
  int min_visits = 1;
  int max_visits = 4;
  /// Probability that a visit also carries an unmapped filler code.
  double filler_code_probability = 0.3;
  std::uint64_t seed = 0;

  /// Throws ConfigError on probabilities outside [0,1], num_patients < 1 or
  /// a bad visit range.
  void validate() const;

  /// Stationary population used for cross-validation checks: about seven
  /// categories per patient, with recurrence rising mildly alongside
  /// prevalence, plus drug abuse as a rare (0.75%) category that is recurrent
  /// in more than 90% of its carriers.
  static SyntheticConfig stationary_default();
};

/// A generated dataset together with what each patient drew, in patient-id
/// order (the same order as dataset.patients()).
struct SyntheticPopulation {
  Dataset dataset;
  std::vector<ComorbiditySet> drawn_sets;
  std::vector<bool> drawn_recurrent;
};

/// Deterministic in `config` (including the seed).
SyntheticPopulation generate_synthetic_population(const SyntheticConfig& config,
                                                  const MappingTable& table = bundled_mapping());
Dataset generate_synthetic(const SyntheticConfig& config, const MappingTable& table = bundled_mapping());

}  // namespace msar
