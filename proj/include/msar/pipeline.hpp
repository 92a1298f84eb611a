#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msar/cohort.hpp"
#include "msar/comorbidity.hpp"
#include "msar/eval.hpp"
#include "msar/msar.hpp"
#include "msar/rules.hpp"
#include "msar/synthetic.hpp"

namespace msar {

std::string_view tool_version();

/// Everything one pipeline run depends on. Loaded from a flat JSON object
/// whose keys are dotted paths (see apply_config_value), then overridden by
/// command-line flags.
struct PipelineConfig {
  std::string visits_path;   // CSV, or JSONL when the name ends in .jsonl/.json
  std::string mapping_path;  // empty: bundled table
  std::string out_dir = "msar_out";
  std::optional<Timestamp> as_of;  // empty: each patient's last visit
  CohortConfig cohort;
  CollectOptions collect;
  MiningParams mining;
  double rbo_p = 0.9;
  int folds = 10;
  double sample_fraction = 0.8;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // never affects outputs
  SyntheticConfig synthetic = SyntheticConfig::stationary_default();

  std::string explain_patient_id;
  std::string explain_comorbidities;  // `A;B;C`, overrides the patient lookup
  int explain_top_k = 1;              // <= 0: every candidate rule

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// Sorted-key JSON of every setting that can change an output byte
  /// (out_dir and threads excluded).
  std::string canonical_json() const;
  /// 16 hex digits of a 64-bit FNV-1a hash of canonical_json().
  std::string hash() const;
  /// `msar <version> config=<hash> seed=<seed>`
  std::string provenance() const;
};

/// Sets one dotted key, e.g. "mining.min_count" or
/// "synthetic.prevalence.DRUG". Throws ConfigError on unknown keys or values
/// of the wrong type.
void apply_config_value(PipelineConfig& config, std::string_view key, const std::string& json_value);

/// Reads a flat JSON object of dotted keys on top of `base`.
PipelineConfig load_pipeline_config(std::istream& source, PipelineConfig base = {});
/// Throws InputNotFoundError if the file is missing.
PipelineConfig load_pipeline_config_file(const std::string& path, PipelineConfig base = {});

// ---- file formats ---------------------------------------------------------

inline constexpr std::string_view kRuleCsvHeader =
    "members,count_total,count_recurrent,confidence,support,z_confidence,z_support,msar_score";
inline constexpr std::string_view kFlagsCsvHeader =
    "patient_id,readmit_30d,inpatient_frequent,ed_frequent,is_recurrent";

/// Provenance comment, a `# n=.. total_rows=.. min_count=.. normalized=..`
/// line, then the header and one line per rule in key order. Reals use 17
/// significant digits; an unset msar_score is an empty field.
void write_rule_table(std::ostream& out, const RuleTable& table, std::string_view provenance);
RuleTable read_rule_table(std::istream& in);

struct WeightsFile {
  WeightSolution weights;
  double delta_max = 0.0;
};
void write_weights(std::ostream& out, const WeightsFile& weights, const PipelineConfig& config);
WeightsFile read_weights(std::istream& in);

Dataset read_visits_file(const std::string& path, ParseReport* report = nullptr);
MappingTable read_mapping_file(const std::string& path);

// ---- stages ---------------------------------------------------------------

enum class Stage { Generate, Identify, Mine, Weights, Score, Explain, Evaluate, Summarize };
std::string_view to_string(Stage stage);

/// Output file names inside out_dir.
namespace files {
inline constexpr const char* kVisits = "visits.csv";
inline constexpr const char* kFlags = "flags.csv";
inline constexpr const char* kRules = "rules.csv";
inline constexpr const char* kScatter = "confidence_support_scatter.csv";
inline constexpr const char* kTupleRanges = "tuple_size_ranges.csv";
inline constexpr const char* kWeights = "weights.json";
inline constexpr const char* kScoredRules = "scored_rules.csv";
inline constexpr const char* kTopFrequencies = "top_rule_frequencies.csv";
inline constexpr const char* kExplain = "explain.jsonl";
inline constexpr const char* kFolds = "folds.jsonl";
inline constexpr const char* kCvWeights = "cv_weights.csv";
inline constexpr const char* kRboMatrix = "rbo_matrix.csv";
inline constexpr const char* kCvFrequencies = "cv_frequencies.csv";
inline constexpr const char* kCohortSummary = "cohort_summary.csv";
}  // namespace files

struct PipelineReport {
  std::vector<std::string> written;  // paths, in write order
  std::vector<std::string> warnings;
};

/// Runs the requested stages in dependency order. A stage whose input was not
/// produced in this call reads it from out_dir (rules.csv, weights.json,
/// scored_rules.csv), so split runs match a single run. When Generate runs,
/// later stages use the generated visits and visits_path is ignored.
PipelineReport run_pipeline(const PipelineConfig& config, std::vector<Stage> stages,
                            std::ostream* log = nullptr);

}  // namespace msar
