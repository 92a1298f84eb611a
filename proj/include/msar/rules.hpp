#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "msar/cohort.hpp"
#include "msar/comorbidity.hpp"
#include "msar/ingest.hpp"

namespace msar {

/// One row per patient: the comorbidities seen before the as-of time and the
/// recurrence label at that time.
struct TrainingRow {
  std::string patient_id;
  ComorbiditySet comorbidities;
  bool is_recurrent = false;
};

/// Sorted tuple of distinct categories. Ordered lexicographically on the
/// sorted member lists.
class RuleKey {
public:
  constexpr RuleKey() = default;
  constexpr explicit RuleKey(ComorbiditySet members) : members_(members) {}

  static RuleKey of(std::initializer_list<CategoryIndex> members) {
    return RuleKey(ComorbiditySet::of(members));
  }
  /// Parses `A;B;C`. Throws ParseError on unknown or repeated ids.
  static RuleKey parse(std::string_view joined);

  constexpr ComorbiditySet set() const { return members_; }
  constexpr std::uint32_t bits() const { return members_.bits(); }
  std::size_t size() const { return members_.size(); }
  std::vector<CategoryIndex> members() const { return members_.members(); }
  /// `A;B;C` with ids in ascending order.
  std::string to_string() const;

  friend constexpr bool operator==(RuleKey, RuleKey) = default;
  friend bool operator<(RuleKey a, RuleKey b);

private:
  ComorbiditySet members_;
};

struct RuleStats {
  RuleKey key;
  std::int64_t count_total = 0;
  std::int64_t count_recurrent = 0;
  double confidence = 0.0;
  double support = 0.0;
  double z_confidence = 0.0;
  double z_support = 0.0;
  std::optional<double> msar_score;
};

/// Rules sorted by key.
class RuleTable {
public:
  RuleTable() = default;
  RuleTable(int n, std::int64_t total_rows, int min_count, std::vector<RuleStats> rules);

  int n() const { return n_; }
  std::int64_t total_rows() const { return total_rows_; }
  int min_count() const { return min_count_; }
  bool normalized() const { return normalized_; }
  void set_normalized(bool v) { normalized_ = v; }
  bool scored() const;

  const std::vector<RuleStats>& rules() const { return rules_; }
  std::vector<RuleStats>& mutable_rules() { return rules_; }
  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }

  const RuleStats* find(RuleKey key) const;

private:
  void reindex();

  int n_ = 0;
  std::int64_t total_rows_ = 0;
  int min_count_ = 1;
  bool normalized_ = false;
  std::vector<RuleStats> rules_;
  std::unordered_map<std::uint32_t, std::size_t> index_;
};

struct LastVisit {};
struct FixedTime {
  Timestamp as_of;
};
using AsOfPolicy = std::variant<LastVisit, FixedTime>;

struct TrainingRows {
  std::vector<TrainingRow> rows;
  std::size_t unmatched_codes = 0;
};

/// Exactly one row per patient, in dataset (patient id) order. Patients with
/// no visits at or before the as-of time get an empty set and no flags.
TrainingRows build_training_rows(const Dataset& dataset, const CohortConfig& cohort_config,
                                 const MappingTable& table, AsOfPolicy policy = LastVisit{},
                                 CollectOptions collect = {}, unsigned threads = 1);

/// Unfiltered n-subset counters; mergeable across row partitions.
class RuleCounter {
public:
  explicit RuleCounter(int n);

  void add(const TrainingRow& row);
  void add(std::span<const TrainingRow> rows);
  /// Sums counters; both sides must share n.
  void merge(const RuleCounter& other);

  int n() const { return n_; }
  std::int64_t rows_seen() const { return rows_; }

  /// Drops rules below min_count and fills confidence/support.
  RuleTable finalize(int min_count) const;

private:
  struct Counts {
    std::int64_t total = 0;
    std::int64_t recurrent = 0;
  };

  int n_;
  std::int64_t rows_ = 0;
  std::unordered_map<std::uint32_t, Counts> counts_;
};

/// Every n-subset of each row's set counts once for that row. Parallel over
/// row partitions; the result does not depend on `threads`.
RuleTable enumerate_rules(std::span<const TrainingRow> rows, int n, int min_count,
                          unsigned threads = 1);

/// Population z-scores of confidence and support over the whole table.
/// Throws DegenerateNormalizationError("confidence"/"support") on zero spread
/// and EmptyInputError on fewer than two rules.
RuleTable z_normalize(RuleTable table);

/// Highest-confidence rule with support >= tau among `candidates` (all rules
/// when empty). Ties: higher support, then smaller key.
std::optional<RuleKey> ar_select(const RuleTable& table, double tau,
                                 std::span<const RuleKey> candidates = {});

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Linear-interpolation quartiles. Throws EmptyInputError on empty input.
Quartiles quartiles(std::vector<double> values);

struct TupleSizeRange {
  int n = 0;
  std::size_t rule_count = 0;
  Quartiles confidence;
  Quartiles support;
};

/// Confidence/support spread per tuple size; sizes with no surviving rules
/// are omitted.
std::vector<TupleSizeRange> tuple_size_ranges(std::span<const TrainingRow> rows,
                                              std::span<const int> sizes, int min_count,
                                              unsigned threads = 1);

}  // namespace msar
