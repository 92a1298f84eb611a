#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msar/ingest.hpp"

namespace msar {

// Elixhauser comorbidity categories. The registry is ordered by id so that
// index order and lexicographic id order agree.

using CategoryIndex = std::uint8_t;
inline constexpr std::size_t kNumCategories = 30;

struct ComorbidityCategory {
  std::string_view id;
  std::string_view display_name;
};

const std::array<ComorbidityCategory, kNumCategories>& category_registry();

std::optional<CategoryIndex> find_category(std::string_view id);
std::string_view category_id(CategoryIndex index);

/// Set of categories, stored as a bitmask over registry indices.
class ComorbiditySet {
public:
  constexpr ComorbiditySet() = default;
  constexpr explicit ComorbiditySet(std::uint32_t bits) : bits_(bits) {}

  static ComorbiditySet of(std::initializer_list<CategoryIndex> members);
  /// Throws Error on an unknown id.
  static ComorbiditySet from_ids(const std::vector<std::string>& ids);

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool contains(CategoryIndex c) const { return (bits_ >> c) & 1U; }
  constexpr void insert(CategoryIndex c) { bits_ |= (1U << c); }
  constexpr void merge(ComorbiditySet other) { bits_ |= other.bits_; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool is_subset_of(ComorbiditySet other) const { return (bits_ & ~other.bits_) == 0; }

  /// Members in ascending index order.
  std::vector<CategoryIndex> members() const;
  std::vector<std::string> ids() const;

  friend constexpr bool operator==(ComorbiditySet, ComorbiditySet) = default;

private:
  std::uint32_t bits_ = 0;
};

enum class IcdVersion { ICD9, ICD10 };

/// ICD prefix -> category table with longest-prefix lookup per version.
class MappingTable {
public:
  struct Entry {
    IcdVersion version;
    std::string prefix;
    CategoryIndex category;
  };

  /// Throws ParseError on a duplicate (version, prefix) key.
  void add(IcdVersion version, std::string prefix, CategoryIndex category);

  /// Longest prefix match within one version.
  std::optional<CategoryIndex> lookup(IcdVersion version, std::string_view code) const;

  /// Resolves a normalized code. A leading `ICD9:` / `ICD10:` tag selects the
  /// version; untagged codes starting with a digit are ICD-9; other untagged
  /// codes try ICD-10 first and fall back to ICD-9 (V and E codes).
  std::optional<CategoryIndex> lookup(std::string_view code) const;

  std::size_t size() const;
  /// Entries ordered by (version, prefix).
  std::vector<Entry> entries() const;

private:
  std::map<std::string, CategoryIndex, std::less<>> icd9_;
  std::map<std::string, CategoryIndex, std::less<>> icd10_;
};

/// CSV with header `icd_version,code_prefix,category_id`. Throws ParseError
/// on an empty file, a duplicate key or an unknown category id.
MappingTable load_mapping(std::istream& source);
MappingTable load_mapping(std::string_view text);

/// Contents of data/elixhauser_mapping.csv, compiled in.
std::string_view bundled_mapping_csv();
const MappingTable& bundled_mapping();

/// Tagged code that resolves to exactly this entry, e.g. `ICD10:F11`.
std::string inverse_code(const MappingTable::Entry& entry);

struct MappedCodes {
  ComorbiditySet categories;
  std::size_t unmatched = 0;
};

MappedCodes map_codes(const std::vector<std::string>& codes, const MappingTable& table);

struct CollectOptions {
  int lookback_days = 365;
  int max_visits = 3;
};

/// Union of categories over the up-to-`max_visits` most recent visits with
/// admit time in (as_of - lookback_days, as_of].
MappedCodes collect_comorbidities(const PatientHistory& history, Timestamp as_of,
                                  const MappingTable& table, CollectOptions options = {});

}  // namespace msar
