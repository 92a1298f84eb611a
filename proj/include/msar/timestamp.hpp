#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace msar {

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// UTC instant at second resolution.
struct Timestamp {
  std::int64_t seconds = 0;  // since 1970-01-01T00:00:00Z

  friend constexpr auto operator<=>(Timestamp, Timestamp) = default;

  constexpr Timestamp plus_seconds(std::int64_t s) const { return {seconds + s}; }
  constexpr Timestamp plus_days(std::int64_t d) const { return {seconds + d * kSecondsPerDay}; }

  /// Days since the epoch, floored (calendar day in UTC).
  constexpr std::int64_t day_number() const {
    return seconds >= 0 ? seconds / kSecondsPerDay
                        : -((-seconds + kSecondsPerDay - 1) / kSecondsPerDay);
  }
};

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SS` and the same with a trailing
/// `Z` or a space instead of `T`. Throws ParseError on anything else,
/// including out-of-range calendar fields.
Timestamp parse_timestamp(std::string_view text);

/// Always `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_timestamp(Timestamp t);

}  // namespace msar
