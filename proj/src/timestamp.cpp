#include "msar/timestamp.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "msar/error.hpp"

namespace msar {
namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t width, int& out) {
  if (pos + width > text.size()) return false;
  for (std::size_t i = pos; i < pos + width; ++i) {
    if (text[i] < '0' || text[i] > '9') return false;
  }
  std::from_chars(text.data() + pos, text.data() + pos + width, out);
  return true;
}

[[noreturn]] void fail(std::string_view text) {
  throw ParseError("malformed timestamp '" + std::string(text) + "'");
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!read_int(text, 0, 4, y) || text.size() < 10 || text[4] != '-' || !read_int(text, 5, 2, mo) ||
      text[7] != '-' || !read_int(text, 8, 2, d)) {
    fail(text);
  }
  std::size_t pos = 10;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
    if (!read_int(text, 11, 2, h) || text.size() < 19 || text[13] != ':' ||
        !read_int(text, 14, 2, mi) || text[16] != ':' || !read_int(text, 17, 2, s)) {
      fail(text);
    }
    pos = 19;
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) fail(text);

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) fail(text);
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return Timestamp{static_cast<std::int64_t>(days) * kSecondsPerDay + h * 3600 + mi * 60 + s};
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const std::int64_t day_num = t.day_number();
  const std::int64_t rem = t.seconds - day_num * kSecondsPerDay;
  const year_month_day ymd{sys_days{days{day_num}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

}  // namespace msar
