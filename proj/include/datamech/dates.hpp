#pragma once

#include <cstdio>
#include <string>
#include <string_view>

#include "datamech/errors.hpp"

namespace datamech {

// A calendar date stored as days since 1970-01-01 (proleptic Gregorian).
struct Date {
  long days = 0;

  friend auto operator<=>(const Date&, const Date&) = default;
};

namespace detail {

// Days-from-civil (Howard Hinnant's algorithm).
inline long days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<long>(era) * 146097 + static_cast<long>(doe) - 719468;
}

inline void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yy = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = yy + (m <= 2);
}

}  // namespace detail

// Parses "YYYY-MM-DD". Anything else is a data error.
inline Date parse_date(std::string_view iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = '\0';
  const std::string s(iso);
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3 || m < 1 || m > 12 ||
      d < 1 || d > 31 || s.size() != 10) {
    throw DataError("invalid ISO-8601 date: '" + s + "'");
  }
  return Date{detail::days_from_civil(y, m, d)};
}

inline std::string format_date(Date date) {
  int y = 0;
  unsigned m = 0, d = 0;
  detail::civil_from_days(date.days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
  return buf;
}

}  // namespace datamech
