#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace drqn {

// Civil-calendar arithmetic on UTC epoch milliseconds. No timezone or DST
// handling: source timestamps are UTC and the time features only need a
// consistent clock.

struct CivilDateTime {
  int year;
  unsigned month;   // 1..12
  unsigned day;     // 1..31
  unsigned hour;    // 0..23
  unsigned minute;  // 0..59
  unsigned second;  // 0..59
  unsigned millisecond;
};

constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097LL + static_cast<std::int64_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yy + (m <= 2));
}

constexpr std::int64_t civil_to_epoch_ms(const CivilDateTime& c) {
  const std::int64_t days = days_from_civil(c.year, c.month, c.day);
  return ((days * 24 + c.hour) * 60 + c.minute) * 60000LL + c.second * 1000LL + c.millisecond;
}

inline CivilDateTime civil_from_epoch_ms(std::int64_t ms) {
  std::int64_t days = ms / 86400000LL;
  std::int64_t rem = ms % 86400000LL;
  if (rem < 0) {
    rem += 86400000LL;
    --days;
  }
  CivilDateTime c{};
  civil_from_days(days, c.year, c.month, c.day);
  c.hour = static_cast<unsigned>(rem / 3600000LL);
  c.minute = static_cast<unsigned>((rem / 60000LL) % 60);
  c.second = static_cast<unsigned>((rem / 1000LL) % 60);
  c.millisecond = static_cast<unsigned>(rem % 1000LL);
  return c;
}

inline unsigned minute_of_hour(std::int64_t ms) {
  std::int64_t m = (ms / 60000LL) % 60;
  if (m < 0) m += 60;
  return static_cast<unsigned>(m);
}

inline unsigned hour_of_day(std::int64_t ms) {
  std::int64_t h = (ms / 3600000LL) % 24;
  if (h < 0) h += 24;
  return static_cast<unsigned>(h);
}

// Monday = 0 .. Sunday = 6. Epoch day zero (1970-01-01) was a Thursday.
inline unsigned weekday(std::int64_t ms) {
  std::int64_t days = ms / 86400000LL;
  if (ms % 86400000LL < 0) --days;
  std::int64_t wd = (days + 3) % 7;
  if (wd < 0) wd += 7;
  return static_cast<unsigned>(wd);
}

inline std::string format_timestamp(std::int64_t ms) {
  const CivilDateTime c = civil_from_epoch_ms(ms);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d%02u%02u %02u:%02u:%02u.%03u", c.year, c.month, c.day,
                c.hour, c.minute, c.second, c.millisecond);
  return buf;
}

}  // namespace drqn
