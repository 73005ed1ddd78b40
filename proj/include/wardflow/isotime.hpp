#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace wardflow {

// Civil <-> epoch-day conversions (Howard Hinnant's algorithms).
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  int year;
  unsigned month;
  unsigned day;
};

inline CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), m, d};
}

inline std::int64_t utc_epoch(int y, int mo, int d, int h = 0, int mi = 0, int s = 0) {
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

inline int year_of_epoch(std::int64_t t) {
  std::int64_t days = t / 86400;
  if (t < 0 && t % 86400 != 0) --days;
  return civil_from_days(days).year;
}

/// Parses "YYYY-MM-DDTHH:MM:SSZ" (trailing Z optional, space accepted for T).
/// Returns nullopt on any malformation or out-of-range field.
inline std::optional<std::int64_t> parse_iso8601(std::string_view s) {
  auto digits = [&](std::size_t pos, int n) -> std::optional<int> {
    if (pos + n > s.size()) return std::nullopt;
    int v = 0;
    for (int i = 0; i < n; ++i) {
      char c = s[pos + i];
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + (c - '0');
    }
    return v;
  };
  if (s.size() < 19) return std::nullopt;
  auto yy = digits(0, 4), mo = digits(5, 2), dd = digits(8, 2);
  auto hh = digits(11, 2), mi = digits(14, 2), ss = digits(17, 2);
  if (!yy || !mo || !dd || !hh || !mi || !ss) return std::nullopt;
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':')
    return std::nullopt;
  if (s.size() > 19 && !(s.size() == 20 && s[19] == 'Z')) return std::nullopt;
  if (*mo < 1 || *mo > 12 || *dd < 1 || *dd > 31 || *hh > 23 || *mi > 59 || *ss > 60)
    return std::nullopt;
  return utc_epoch(*yy, *mo, *dd, *hh, *mi, *ss);
}

inline std::string format_iso8601(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t sod = t % 86400;
  if (sod < 0) {
    sod += 86400;
    --days;
  }
  CivilDate cd = civil_from_days(days);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", cd.year, cd.month,
                cd.day, static_cast<long long>(sod / 3600),
                static_cast<long long>((sod / 60) % 60), static_cast<long long>(sod % 60));
  return buf;
}

}  // namespace wardflow
