#include "idp/dates.hpp"

#include <cstdio>

#include "idp/errors.hpp"

namespace idp {

namespace {

// Days between 1970-01-01 and y-m-d in the proleptic Gregorian calendar.
long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, int& m, int& d) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long yy = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

Date Date::from_ymd(int year, int month, int day) {
  if (month < 1 || month > 12 || day < 1 || day > 31)
    raise(Errc::invalid_input, "invalid calendar date");
  return Date{static_cast<int>(days_from_civil(year, month, day))};
}

Date Date::parse(std::string_view iso) {
  // YYYY-MM-DD, nothing else.
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
    raise(Errc::malformed_row, "expected ISO date YYYY-MM-DD, got '" + std::string(iso) + "'");
  for (size_t k : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (!is_digit(iso[k]))
      raise(Errc::malformed_row, "expected ISO date YYYY-MM-DD, got '" + std::string(iso) + "'");
  int y = (iso[0] - '0') * 1000 + (iso[1] - '0') * 100 + (iso[2] - '0') * 10 + (iso[3] - '0');
  int m = (iso[5] - '0') * 10 + (iso[6] - '0');
  int d = (iso[8] - '0') * 10 + (iso[9] - '0');
  if (m < 1 || m > 12 || d < 1 || d > 31)
    raise(Errc::malformed_row, "out-of-range calendar date '" + std::string(iso) + "'");
  return Date{static_cast<int>(days_from_civil(y, m, d))};
}

std::string Date::to_string() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

}  // namespace idp
