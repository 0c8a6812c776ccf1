#ifndef IDP_DATES_HPP
#define IDP_DATES_HPP

#include <compare>
#include <string>
#include <string_view>

namespace idp {

// Calendar date stored as a serial day count (days since 1970-01-01).
// Day arithmetic is plain integer arithmetic on the serial.
struct Date {
  int serial = 0;

  static Date from_ymd(int year, int month, int day);
  static Date parse(std::string_view iso);  // "YYYY-MM-DD"

  std::string to_string() const;

  Date operator+(int days) const { return Date{serial + days}; }
  Date operator-(int days) const { return Date{serial - days}; }
  int operator-(Date other) const { return serial - other.serial; }
  Date& operator++() { ++serial; return *this; }
  auto operator<=>(const Date&) const = default;
};

}  // namespace idp

#endif
