#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace alphaloom {

// Calendar day as days since 1970-01-01.
using Date = std::int32_t;

Date parse_date(std::string_view iso);  // "YYYY-MM-DD", throws ParseError
std::string format_date(Date d);

struct Quarter {
  int year = 0;
  int q = 0;  // 1..4
  bool operator==(const Quarter&) const = default;
  bool operator<(const Quarter& o) const {
    return year != o.year ? year < o.year : q < o.q;
  }
};

Quarter quarter_of(Date d);
std::string quarter_label(const Quarter& q);

// Next weekday strictly after d (synthetic trading calendars skip weekends).
Date next_weekday(Date d);
bool is_weekday(Date d);

}  // namespace alphaloom
