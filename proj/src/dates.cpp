#include "alphaloom/dates.hpp"

#include <charconv>
#include <chrono>

#include "alphaloom/errors.hpp"

namespace alphaloom {

namespace {

int parse_int_field(std::string_view s, std::string_view what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ParseError("bad date " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

Date parse_date(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw ParseError("date not in YYYY-MM-DD form: '" + std::string(iso) + "'");
  }
  const int y = parse_int_field(iso.substr(0, 4), "year");
  const int m = parse_int_field(iso.substr(5, 2), "month");
  const int d = parse_int_field(iso.substr(8, 2), "day");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) {
    throw ParseError("invalid calendar day: '" + std::string(iso) + "'");
  }
  return static_cast<Date>(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{d}}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

Quarter quarter_of(Date d) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{d}}};
  return Quarter{int(ymd.year()), (int(unsigned(ymd.month())) - 1) / 3 + 1};
}

std::string quarter_label(const Quarter& q) {
  return std::to_string(q.year) + "Q" + std::to_string(q.q);
}

bool is_weekday(Date d) {
  const std::chrono::weekday wd{std::chrono::sys_days{std::chrono::days{d}}};
  return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

Date next_weekday(Date d) {
  Date n = d + 1;
  while (!is_weekday(n)) ++n;
  return n;
}

}  // namespace alphaloom
