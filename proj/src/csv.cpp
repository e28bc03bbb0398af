#include "alphaloom/csv.hpp"

#include <charconv>

#include "alphaloom/errors.hpp"

namespace alphaloom {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  // strip trailing CR from files with Windows line endings
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
    out.back().pop_back();
  }
  return out;
}

DelimitedReader::DelimitedReader(std::istream& in, char delim) : in_(in), delim_(delim) {
  std::string line;
  while (std::getline(in_, line)) {
    if (line.empty() || line[0] == '#') continue;  // leading comments/stamps
    header_ = split_line(line, delim_);
    return;
  }
  throw SchemaError("empty input: no header row");
}

int DelimitedReader::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return int(i);
  }
  return -1;
}

bool DelimitedReader::next(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.size() == 1 && line[0] == '\r') continue;
    fields = split_line(line, delim_);
    return true;
  }
  return false;
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace alphaloom
