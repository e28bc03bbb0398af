#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace alphaloom {

// Minimal delimited-text reader: header row, no quoting, no embedded delimiters.
class DelimitedReader {
 public:
  DelimitedReader(std::istream& in, char delim = ',');

  const std::vector<std::string>& header() const { return header_; }
  // Column index, -1 if absent.
  int column(const std::string& name) const;

  // Next data row; empty lines and lines starting with '#' are skipped.
  bool next(std::vector<std::string>& fields);

 private:
  std::istream& in_;
  char delim_;
  std::vector<std::string> header_;
};

std::vector<std::string> split_line(const std::string& line, char delim);

std::string format_double(double v);  // shortest round-trip
std::optional<double> parse_double(const std::string& s);

}  // namespace alphaloom
