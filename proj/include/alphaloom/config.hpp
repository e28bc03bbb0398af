#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace alphaloom {

// INI-style key-value file with [section] headers and '#'/';' comments.
class IniFile {
 public:
  static IniFile load(const std::string& path);
  static IniFile parse(std::istream& in);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback = "") const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  // Sorted, whitespace-normalized rendering; input for the config hash.
  std::string canonical() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

}  // namespace alphaloom
