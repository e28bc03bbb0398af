#include "alphaloom/config.hpp"

#include <fstream>
#include <sstream>

#include "alphaloom/csv.hpp"
#include "alphaloom/errors.hpp"

namespace alphaloom {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

IniFile IniFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse(in);
}

IniFile IniFile::parse(std::istream& in) {
  IniFile ini;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError("unterminated section header at line " + std::to_string(lineno));
      }
      section = trim(t.substr(1, t.size() - 2));
      ini.sections_[section];
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key = value at line " + std::to_string(lineno) + ": " + t);
    }
    ini.sections_[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return ini;
}

bool IniFile::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string IniFile::get(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  auto d = parse_double(v);
  if (!d) throw ConfigError("config [" + section + "] " + key + ": not a number: " + v);
  return *d;
}

long long IniFile::get_int(const std::string& section, const std::string& key,
                           long long fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  try {
    std::size_t pos = 0;
    long long r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key + ": not an integer: " + v);
  }
}

bool IniFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config [" + section + "] " + key + ": not a boolean: " + v);
}

std::vector<int> IniFile::get_int_list(const std::string& section, const std::string& key) const {
  std::vector<int> out;
  if (!has(section, key)) return out;
  for (const std::string& part : split_line(get(section, key), ',')) {
    const std::string t = trim(part);
    if (t.empty()) continue;
    try {
      out.push_back(std::stoi(t));
    } catch (const std::exception&) {
      throw ConfigError("config [" + section + "] " + key + ": not an integer list entry: " + t);
    }
  }
  return out;
}

void IniFile::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

std::string IniFile::canonical() const {
  std::ostringstream out;
  for (const auto& [sec, kv] : sections_) {
    out << '[' << sec << "]\n";
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  }
  return out.str();
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace alphaloom
