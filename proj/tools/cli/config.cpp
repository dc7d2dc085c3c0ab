#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "cli.hpp"

namespace omkit::cli {

namespace {

struct Unit {
  const char* suffix;
  double scale;  // to the canonical unit
};

const std::vector<Unit>& units(Dim dim) {
  static const std::vector<Unit> length{{"nm", 1.0}, {"um", 1e3}, {"mm", 1e6}, {"m", 1e9}};
  static const std::vector<Unit> frequency{{"hz", 1.0}, {"khz", 1e3}, {"mhz", 1e6}, {"ghz", 1e9}, {"thz", 1e12}};
  static const std::vector<Unit> time{{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}};
  static const std::vector<Unit> temperature{{"k", 1.0}};
  static const std::vector<Unit> power{{"w", 1.0}, {"mw", 1e-3}, {"uw", 1e-6}, {"nw", 1e-9}};
  static const std::vector<Unit> angle{{"deg", 1.0}, {"rad", 180.0 / 3.14159265358979323846}};
  switch (dim) {
    case Dim::length: return length;
    case Dim::frequency: return frequency;
    case Dim::time: return time;
    case Dim::temperature: return temperature;
    case Dim::power: return power;
    case Dim::angle: return angle;
  }
  return length;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

}  // namespace

const char* canonical_unit(Dim dim) { return units(dim).front().suffix; }

KvConfig KvConfig::parse(std::string_view text, std::string source) {
  KvConfig cfg;
  cfg.source_ = std::move(source);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      cfg.errors_.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) {
      cfg.errors_.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (cfg.entries_.count(key)) {
      cfg.errors_.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      continue;
    }
    cfg.entries_[key] = {value, lineno, false};
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<double> KvConfig::parse_number(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  it->second.used = true;
  const std::string& v = it->second.value;
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    errors_.push_back(key + ": expected a number, got '" + v + "'");
    return std::nullopt;
  }
  return out;
}

std::optional<double> KvConfig::quantity(const std::string& base, Dim dim) {
  std::optional<double> found;
  std::string found_key;
  for (const auto& u : units(dim)) {
    const std::string key = base + "_" + u.suffix;
    if (!entries_.count(key)) continue;
    const auto v = parse_number(key);
    if (found_key.empty()) {
      found_key = key;
      if (v) found = *v * u.scale;
    } else {
      errors_.push_back(base + ": given twice (" + found_key + " and " + key + ")");
    }
  }
  if (entries_.count(base)) {
    entries_[base].used = true;
    errors_.push_back(base + ": missing unit suffix (use " + base + "_" + canonical_unit(dim) + ")");
  }
  return found;
}

double KvConfig::quantity(const std::string& base, Dim dim, double fallback) {
  return quantity(base, dim).value_or(fallback);
}

std::optional<double> KvConfig::number(const std::string& key) { return parse_number(key); }

double KvConfig::number(const std::string& key, double fallback) { return parse_number(key).value_or(fallback); }

int KvConfig::integer(const std::string& key, int fallback) {
  const auto v = parse_number(key);
  if (!v) return fallback;
  if (*v != std::floor(*v) || std::abs(*v) > 1e9) {
    errors_.push_back(key + ": expected an integer");
    return fallback;
  }
  return static_cast<int>(*v);
}

bool KvConfig::flag(const std::string& key, bool fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  const std::string& v = it->second.value;
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  errors_.push_back(key + ": expected true or false, got '" + v + "'");
  return fallback;
}

std::string KvConfig::text(const std::string& key, const std::string& fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  return it->second.value;
}

std::vector<std::string> KvConfig::problems() const {
  std::vector<std::string> out = errors_;
  for (const auto& [key, e] : entries_)
    if (!e.used) out.push_back("line " + std::to_string(e.line) + ": unknown key '" + key + "'");
  return out;
}

std::string KvConfig::canonical() const {
  std::string out;
  for (const auto& [key, e] : entries_) out += key + "=" + e.value + "\n";
  return out;
}

}  // namespace omkit::cli
