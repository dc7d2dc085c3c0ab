#pragma once

// Flat "key = value" configuration files. Physical quantities are written
// with a unit suffix on the key (a_nm = 550, rbw_mhz = 1); the reader
// accepts any suffix of the right dimension and converts to the canonical
// unit. Problems are collected rather than thrown one at a time.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace omkit::cli {

enum class Dim { length, frequency, time, temperature, power, angle };

/// Canonical units: nm, Hz, s, K, W, deg.
const char* canonical_unit(Dim dim);

class KvConfig {
 public:
  static KvConfig parse(std::string_view text, std::string source = "<config>");
  /// Throws FileError when the file is missing or unreadable.
  static KvConfig load(const std::filesystem::path& path);

  std::optional<double> quantity(const std::string& base, Dim dim);
  double quantity(const std::string& base, Dim dim, double fallback);
  std::optional<double> number(const std::string& key);
  double number(const std::string& key, double fallback);
  int integer(const std::string& key, int fallback);
  bool flag(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  void add_problem(const std::string& message) { errors_.push_back(message); }

  /// Parse and type errors, then one entry per key that no reader asked for.
  std::vector<std::string> problems() const;
  const std::string& source() const { return source_; }
  /// Sorted "key=value" lines, for hashing.
  std::string canonical() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
  };
  std::optional<double> parse_number(const std::string& key);

  std::map<std::string, Entry> entries_;
  std::vector<std::string> errors_;
  std::string source_;
};

}  // namespace omkit::cli
