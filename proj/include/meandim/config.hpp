#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "meandim/error.hpp"

namespace meandim {

/// Configuration error tied to one field.
class ConfigError : public FormatError {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : FormatError("config field '" + field + "': " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Flat `key = value` file, one key per line, `#` starts a comment.
///
/// List values are comma separated. `log(a, b, n)` expands to n points from
/// 10^a to 10^b and `lin(a, b, n)` to n evenly spaced points.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  /// Keys never read through a getter.
  std::vector<std::string> unused_keys() const;
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }
  const std::string& source() const noexcept { return source_; }

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string source_;
};

}  // namespace meandim
