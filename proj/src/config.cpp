#include "meandim/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "meandim/csv.hpp"

namespace meandim {

namespace {

double to_double(const std::string& field, std::string_view s) {
  const auto v = parse_double(trim(s));
  if (!v) throw ConfigError(field, "expected a number, got '" + std::string(trim(s)) + "'");
  return *v;
}

std::vector<double> expand_range(const std::string& field, const std::string& v) {
  const bool is_log = v.rfind("log(", 0) == 0;
  const std::size_t open = v.find('(');
  if (v.back() != ')') throw ConfigError(field, "unterminated range '" + v + "'");
  const auto parts = split_csv_line(std::string_view(v).substr(open + 1, v.size() - open - 2));
  if (parts.size() != 3) throw ConfigError(field, "range needs (start, stop, points)");
  const double a = to_double(field, parts[0]);
  const double b = to_double(field, parts[1]);
  const auto n = parse_int(trim(parts[2]));
  if (!n || *n < 1) throw ConfigError(field, "range point count must be a positive integer");
  std::vector<double> out;
  for (long long i = 0; i < *n; ++i) {
    const double t = *n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(*n - 1);
    const double x = a + (b - a) * t;
    out.push_back(is_log ? std::pow(10.0, x) : x);
  }
  return out;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& source) {
  Config c;
  c.source_ = source;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw FormatError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    if (key.empty()) throw FormatError(source + ":" + std::to_string(lineno) + ": empty key");
    if (c.values_.count(key)) throw ConfigError(key, "defined twice (line " + std::to_string(lineno) + ")");
    c.values_[key] = value;
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "missing");
  used_.insert(key);
  return it->second;
}

std::string Config::get_string(const std::string& key) const {
  const std::string& v = raw(key);
  if (v.empty()) throw ConfigError(key, "empty value");
  return v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double Config::get_double(const std::string& key) const { return to_double(key, raw(key)); }

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long Config::get_int(const std::string& key) const {
  const auto v = parse_int(trim(raw(key)));
  if (!v) throw ConfigError(key, "expected an integer, got '" + values_.at(key) + "'");
  return *v;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  const std::string& v = raw(key);
  if (v.empty()) throw ConfigError(key, "list is empty");
  std::vector<double> out;
  if (v.rfind("log(", 0) == 0 || v.rfind("lin(", 0) == 0) {
    out = expand_range(key, v);
  } else {
    for (const auto& part : split_csv_line(v)) {
      if (trim(part).empty()) throw ConfigError(key, "empty list entry");
      out.push_back(to_double(key, part));
    }
  }
  if (out.empty()) throw ConfigError(key, "list is empty");
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? get_double_list(key) : fallback;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (double x : get_double_list(key)) {
    const double r = std::round(x);
    if (std::abs(r - x) > 1e-9 * std::max(1.0, std::abs(x)) || std::abs(r) > 2e9)
      throw ConfigError(key, "expected integers, got " + format_double(x));
    out.push_back(static_cast<int>(r));
  }
  return out;
}

std::vector<int> Config::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
  return has(key) ? get_int_list(key) : fallback;
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

}  // namespace meandim
