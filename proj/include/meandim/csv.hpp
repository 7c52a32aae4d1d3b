#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace meandim {

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);
std::string format_double_fixed(double v, int digits);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string> split_csv_line(std::string_view line);

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  CsvWriter& header(const std::vector<std::string>& cols);
  CsvWriter& row(const std::vector<std::string>& cells);
  CsvWriter& row(const std::vector<double>& values);
  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

/// Rows of a comma-separated file; blank lines are skipped.
std::vector<std::vector<std::string>> read_csv_rows(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace meandim
