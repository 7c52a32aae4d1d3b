#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace meandim {

/// Rows of a sweep: one coordinate value per row, mean (and, with more than one
/// repetition, standard deviation) of each metric over repetitions.
struct SweepResult {
  std::string coordinate;
  std::vector<double> x;
  std::vector<std::string> metrics;
  std::vector<std::vector<double>> mean;  // [metric][row]
  std::optional<std::vector<std::vector<double>>> std;
  int repetitions = 1;

  std::size_t rows() const noexcept { return x.size(); }
  std::size_t metric_index(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;
};

/// samples[row][rep][metric] -> SweepResult. NaN entries are left out of a
/// row's mean and std; a row with no finite entry stays NaN. Std uses n - 1.
SweepResult aggregate_sweep(std::string coordinate, std::vector<double> x, std::vector<std::string> metrics,
                            const std::vector<std::vector<std::vector<double>>>& samples);

/// Header `coordinate,metric...` then `metric_std...` when std is present.
void write_sweep_csv(const std::string& path, const SweepResult& sweep);

struct PeakInfo {
  std::string metric;
  std::size_t index = 0;
  double coordinate = 0.0;
  double value = 0.0;
  bool interior = false;  // false: the maximum sits on the first or last grid point
};

/// Grid argmax ignoring NaN; ties go to the first index.
PeakInfo find_peak(const std::vector<double>& x, const std::vector<double>& values, const std::string& metric);

/// Indices of strict interior local maxima (NaN neighbours never qualify).
std::vector<std::size_t> local_maxima(const std::vector<double>& values);

/// Correlations over rows where both entries are finite; empty with fewer than
/// two such rows or a constant column.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

struct Correlation {
  std::string a;
  std::string b;
  std::optional<double> pearson;
  std::optional<double> spearman;
};

struct PeakReport {
  PeakInfo first;
  PeakInfo second;
  std::size_t grid_distance = 0;
  std::vector<Correlation> correlations;
};

/// Peaks of two metrics (test_err and bmd by default) and correlations for the
/// requested pairs. Needs at least five rows.
PeakReport summarize_peaks(const SweepResult& sweep, const std::string& first = "test_err",
                           const std::string& second = "bmd",
                           const std::vector<std::pair<std::string, std::string>>& pairs = {});

std::string format_peak_report(const PeakReport& report, const std::string& coordinate);

}  // namespace meandim
