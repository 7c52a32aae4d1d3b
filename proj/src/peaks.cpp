#include "meandim/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "meandim/csv.hpp"
#include "meandim/error.hpp"

namespace meandim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

void finite_pairs(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& x,
                  std::vector<double>& y) {
  if (a.size() != b.size()) throw InvalidArgument("correlation columns differ in length");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isfinite(a[i]) && std::isfinite(b[i])) {
      x.push_back(a[i]);
      y.push_back(b[i]);
    }
  }
}

std::optional<double> pearson_finite(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

std::size_t SweepResult::metric_index(const std::string& name) const {
  const auto it = std::find(metrics.begin(), metrics.end(), name);
  if (it == metrics.end()) throw InvalidArgument("sweep has no metric '" + name + "'");
  return static_cast<std::size_t>(it - metrics.begin());
}

const std::vector<double>& SweepResult::column(const std::string& name) const { return mean[metric_index(name)]; }

SweepResult aggregate_sweep(std::string coordinate, std::vector<double> x, std::vector<std::string> metrics,
                            const std::vector<std::vector<std::vector<double>>>& samples) {
  if (samples.size() != x.size()) throw InvalidArgument("one sample block per grid point is required");
  SweepResult s;
  s.coordinate = std::move(coordinate);
  s.x = std::move(x);
  s.metrics = std::move(metrics);
  const std::size_t m = s.metrics.size();
  s.repetitions = samples.empty() ? 1 : static_cast<int>(samples.front().size());
  if (s.repetitions < 1) throw InvalidArgument("repetitions must be at least 1");
  s.mean.assign(m, std::vector<double>(s.x.size(), kNaN));
  if (s.repetitions > 1) s.std.emplace(m, std::vector<double>(s.x.size(), kNaN));
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (static_cast<int>(samples[r].size()) != s.repetitions)
      throw InvalidArgument("every grid point needs the same number of repetitions");
    for (std::size_t k = 0; k < m; ++k) {
      double sum = 0.0;
      int n = 0;
      for (const auto& rep : samples[r]) {
        if (rep.size() != m) throw InvalidArgument("metric count mismatch in sweep samples");
        if (std::isfinite(rep[k])) {
          sum += rep[k];
          ++n;
        }
      }
      if (n == 0) continue;
      const double mu = sum / n;
      s.mean[k][r] = mu;
      if (s.std) {
        double ss = 0.0;
        for (const auto& rep : samples[r])
          if (std::isfinite(rep[k])) ss += (rep[k] - mu) * (rep[k] - mu);
        (*s.std)[k][r] = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
      }
    }
  }
  return s;
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  CsvWriter w(path);
  std::vector<std::string> head{sweep.coordinate};
  head.insert(head.end(), sweep.metrics.begin(), sweep.metrics.end());
  if (sweep.std)
    for (const auto& m : sweep.metrics) head.push_back(m + "_std");
  w.header(head);
  for (std::size_t r = 0; r < sweep.rows(); ++r) {
    std::vector<double> row{sweep.x[r]};
    for (const auto& col : sweep.mean) row.push_back(col[r]);
    if (sweep.std)
      for (const auto& col : *sweep.std) row.push_back(col[r]);
    w.row(row);
  }
  w.close();
}

PeakInfo find_peak(const std::vector<double>& x, const std::vector<double>& values, const std::string& metric) {
  if (x.size() != values.size()) throw InvalidArgument("peak search: coordinate and value columns differ in length");
  PeakInfo p;
  p.metric = metric;
  bool found = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    if (!found || values[i] > p.value) {
      p.index = i;
      p.value = values[i];
      found = true;
    }
  }
  if (!found) throw NumericalError("column '" + metric + "' has no finite value");
  p.coordinate = x[p.index];
  p.interior = p.index > 0 && p.index + 1 < values.size();
  return p;
}

std::vector<std::size_t> local_maxima(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i)
    if (std::isfinite(v[i]) && std::isfinite(v[i - 1]) && std::isfinite(v[i + 1]) && v[i] > v[i - 1] &&
        v[i] > v[i + 1])
      out.push_back(i);
  return out;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> x;
  std::vector<double> y;
  finite_pairs(a, b, x, y);
  return pearson_finite(x, y);
}

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> x;
  std::vector<double> y;
  finite_pairs(a, b, x, y);
  return pearson_finite(ranks(x), ranks(y));
}

PeakReport summarize_peaks(const SweepResult& sweep, const std::string& first, const std::string& second,
                           const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (sweep.rows() < 5) throw InvalidArgument("peak summary needs at least 5 grid points");
  PeakReport r;
  r.first = find_peak(sweep.x, sweep.column(first), first);
  r.second = find_peak(sweep.x, sweep.column(second), second);
  r.grid_distance = r.first.index > r.second.index ? r.first.index - r.second.index : r.second.index - r.first.index;
  for (const auto& [a, b] : pairs) {
    Correlation c{a, b, pearson(sweep.column(a), sweep.column(b)), spearman(sweep.column(a), sweep.column(b))};
    r.correlations.push_back(c);
  }
  return r;
}

std::string format_peak_report(const PeakReport& r, const std::string& coordinate) {
  std::ostringstream os;
  for (const PeakInfo* p : {&r.first, &r.second}) {
    os << "peak " << p->metric << ": " << coordinate << " = " << format_double(p->coordinate) << " (grid index "
       << p->index << ", value " << format_double(p->value) << ")";
    if (!p->interior) os << " [no interior peak]";
    os << "\n";
  }
  os << "peak grid distance " << r.first.metric << " vs " << r.second.metric << ": " << r.grid_distance << "\n";
  for (const auto& c : r.correlations) {
    os << "corr(" << c.a << ", " << c.b << "): pearson "
       << (c.pearson ? format_double_fixed(*c.pearson, 4) : std::string("undefined")) << ", spearman "
       << (c.spearman ? format_double_fixed(*c.spearman, 4) : std::string("undefined")) << "\n";
  }
  return os.str();
}

}  // namespace meandim
