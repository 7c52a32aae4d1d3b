#include "meandim/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "meandim/boolfn.hpp"
#include "meandim/csv.hpp"
#include "meandim/error.hpp"
#include "meandim/parallel.hpp"
#include "meandim/rng.hpp"

namespace meandim {

void ScoreFunction::evaluate_probes(const double* x, const double*, const double* alt, double* out) const {
  const int n = dim();
  const int k = outputs();
  std::vector<double> buf(x, x + n);
  for (int i = 0; i < n; ++i) {
    buf[static_cast<std::size_t>(i)] = alt[i];
    evaluate(buf.data(), out + static_cast<std::ptrdiff_t>(i) * k);
    buf[static_cast<std::size_t>(i)] = x[i];
  }
}

double ScoreFunction::operator()(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != dim()) throw InvalidArgument("score input has the wrong dimension");
  std::vector<double> out(static_cast<std::size_t>(outputs()));
  evaluate(x.data(), out.data());
  return out[0];
}

OutputSlice::OutputSlice(const ScoreFunction& base, int k) : base_(base), k_(k) {
  if (k < 0 || k >= base.outputs()) throw InvalidArgument("output index out of range");
}

void OutputSlice::evaluate(const double* x, double* out) const {
  std::vector<double> all(static_cast<std::size_t>(base_.outputs()));
  base_.evaluate(x, all.data());
  out[0] = all[static_cast<std::size_t>(k_)];
}

void OutputSlice::evaluate_probes(const double* x, const double*, const double* alt, double* out) const {
  const int n = base_.dim();
  const int K = base_.outputs();
  std::vector<double> fx(static_cast<std::size_t>(K));
  base_.evaluate(x, fx.data());
  std::vector<double> all(static_cast<std::size_t>(n) * static_cast<std::size_t>(K));
  base_.evaluate_probes(x, fx.data(), alt, all.data());
  for (int i = 0; i < n; ++i) out[i] = all[static_cast<std::size_t>(i * K + k_)];
}

void AffineScore::evaluate(const double* x, double* out) const {
  base_.evaluate(x, out);
  for (int k = 0; k < base_.outputs(); ++k) out[k] = a_ * out[k] + b_;
}

VertexTableScore::VertexTableScore(std::vector<double> table) : table_(std::move(table)), n_(table_dimension(table_.size())) {}

void VertexTableScore::evaluate(const double* x, double* out) const {
  std::uint64_t m = 0;
  for (int i = 0; i < n_; ++i)
    if (x[i] < 0.0) m |= std::uint64_t{1} << i;
  out[0] = table_[m];
}

void VertexTableScore::evaluate_probes(const double* x, const double*, const double* alt, double* out) const {
  std::uint64_t m = 0;
  for (int i = 0; i < n_; ++i)
    if (x[i] < 0.0) m |= std::uint64_t{1} << i;
  for (int i = 0; i < n_; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    out[i] = table_[alt[i] < 0.0 ? (m | bit) : (m & ~bit)];
  }
}

double InfluenceProfile::total_influence() const {
  double s = 0.0;
  for (double t : tau_sq) s += t;
  return s;
}

std::optional<double> participation_ratio(const std::vector<double>& tau_sq) {
  double s2 = 0.0;
  double s1 = 0.0;
  for (double t : tau_sq) {
    s2 += t;
    s1 += std::sqrt(std::max(t, 0.0));
  }
  if (!(s1 > 0.0)) return std::nullopt;
  return static_cast<double>(tau_sq.size()) * s2 / (s1 * s1);
}

namespace {

enum class ProbeMode { Resample, Flip };

struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    count += 1.0;
    const double d = v - mean;
    mean += d / count;
    m2 += d * (v - mean);
  }
  void merge(const Moments& o) {
    if (o.count == 0.0) return;
    const double n = count + o.count;
    const double d = o.mean - mean;
    mean += d * o.count / n;
    m2 += o.m2 + d * d * count * o.count / n;
    count = n;
  }
  double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
};

struct BatchAccum {
  std::vector<Moments> value;   // per output
  std::vector<double> sum_d2;   // output-major: k * n + i
};

struct RunSpec {
  const ScoreFunction* f;
  const InputSampler* sampler;  // null in flip mode
  int n;
  ProbeMode mode;
};

[[noreturn]] void non_finite(std::size_t sample, int coord, int output) {
  std::string msg = "score returned a non-finite value at Monte Carlo sample " + std::to_string(sample);
  if (coord >= 0) msg += " (probe of coordinate " + std::to_string(coord) + ")";
  msg += ", output " + std::to_string(output);
  throw NumericalError(msg);
}

BatchAccum run_batch(const RunSpec& spec, std::size_t first_sample, std::size_t count, Rng rng) {
  const int n = spec.n;
  const int K = spec.f->outputs();
  BatchAccum acc;
  acc.value.assign(static_cast<std::size_t>(K), Moments{});
  acc.sum_d2.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(K), 0.0);
  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<double> alt(static_cast<std::size_t>(n));
  std::vector<double> fx(static_cast<std::size_t>(K));
  std::vector<double> probes(static_cast<std::size_t>(n) * static_cast<std::size_t>(K));

  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t sample = first_sample + s;
    if (spec.mode == ProbeMode::Flip) {
      for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = random_sign(rng);
      for (int i = 0; i < n; ++i) alt[static_cast<std::size_t>(i)] = -x[static_cast<std::size_t>(i)];
    } else {
      spec.sampler->draw(rng, x.data());
      for (int i = 0; i < n; ++i) alt[static_cast<std::size_t>(i)] = spec.sampler->draw_coordinate(rng, i);
    }
    spec.f->evaluate(x.data(), fx.data());
    for (int k = 0; k < K; ++k)
      if (!std::isfinite(fx[static_cast<std::size_t>(k)])) non_finite(sample, -1, k);
    spec.f->evaluate_probes(x.data(), fx.data(), alt.data(), probes.data());
    for (int k = 0; k < K; ++k) {
      const double base = fx[static_cast<std::size_t>(k)];
      acc.value[static_cast<std::size_t>(k)].add(base);
      double* row = acc.sum_d2.data() + static_cast<std::ptrdiff_t>(k) * n;
      for (int i = 0; i < n; ++i) {
        const double p = probes[static_cast<std::size_t>(i * K + k)];
        if (!std::isfinite(p)) non_finite(sample, i, k);
        const double d = base - p;
        row[i] += d * d;
      }
    }
  }
  return acc;
}

std::size_t default_batches(std::size_t n_samples) { return n_samples >= 10000 ? 100 : 10; }

std::vector<InfluenceProfile> run_estimator(const RunSpec& spec, std::size_t n_samples, std::uint64_t seed,
                                            const EstimatorOptions& opt) {
  if (n_samples < 100) throw InvalidArgument("Monte Carlo estimate needs at least 100 samples");
  if (spec.f->dim() != spec.n)
    throw InvalidArgument("sampler dimension " + std::to_string(spec.n) + " does not match score dimension " +
                          std::to_string(spec.f->dim()));
  const std::size_t B = std::min(opt.batches ? opt.batches : default_batches(n_samples), n_samples);
  if (B < 2) throw InvalidArgument("at least two batches are needed for a standard error");
  const int n = spec.n;
  const int K = spec.f->outputs();
  // Half the squared resampling difference, or a quarter of the squared flip difference.
  const double factor = spec.mode == ProbeMode::Resample ? 0.5 : 0.25;

  std::vector<BatchAccum> batches(B);
  const std::size_t per = n_samples / B;
  const std::size_t rem = n_samples % B;
  parallel_for(B, opt.threads, [&](std::size_t b) {
    const std::size_t count = per + (b < rem ? 1 : 0);
    const std::size_t first = b * per + std::min(b, rem);
    batches[b] = run_batch(spec, first, count, make_rng(seed, b));
  });

  std::vector<InfluenceProfile> out(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    InfluenceProfile& p = out[static_cast<std::size_t>(k)];
    p.tau_sq.assign(static_cast<std::size_t>(n), 0.0);
    Moments total;
    std::vector<double> batch_md;
    for (const auto& acc : batches) {
      const Moments& m = acc.value[static_cast<std::size_t>(k)];
      const double* row = acc.sum_d2.data() + static_cast<std::ptrdiff_t>(k) * n;
      double tau_b = 0.0;
      for (int i = 0; i < n; ++i) {
        p.tau_sq[static_cast<std::size_t>(i)] += row[i];
        tau_b += row[i];
      }
      const double var_b = m.variance();
      if (var_b >= kVarianceFloor) batch_md.push_back(factor * tau_b / m.count / var_b);
      total.merge(m);
    }
    for (double& t : p.tau_sq) t *= factor / static_cast<double>(n_samples);
    p.sigma_sq = total.variance();
    p.n_samples = n_samples;
    p.seed = seed;
    p.participation_ratio = participation_ratio(p.tau_sq);
    if (p.sigma_sq >= kVarianceFloor) {
      p.md = p.total_influence() / p.sigma_sq;
      if (batch_md.size() >= 2) {
        double mean = 0.0;
        for (double v : batch_md) mean += v;
        mean /= static_cast<double>(batch_md.size());
        double ss = 0.0;
        for (double v : batch_md) ss += (v - mean) * (v - mean);
        const double nb = static_cast<double>(batch_md.size());
        p.std_err_md = std::sqrt(ss / (nb - 1.0) / nb);
      }
    }
  }
  return out;
}

}  // namespace

InfluenceProfile estimate_md(const ScoreFunction& f, const InputSampler& sampler, std::size_t n_samples,
                             std::uint64_t seed, const EstimatorOptions& opt) {
  if (f.outputs() != 1) throw InvalidArgument("estimate_md needs a single-output score; use estimate_md_per_output");
  return run_estimator({&f, &sampler, sampler.dim(), ProbeMode::Resample}, n_samples, seed, opt).front();
}

InfluenceProfile estimate_md_binary_fast(const ScoreFunction& f, int n, std::size_t n_samples, std::uint64_t seed,
                                         const EstimatorOptions& opt) {
  if (f.outputs() != 1) throw InvalidArgument("estimate_md_binary_fast needs a single-output score");
  return run_estimator({&f, nullptr, n, ProbeMode::Flip}, n_samples, seed, opt).front();
}

std::vector<InfluenceProfile> estimate_md_per_output(const ScoreFunction& f, const InputSampler& sampler,
                                                     std::size_t n_samples, std::uint64_t seed,
                                                     const EstimatorOptions& opt) {
  return run_estimator({&f, &sampler, sampler.dim(), ProbeMode::Resample}, n_samples, seed, opt);
}

std::optional<double> mean_md(const std::vector<InfluenceProfile>& profiles) {
  double s = 0.0;
  int count = 0;
  for (const auto& p : profiles)
    if (p.md) {
      s += *p.md;
      ++count;
    }
  if (count == 0) return std::nullopt;
  return s / count;
}

Grid influence_heatmap(const InfluenceProfile& profile, int width, int height) {
  if (width < 1 || height < 1 || static_cast<std::size_t>(width) * static_cast<std::size_t>(height) != profile.tau_sq.size())
    throw InvalidArgument("heatmap shape " + std::to_string(width) + "x" + std::to_string(height) +
                          " does not match " + std::to_string(profile.tau_sq.size()) + " influences");
  Grid g{width, height, profile.tau_sq};
  const auto [lo_it, hi_it] = std::minmax_element(g.values.begin(), g.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  for (double& v : g.values) {
    if (hi > lo)
      v = (v - lo) / (hi - lo);
    else
      v = hi > 0.0 ? 1.0 : 0.0;
  }
  return g;
}

void write_profile_csv(const std::string& path, const InfluenceProfile& p) {
  CsvWriter w(path);
  w.header({"i", "tau_sq"});
  for (std::size_t i = 0; i < p.tau_sq.size(); ++i) w.row({std::to_string(i), format_double(p.tau_sq[i])});
  w.close();
}

void write_profile_summary(const std::string& path, const InfluenceProfile& p) {
  nlohmann::ordered_json j;
  j["md"] = p.md ? nlohmann::ordered_json(*p.md) : nlohmann::ordered_json(nullptr);
  j["sigma_sq"] = p.sigma_sq;
  j["participation_ratio"] =
      p.participation_ratio ? nlohmann::ordered_json(*p.participation_ratio) : nlohmann::ordered_json(nullptr);
  j["std_err_md"] = p.std_err_md;
  j["n_samples"] = p.n_samples;
  j["seed"] = p.seed;
  write_text_file(path, j.dump(2) + "\n");
}

InfluenceProfile read_profile_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  InfluenceProfile p;
  if (!j["md"].is_null()) p.md = j["md"].get<double>();
  p.sigma_sq = j.at("sigma_sq").get<double>();
  if (!j["participation_ratio"].is_null()) p.participation_ratio = j["participation_ratio"].get<double>();
  p.std_err_md = j.at("std_err_md").get<double>();
  p.n_samples = j.at("n_samples").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace meandim
