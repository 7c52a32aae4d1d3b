#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meandim/sampler.hpp"
#include "meandim/score.hpp"

namespace meandim {

/// Score backed by a vertex table; inputs are read by sign (x_i < 0 means -1).
class VertexTableScore : public ScoreFunction {
 public:
  explicit VertexTableScore(std::vector<double> table);
  int dim() const override { return n_; }
  void evaluate(const double* x, double* out) const override;
  void evaluate_probes(const double* x, const double* fx, const double* alt, double* out) const override;

 private:
  std::vector<double> table_;
  int n_;
};

struct InfluenceProfile {
  std::vector<double> tau_sq;
  double sigma_sq = 0.0;
  std::optional<double> md;  // empty when sigma_sq is below the variance floor
  std::optional<double> participation_ratio;  // empty when every tau_sq is zero
  std::size_t n_samples = 0;
  double std_err_md = 0.0;
  std::uint64_t seed = 0;

  double total_influence() const;
};

inline constexpr double kVarianceFloor = 1e-12;

struct EstimatorOptions {
  std::size_t batches = 0;  // 0: 100 batches for >= 1e4 samples, else 10
  int threads = 1;
};

/// Resampling estimator: tau_i^2 = E[(f(x) - f(x with x_i redrawn))^2] / 2,
/// probing every coordinate against each background draw.
InfluenceProfile estimate_md(const ScoreFunction& f, const InputSampler& sampler, std::size_t n_samples,
                             std::uint64_t seed, const EstimatorOptions& opt = {});

/// Discrete-derivative estimator on uniform +-1 inputs:
/// tau_i^2 = E[((f(s|s_i=+1) - f(s|s_i=-1)) / 2)^2].
InfluenceProfile estimate_md_binary_fast(const ScoreFunction& f, int n, std::size_t n_samples, std::uint64_t seed,
                                         const EstimatorOptions& opt = {});

/// One profile per output of a multi-output score, all from the same draws.
std::vector<InfluenceProfile> estimate_md_per_output(const ScoreFunction& f, const InputSampler& sampler,
                                                     std::size_t n_samples, std::uint64_t seed,
                                                     const EstimatorOptions& opt = {});

/// Mean of the defined per-output MDs; empty if none is defined.
std::optional<double> mean_md(const std::vector<InfluenceProfile>& profiles);

/// n * sum(tau_sq) / (sum sqrt(tau_sq))^2, in [1, n].
std::optional<double> participation_ratio(const std::vector<double>& tau_sq);

struct Grid {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, height rows of width cells

  double at(int row, int col) const { return values[static_cast<std::size_t>(row * width + col)]; }
};

/// Min-max normalised influences reshaped row-major. A constant nonzero
/// profile maps to all ones; an all-zero profile maps to all zeros.
Grid influence_heatmap(const InfluenceProfile& profile, int width, int height);

void write_profile_csv(const std::string& path, const InfluenceProfile& p);
void write_profile_summary(const std::string& path, const InfluenceProfile& p);
/// Reads the JSON summary written by write_profile_summary (tau_sq is left empty).
InfluenceProfile read_profile_summary(const std::string& path);

}  // namespace meandim
