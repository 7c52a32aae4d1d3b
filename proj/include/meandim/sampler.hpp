#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "meandim/rng.hpp"

namespace meandim {

enum class SamplerKind { Binary, Gaussian, Uniform, Empirical };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(const std::string& name);

/// I.i.d. input distribution used to draw backgrounds and resampled coordinates.
class InputSampler {
 public:
  static InputSampler binary(int dim);
  static InputSampler gaussian(int dim);
  static InputSampler uniform(int dim, double lo, double hi);
  /// Backgrounds are whole rows of `rows` (one sample per row); single
  /// coordinates are resampled uniformly from [lo, hi].
  static InputSampler empirical(std::shared_ptr<const Eigen::MatrixXd> rows, double lo, double hi);

  SamplerKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

  void draw(Rng& rng, double* x) const;
  double draw_coordinate(Rng& rng, int i) const;

  double second_moment() const;

 private:
  InputSampler(SamplerKind kind, int dim, double lo, double hi) : kind_(kind), dim_(dim), lo_(lo), hi_(hi) {}

  SamplerKind kind_;
  int dim_;
  double lo_;
  double hi_;
  std::shared_ptr<const Eigen::MatrixXd> rows_;
};

}  // namespace meandim
