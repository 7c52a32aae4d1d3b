#include "meandim/sampler.hpp"

#include "meandim/error.hpp"

namespace meandim {

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Binary: return "binary";
    case SamplerKind::Gaussian: return "gaussian";
    case SamplerKind::Uniform: return "uniform";
    case SamplerKind::Empirical: return "empirical";
  }
  return "?";
}

SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "binary") return SamplerKind::Binary;
  if (name == "gaussian") return SamplerKind::Gaussian;
  if (name == "uniform") return SamplerKind::Uniform;
  if (name == "empirical") return SamplerKind::Empirical;
  throw InvalidArgument("unknown sampler '" + name + "' (expected binary, gaussian, uniform or empirical)");
}

InputSampler InputSampler::binary(int dim) {
  if (dim < 1) throw InvalidArgument("sampler dimension must be positive");
  return InputSampler(SamplerKind::Binary, dim, -1.0, 1.0);
}

InputSampler InputSampler::gaussian(int dim) {
  if (dim < 1) throw InvalidArgument("sampler dimension must be positive");
  return InputSampler(SamplerKind::Gaussian, dim, 0.0, 0.0);
}

InputSampler InputSampler::uniform(int dim, double lo, double hi) {
  if (dim < 1) throw InvalidArgument("sampler dimension must be positive");
  if (!(lo < hi)) throw InvalidArgument("uniform sampler needs lo < hi");
  return InputSampler(SamplerKind::Uniform, dim, lo, hi);
}

InputSampler InputSampler::empirical(std::shared_ptr<const Eigen::MatrixXd> rows, double lo, double hi) {
  if (!rows || rows->rows() == 0 || rows->cols() == 0) throw InvalidArgument("empirical sampler needs a non-empty dataset");
  if (!(lo < hi)) throw InvalidArgument("empirical sampler needs lo < hi");
  InputSampler s(SamplerKind::Empirical, static_cast<int>(rows->cols()), lo, hi);
  s.rows_ = std::move(rows);
  return s;
}

void InputSampler::draw(Rng& rng, double* x) const {
  switch (kind_) {
    case SamplerKind::Binary:
      for (int i = 0; i < dim_; ++i) x[i] = random_sign(rng);
      break;
    case SamplerKind::Gaussian:
      for (int i = 0; i < dim_; ++i) x[i] = standard_normal(rng);
      break;
    case SamplerKind::Uniform:
      for (int i = 0; i < dim_; ++i) x[i] = meandim::uniform(rng, lo_, hi_);
      break;
    case SamplerKind::Empirical: {
      const auto r = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(rows_->rows())));
      for (int i = 0; i < dim_; ++i) x[i] = (*rows_)(r, i);
      break;
    }
  }
}

double InputSampler::draw_coordinate(Rng& rng, int) const {
  switch (kind_) {
    case SamplerKind::Binary: return random_sign(rng);
    case SamplerKind::Gaussian: return standard_normal(rng);
    case SamplerKind::Uniform:
    case SamplerKind::Empirical: return meandim::uniform(rng, lo_, hi_);
  }
  return 0.0;
}

double InputSampler::second_moment() const {
  switch (kind_) {
    case SamplerKind::Binary:
    case SamplerKind::Gaussian: return 1.0;
    case SamplerKind::Uniform:
    case SamplerKind::Empirical: return (lo_ * lo_ + lo_ * hi_ + hi_ * hi_) / 3.0;
  }
  return 0.0;
}

}  // namespace meandim
