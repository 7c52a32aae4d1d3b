#include "meandim/robustness.hpp"

#include <cmath>
#include <numeric>

#include "meandim/error.hpp"
#include "meandim/rng.hpp"

namespace meandim {

int RfmClassifier::predict(const double* x) const { return model_.forward(x) >= 0.0 ? 1 : -1; }

std::unique_ptr<Classifier::Cursor> RfmClassifier::cursor(const double* x) const {
  class Incremental : public Cursor {
   public:
    Incremental(const RfmModel& m, const double* x) : m_(m), x_(x, x + m.D()) {
      scale_ = 1.0 / std::sqrt(static_cast<double>(m.D()));
      h_ = m.F().transpose() * Eigen::Map<const Eigen::VectorXd>(x, m.D()) * scale_;
    }
    void negate(int i) override {
      double& xi = x_[static_cast<std::size_t>(i)];
      h_ += m_.F().row(i).transpose() * (-2.0 * xi * scale_);
      xi = -xi;
    }
    int predict() const override {
      double s = 0.0;
      for (Eigen::Index j = 0; j < h_.size(); ++j) s += m_.w()(j) * m_.activation()(h_(j));
      return s >= 0.0 ? 1 : -1;
    }

   private:
    const RfmModel& m_;
    std::vector<double> x_;
    Eigen::VectorXd h_;
    double scale_;
  };
  return std::make_unique<Incremental>(model_, x);
}

RobustnessResult robustness_flip_count(const Classifier& model, const Dataset& test, std::uint64_t seed) {
  if (test.dim() != model.dim()) throw InvalidArgument("test set dimension does not match the classifier");
  const int D = test.dim();
  RobustnessResult res;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::vector<int> order(static_cast<std::size_t>(D));
  Eigen::VectorXd x(D);
  for (int p = 0; p < test.size(); ++p) {
    x = test.X.row(p).transpose();
    const int label = test.y[static_cast<std::size_t>(p)];
    if (model.predict(x.data()) != label) continue;
    ++res.correct_points;
    // Independent stream per point so results do not depend on which points are skipped.
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(p));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    auto cur = model.cursor(x.data());
    int flips = D;
    bool fooled = false;
    for (int t = 0; t < D; ++t) {
      cur->negate(order[static_cast<std::size_t>(t)]);
      if (cur->predict() != label) {
        flips = t + 1;
        fooled = true;
        break;
      }
    }
    if (!fooled) ++res.cap_hits;
    sum += flips;
    sum_sq += static_cast<double>(flips) * flips;
  }
  if (res.correct_points == 0) return res;
  const double n = res.correct_points;
  const double mean = sum / n;
  res.mean_flips = mean;
  if (n > 1) res.std_err = std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) / n);
  return res;
}

}  // namespace meandim
