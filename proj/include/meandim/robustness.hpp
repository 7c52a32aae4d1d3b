#pragma once

#include <cstdint>
#include <optional>

#include "meandim/classifier.hpp"
#include "meandim/dataset.hpp"
#include "meandim/rfm.hpp"

namespace meandim {

/// Sign of the RFM output as a -1/+1 label, with incremental negation updates.
class RfmClassifier : public Classifier {
 public:
  explicit RfmClassifier(const RfmModel& model) : model_(model) {}
  int dim() const override { return model_.D(); }
  int predict(const double* x) const override;
  std::unique_ptr<Cursor> cursor(const double* x) const override;

 private:
  const RfmModel& model_;
};

struct RobustnessResult {
  std::optional<double> mean_flips;  // empty when no test point is classified correctly
  double std_err = 0.0;
  int correct_points = 0;
  int cap_hits = 0;  // points whose prediction survived all D negations
};

/// For each correctly classified point, negates coordinates in a uniformly
/// random order until the prediction changes; a point that never changes
/// counts D flips.
RobustnessResult robustness_flip_count(const Classifier& model, const Dataset& test, std::uint64_t seed);

}  // namespace meandim
