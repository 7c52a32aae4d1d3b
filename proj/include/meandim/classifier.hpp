#pragma once

#include <memory>
#include <vector>

namespace meandim {

/// Predicts a label in the dataset's convention (-1/+1 or a class index).
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual int dim() const = 0;
  virtual int predict(const double* x) const = 0;

  /// Tracks the prediction while coordinates of a starting input are negated one at a time.
  class Cursor {
   public:
    virtual ~Cursor() = default;
    virtual void negate(int i) = 0;
    virtual int predict() const = 0;
  };
  /// Default cursor re-evaluates the full input after each negation.
  virtual std::unique_ptr<Cursor> cursor(const double* x) const;
};

}  // namespace meandim
