#pragma once

#include <functional>
#include <vector>

namespace meandim {

/// Black-box predictor R^n -> R^K. Implementations must be safe for
/// concurrent const calls.
class ScoreFunction {
 public:
  virtual ~ScoreFunction() = default;

  virtual int dim() const = 0;
  virtual int outputs() const { return 1; }

  /// Writes outputs() values for input x.
  virtual void evaluate(const double* x, double* out) const = 0;

  /// For every coordinate i, the outputs at x with x[i] replaced by alt[i].
  /// `fx` holds the outputs at x. Row i of `out` (outputs() values) receives
  /// the probe for coordinate i. Override when a cheaper incremental update exists.
  virtual void evaluate_probes(const double* x, const double* fx, const double* alt, double* out) const;

  double operator()(const std::vector<double>& x) const;
};

/// Adapts a plain callable with a single output.
class FunctionScore : public ScoreFunction {
 public:
  FunctionScore(int dim, std::function<double(const double*)> fn) : dim_(dim), fn_(std::move(fn)) {}
  int dim() const override { return dim_; }
  void evaluate(const double* x, double* out) const override { out[0] = fn_(x); }

 private:
  int dim_;
  std::function<double(const double*)> fn_;
};

/// Exposes a single output of a multi-output score.
class OutputSlice : public ScoreFunction {
 public:
  OutputSlice(const ScoreFunction& base, int k);
  int dim() const override { return base_.dim(); }
  void evaluate(const double* x, double* out) const override;
  void evaluate_probes(const double* x, const double* fx, const double* alt, double* out) const override;

 private:
  const ScoreFunction& base_;
  int k_;
};

/// a * f + b.
class AffineScore : public ScoreFunction {
 public:
  AffineScore(const ScoreFunction& base, double scale, double shift) : base_(base), a_(scale), b_(shift) {}
  int dim() const override { return base_.dim(); }
  int outputs() const override { return base_.outputs(); }
  void evaluate(const double* x, double* out) const override;

 private:
  const ScoreFunction& base_;
  double a_;
  double b_;
};

}  // namespace meandim
