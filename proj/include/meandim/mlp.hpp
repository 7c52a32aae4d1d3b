#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "meandim/classifier.hpp"
#include "meandim/score.hpp"

namespace meandim {

/// Two-layer tanh network. outputs == 1 means a single logit for -1/+1 labels;
/// otherwise one logit per class.
struct Mlp {
  Eigen::MatrixXd W1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;  // outputs x hidden
  Eigen::VectorXd b2;

  /// Zero biases, weights drawn from N(0, 1/fan_in).
  static Mlp init(int input_dim, int hidden, int outputs, std::uint64_t seed);

  int input_dim() const { return static_cast<int>(W1.cols()); }
  int hidden() const { return static_cast<int>(W1.rows()); }
  int outputs() const { return static_cast<int>(W2.rows()); }

  /// Logits for every row of X (rows x outputs).
  Eigen::MatrixXd logits(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd logits(const Eigen::VectorXd& x) const;
  /// Labels in dataset convention.
  std::vector<int> predict(const Eigen::MatrixXd& X) const;
};

/// Score adapter: the logit for a binary network, log-softmax per class otherwise.
class MlpScore : public ScoreFunction {
 public:
  explicit MlpScore(const Mlp& net) : net_(net) {}
  int dim() const override { return net_.input_dim(); }
  int outputs() const override { return net_.outputs(); }
  void evaluate(const double* x, double* out) const override;
  void evaluate_probes(const double* x, const double* fx, const double* alt, double* out) const override;

 private:
  const Mlp& net_;
};

class MlpClassifier : public Classifier {
 public:
  explicit MlpClassifier(const Mlp& net) : net_(net) {}
  int dim() const override { return net_.input_dim(); }
  int predict(const double* x) const override;
  std::unique_ptr<Cursor> cursor(const double* x) const override;

 private:
  const Mlp& net_;
};

}  // namespace meandim
