#include "meandim/mlp.hpp"

#include <cmath>

#include "meandim/error.hpp"
#include "meandim/rng.hpp"

namespace meandim {

std::unique_ptr<Classifier::Cursor> Classifier::cursor(const double* x) const {
  class Recompute : public Cursor {
   public:
    Recompute(const Classifier& c, const double* x) : c_(c), x_(x, x + c.dim()) {}
    void negate(int i) override { x_[static_cast<std::size_t>(i)] = -x_[static_cast<std::size_t>(i)]; }
    int predict() const override { return c_.predict(x_.data()); }

   private:
    const Classifier& c_;
    std::vector<double> x_;
  };
  return std::make_unique<Recompute>(*this, x);
}

Mlp Mlp::init(int input_dim, int hidden, int outputs, std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1 || outputs < 1) throw InvalidArgument("MLP sizes must be positive");
  Rng rng = make_rng(seed, 0x1417);
  Mlp m;
  m.W1.resize(hidden, input_dim);
  m.W2.resize(outputs, hidden);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int j = 0; j < input_dim; ++j)
    for (int i = 0; i < hidden; ++i) m.W1(i, j) = s1 * standard_normal(rng);
  for (int j = 0; j < hidden; ++j)
    for (int i = 0; i < outputs; ++i) m.W2(i, j) = s2 * standard_normal(rng);
  m.b1 = Eigen::VectorXd::Zero(hidden);
  m.b2 = Eigen::VectorXd::Zero(outputs);
  return m;
}

Eigen::MatrixXd Mlp::logits(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim()) throw InvalidArgument("MLP input has the wrong dimension");
  Eigen::MatrixXd A = (X * W1.transpose()).rowwise() + b1.transpose();
  A = A.array().tanh().matrix();
  return (A * W2.transpose()).rowwise() + b2.transpose();
}

Eigen::VectorXd Mlp::logits(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw InvalidArgument("MLP input has the wrong dimension");
  const Eigen::VectorXd h = (W1 * x + b1).array().tanh().matrix();
  return W2 * h + b2;
}

namespace {

int label_from_logits(const double* z, int K) {
  if (K == 1) return z[0] >= 0.0 ? 1 : -1;
  int best = 0;
  for (int k = 1; k < K; ++k)
    if (z[k] > z[best]) best = k;
  return best;
}

void to_scores(double* z, int K) {
  if (K == 1) return;
  double mx = z[0];
  for (int k = 1; k < K; ++k) mx = std::max(mx, z[k]);
  double s = 0.0;
  for (int k = 0; k < K; ++k) s += std::exp(z[k] - mx);
  const double lse = mx + std::log(s);
  for (int k = 0; k < K; ++k) z[k] -= lse;
}

}  // namespace

std::vector<int> Mlp::predict(const Eigen::MatrixXd& X) const {
  const Eigen::MatrixXd Z = logits(X);
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const Eigen::RowVectorXd z = Z.row(r);
    out[static_cast<std::size_t>(r)] = label_from_logits(z.data(), outputs());
  }
  return out;
}

void MlpScore::evaluate(const double* x, double* out) const {
  const Eigen::VectorXd z = net_.logits(Eigen::Map<const Eigen::VectorXd>(x, net_.input_dim()).eval());
  for (int k = 0; k < net_.outputs(); ++k) out[k] = z(k);
  to_scores(out, net_.outputs());
}

void MlpScore::evaluate_probes(const double* x, const double*, const double* alt, double* out) const {
  const int D = net_.input_dim();
  const int K = net_.outputs();
  const Eigen::Map<const Eigen::VectorXd> xv(x, D);
  const Eigen::VectorXd a = net_.W1 * xv + net_.b1;
  Eigen::VectorXd h(a.size());
  Eigen::VectorXd z(K);
  for (int i = 0; i < D; ++i) {
    const double delta = alt[i] - x[i];
    h = (a + net_.W1.col(i) * delta).array().tanh().matrix();
    z.noalias() = net_.W2 * h;
    z += net_.b2;
    double* row = out + static_cast<std::ptrdiff_t>(i) * K;
    for (int k = 0; k < K; ++k) row[k] = z(k);
    to_scores(row, K);
  }
}

int MlpClassifier::predict(const double* x) const {
  const Eigen::VectorXd z = net_.logits(Eigen::Map<const Eigen::VectorXd>(x, net_.input_dim()).eval());
  return label_from_logits(z.data(), net_.outputs());
}

std::unique_ptr<Classifier::Cursor> MlpClassifier::cursor(const double* x) const {
  class Incremental : public Cursor {
   public:
    Incremental(const Mlp& net, const double* x) : net_(net), x_(x, x + net.input_dim()) {
      a_ = net.W1 * Eigen::Map<const Eigen::VectorXd>(x, net.input_dim()) + net.b1;
    }
    void negate(int i) override {
      double& xi = x_[static_cast<std::size_t>(i)];
      a_ += net_.W1.col(i) * (-2.0 * xi);
      xi = -xi;
    }
    int predict() const override {
      const Eigen::VectorXd z = net_.W2 * a_.array().tanh().matrix() + net_.b2;
      return label_from_logits(z.data(), net_.outputs());
    }

   private:
    const Mlp& net_;
    std::vector<double> x_;
    Eigen::VectorXd a_;
  };
  return std::make_unique<Incremental>(net_, x);
}

}  // namespace meandim
