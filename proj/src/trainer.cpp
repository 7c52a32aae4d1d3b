#include "meandim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "meandim/csv.hpp"
#include "meandim/error.hpp"
#include "meandim/rng.hpp"

namespace meandim {

std::string to_string(LossKind k) { return k == LossKind::Mse ? "mse" : "ce"; }

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::ClosedFormRidge: return "closed-form-ridge";
    case OptimizerKind::FullBatchGd: return "full-batch-gd";
    case OptimizerKind::MinibatchGd: return "minibatch-gd";
    case OptimizerKind::Adam: return "adam";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "mse") return LossKind::Mse;
  if (s == "ce") return LossKind::Ce;
  throw InvalidArgument("unknown loss '" + s + "' (expected mse or ce)");
}

OptimizerKind parse_optimizer_kind(const std::string& s) {
  for (auto k : {OptimizerKind::ClosedFormRidge, OptimizerKind::FullBatchGd, OptimizerKind::MinibatchGd,
                 OptimizerKind::Adam})
    if (s == to_string(k)) return k;
  throw InvalidArgument("unknown optimizer '" + s + "' (expected closed-form-ridge, full-batch-gd, minibatch-gd or adam)");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (!(label_noise_fraction >= 0.0 && label_noise_fraction <= 1.0))
    throw InvalidArgument("label_noise_fraction must lie in [0, 1]");
  if (record_every < 1) throw InvalidArgument("record_every must be positive");
  if (optimizer == OptimizerKind::ClosedFormRidge && loss != LossKind::Mse)
    throw InvalidArgument("closed-form-ridge requires the mse loss");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0))
    throw InvalidArgument("invalid Adam hyperparameters");
}

double classification_error(const std::vector<int>& predicted, const std::vector<int>& labels,
                            const std::vector<char>* mask, bool masked_value) {
  if (predicted.size() != labels.size()) throw InvalidArgument("prediction count does not match labels");
  std::size_t wrong = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (mask && static_cast<bool>((*mask)[i]) != masked_value) continue;
    ++total;
    if (predicted[i] != labels[i]) ++wrong;
  }
  if (total == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(wrong) / static_cast<double>(total);
}

NoiseSplitError noise_split_error(const std::vector<int>& predicted, const Dataset& train) {
  NoiseSplitError e;
  const double c = classification_error(predicted, train.y, &train.noise_mask, true);
  const double k = classification_error(predicted, train.y, &train.noise_mask, false);
  if (!std::isnan(c)) e.corrupted = c;
  if (!std::isnan(k)) e.clean = k;
  return e;
}

std::vector<int> predict_labels(const RfmModel& model, const Eigen::MatrixXd& X) {
  const Eigen::VectorXd yhat = model.feature_matrix(X) * model.w() / std::sqrt(static_cast<double>(model.N()));
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = yhat(i) >= 0.0 ? 1 : -1;
  return out;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  CsvWriter w(path);
  w.header({"epoch", "train_err", "test_err", "train_loss"});
  for (const auto& r : history)
    w.row({std::to_string(r.epoch), format_double(r.train_err), format_double(r.test_err), format_double(r.train_loss)});
  w.close();
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
double sigmoid(double t) { return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

// Mean loss over the rows of Z and, if G is given, its gradient with respect to
// Z divided by the number of rows.
double output_loss(const Eigen::MatrixXd& Z, const std::vector<int>& labels, const std::vector<Eigen::Index>* rows,
                   LossKind loss, Eigen::MatrixXd* G) {
  const Eigen::Index B = Z.rows();
  const Eigen::Index K = Z.cols();
  if (G) G->resize(B, K);
  double total = 0.0;
  for (Eigen::Index r = 0; r < B; ++r) {
    const int y = labels[static_cast<std::size_t>(rows ? (*rows)[static_cast<std::size_t>(r)] : r)];
    if (K == 1) {
      const double z = Z(r, 0);
      if (loss == LossKind::Mse) {
        total += 0.5 * (y - z) * (y - z);
        if (G) (*G)(r, 0) = z - y;
      } else {
        total += softplus(-y * z);
        if (G) (*G)(r, 0) = -y * sigmoid(-y * z);
      }
    } else if (loss == LossKind::Mse) {
      for (Eigen::Index k = 0; k < K; ++k) {
        const double d = Z(r, k) - (k == y ? 1.0 : 0.0);
        total += 0.5 * d * d;
        if (G) (*G)(r, k) = d;
      }
    } else {
      const double mx = Z.row(r).maxCoeff();
      double s = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) s += std::exp(Z(r, k) - mx);
      const double lse = mx + std::log(s);
      total += lse - Z(r, y);
      if (G)
        for (Eigen::Index k = 0; k < K; ++k) (*G)(r, k) = std::exp(Z(r, k) - lse) - (k == y ? 1.0 : 0.0);
    }
  }
  if (G) *G /= static_cast<double>(B);
  return total / static_cast<double>(B);
}

std::vector<int> labels_from_outputs(const Eigen::MatrixXd& Z) {
  std::vector<int> out(static_cast<std::size_t>(Z.rows()));
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    if (Z.cols() == 1) {
      out[static_cast<std::size_t>(r)] = Z(r, 0) >= 0.0 ? 1 : -1;
    } else {
      Eigen::Index best = 0;
      Z.row(r).maxCoeff(&best);
      out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
  }
  return out;
}

struct Problem {
  Eigen::Index rows = 0;
  // Mean data loss over `rows` (all rows when null); writes the gradient of the
  // full objective restricted to that batch.
  std::function<double(const Eigen::VectorXd&, const std::vector<Eigen::Index>*, Eigen::VectorXd&)> loss_grad;
  // Train loss, train error and test error at theta.
  std::function<EpochRecord(const Eigen::VectorXd&)> evaluate;
};

void optimize(const Problem& prob, Eigen::VectorXd& theta, const TrainConfig& cfg, std::uint64_t stream,
              TrainMetrics& metrics) {
  cfg.validate();
  if (cfg.optimizer == OptimizerKind::ClosedFormRidge)
    throw InvalidArgument("closed-form-ridge is not a gradient optimizer; use train_rfm_ridge");
  Rng rng = make_rng(cfg.seed, 0xB47C + stream);
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  long step = 0;

  EpochRecord first = prob.evaluate(theta);
  first.epoch = 0;
  metrics.history.push_back(first);
  const double initial = std::max(first.train_loss, 1e-12);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(prob.rows));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const bool full = cfg.optimizer == OptimizerKind::FullBatchGd ||
                    static_cast<Eigen::Index>(cfg.batch_size) >= prob.rows;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    int batches = 0;
    auto apply = [&](const std::vector<Eigen::Index>* rows) {
      epoch_loss += prob.loss_grad(theta, rows, grad);
      ++batches;
      ++step;
      if (cfg.optimizer == OptimizerKind::Adam) {
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
        theta.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
      } else {
        theta -= cfg.learning_rate * grad;
      }
    };
    if (full) {
      apply(nullptr);
    } else {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
      std::vector<Eigen::Index> batch;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
        apply(&batch);
      }
    }
    epoch_loss /= batches;
    if (!std::isfinite(epoch_loss) || epoch_loss > 1e3 * initial || !theta.allFinite())
      throw LearningRateError("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                              format_double(epoch_loss) + ", initial " + format_double(initial) +
                              "); reduce the learning rate");
    if (epoch % cfg.record_every == 0 || epoch == cfg.epochs) {
      EpochRecord r = prob.evaluate(theta);
      r.epoch = epoch;
      metrics.history.push_back(r);
    }
  }
  const EpochRecord& last = metrics.history.back();
  metrics.train_error = last.train_err;
  metrics.test_error = last.test_err;
  metrics.train_loss = last.train_loss;
}

// Flattened MLP parameters: W1, b1, W2, b2 in that order.
Eigen::VectorXd pack(const Mlp& m) {
  Eigen::VectorXd t(m.W1.size() + m.b1.size() + m.W2.size() + m.b2.size());
  Eigen::Index o = 0;
  t.segment(o, m.W1.size()) = m.W1.reshaped();
  o += m.W1.size();
  t.segment(o, m.b1.size()) = m.b1;
  o += m.b1.size();
  t.segment(o, m.W2.size()) = m.W2.reshaped();
  o += m.W2.size();
  t.segment(o, m.b2.size()) = m.b2;
  return t;
}

void unpack(const Eigen::VectorXd& t, Mlp& m) {
  Eigen::Index o = 0;
  m.W1.reshaped() = t.segment(o, m.W1.size());
  o += m.W1.size();
  m.b1 = t.segment(o, m.b1.size());
  o += m.b1.size();
  m.W2.reshaped() = t.segment(o, m.W2.size());
  o += m.W2.size();
  m.b2 = t.segment(o, m.b2.size());
}

void check_labels_for(const Dataset& ds, int outputs) {
  ds.validate();
  if (outputs == 1 && ds.label_kind != LabelKind::Binary) throw InvalidArgument("single-output model needs binary labels");
  if (outputs > 1 && (ds.label_kind != LabelKind::Multiclass || ds.n_classes != outputs))
    throw InvalidArgument("model output count does not match the number of classes");
}

}  // namespace

TrainedRfm train_rfm_ridge(const RfmModel& skeleton, const Dataset& train, double lambda, const Dataset* test) {
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  check_labels_for(train, 1);
  if (train.dim() != skeleton.D()) throw InvalidArgument("dataset dimension does not match the model");
  const Eigen::MatrixXd Phi = skeleton.feature_matrix(train.X);
  const Eigen::VectorXd y = train.targets();
  const double N = static_cast<double>(skeleton.N());
  const double sqrt_n = std::sqrt(N);
  const Eigen::Index P = Phi.rows();
  const bool primal = Phi.cols() <= P;

  Eigen::MatrixXd A = primal ? Eigen::MatrixXd(Phi.transpose() * Phi / N) : Eigen::MatrixXd(Phi * Phi.transpose() / N);
  A.diagonal().array() += lambda;
  const Eigen::VectorXd b = primal ? Eigen::VectorXd(Phi.transpose() * y / sqrt_n) : y;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-12) || !ldlt.isPositive())
    throw RankDeficiencyError("ridge system is singular or too ill-conditioned (rcond " + format_double(ldlt.rcond()) +
                              ") at lambda = " + format_double(lambda) + "; use a positive lambda");
  Eigen::VectorXd sol = ldlt.solve(b);
  // Stationarity: backward-stable residual, with iterative refinement.
  const double a_norm = A.lpNorm<Eigen::Infinity>();
  double rel = 0.0;
  for (int it = 0; it < 4; ++it) {
    const Eigen::VectorXd r = b - A * sol;
    rel = r.lpNorm<Eigen::Infinity>() / (a_norm * sol.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>());
    if (rel < 1e-8 * 1e-4) break;
    sol += ldlt.solve(r);
  }
  if (!(rel < 1e-8)) throw NumericalError("ridge solution failed the stationarity check (residual " + format_double(rel) + ")");

  Eigen::VectorXd w = primal ? sol : Eigen::VectorXd(Phi.transpose() * sol / sqrt_n);
  TrainedRfm out(skeleton.with_weights(std::move(w)));
  const Eigen::VectorXd yhat = Phi * out.model.w() / sqrt_n;
  out.train_loss = 0.5 * (y - yhat).squaredNorm() / static_cast<double>(P);
  std::vector<int> pred(static_cast<std::size_t>(P));
  for (Eigen::Index i = 0; i < P; ++i) pred[static_cast<std::size_t>(i)] = yhat(i) >= 0.0 ? 1 : -1;
  out.train_error = classification_error(pred, train.y);
  out.test_error = test ? classification_error(predict_labels(out.model, test->X), test->y) : kNaN;
  out.history.push_back({0, out.train_error, out.test_error, out.train_loss});
  return out;
}

TrainedRfm train_gd(const RfmModel& skeleton, const Dataset& train, const TrainConfig& config, const Dataset* test) {
  if (config.optimizer == OptimizerKind::ClosedFormRidge) {
    config.validate();
    return train_rfm_ridge(skeleton, train, config.lambda, test);
  }
  check_labels_for(train, 1);
  if (train.dim() != skeleton.D()) throw InvalidArgument("dataset dimension does not match the model");
  const Eigen::MatrixXd Phi = skeleton.feature_matrix(train.X);
  const Eigen::MatrixXd Phi_test = test ? skeleton.feature_matrix(test->X) : Eigen::MatrixXd();
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(skeleton.N()));
  const double reg = config.lambda / static_cast<double>(train.size());

  Problem prob;
  prob.rows = Phi.rows();
  prob.loss_grad = [&](const Eigen::VectorXd& w, const std::vector<Eigen::Index>* rows, Eigen::VectorXd& grad) {
    Eigen::MatrixXd G;
    if (rows) {
      const Eigen::MatrixXd sub = Phi(*rows, Eigen::all);
      const Eigen::MatrixXd Z = sub * w * inv_sqrt_n;
      const double l = output_loss(Z, train.y, rows, config.loss, &G);
      grad = sub.transpose() * G.col(0) * inv_sqrt_n + reg * w;
      return l;
    }
    const Eigen::MatrixXd Z = Phi * w * inv_sqrt_n;
    const double l = output_loss(Z, train.y, nullptr, config.loss, &G);
    grad = Phi.transpose() * G.col(0) * inv_sqrt_n + reg * w;
    return l;
  };
  prob.evaluate = [&](const Eigen::VectorXd& w) {
    EpochRecord r;
    const Eigen::MatrixXd Z = Phi * w * inv_sqrt_n;
    r.train_loss = output_loss(Z, train.y, nullptr, config.loss, nullptr);
    r.train_err = classification_error(labels_from_outputs(Z), train.y);
    r.test_err = test ? classification_error(labels_from_outputs(Phi_test * w * inv_sqrt_n), test->y) : kNaN;
    return r;
  };
  Eigen::VectorXd w = skeleton.w();
  TrainMetrics metrics;
  optimize(prob, w, config, 0, metrics);
  TrainedRfm out(skeleton.with_weights(std::move(w)));
  static_cast<TrainMetrics&>(out) = std::move(metrics);
  return out;
}

namespace {

TrainedMlp train_mlp(const Mlp& init, const Dataset& train, const TrainConfig& config, const Dataset* test,
                     std::uint64_t stream) {
  check_labels_for(train, init.outputs());
  if (train.dim() != init.input_dim()) throw InvalidArgument("dataset dimension does not match the network");
  const double reg = config.lambda / static_cast<double>(train.size());
  Mlp net = init;

  Problem prob;
  prob.rows = train.X.rows();
  prob.loss_grad = [&](const Eigen::VectorXd& theta, const std::vector<Eigen::Index>* rows, Eigen::VectorXd& grad) {
    unpack(theta, net);
    const Eigen::MatrixXd Xb = rows ? Eigen::MatrixXd(train.X(*rows, Eigen::all)) : train.X;
    const Eigen::MatrixXd H = ((Xb * net.W1.transpose()).rowwise() + net.b1.transpose()).array().tanh().matrix();
    const Eigen::MatrixXd Z = (H * net.W2.transpose()).rowwise() + net.b2.transpose();
    Eigen::MatrixXd G;
    const double l = output_loss(Z, train.y, rows, config.loss, &G);
    Mlp g;
    g.W2 = G.transpose() * H + reg * net.W2;
    g.b2 = G.colwise().sum().transpose();
    const Eigen::MatrixXd dA = ((G * net.W2).array() * (1.0 - H.array().square())).matrix();
    g.W1 = dA.transpose() * Xb + reg * net.W1;
    g.b1 = dA.colwise().sum().transpose();
    grad = pack(g);
    return l;
  };
  prob.evaluate = [&](const Eigen::VectorXd& theta) {
    unpack(theta, net);
    EpochRecord r;
    const Eigen::MatrixXd Z = net.logits(train.X);
    r.train_loss = output_loss(Z, train.y, nullptr, config.loss, nullptr);
    r.train_err = classification_error(labels_from_outputs(Z), train.y);
    r.test_err = test ? classification_error(net.predict(test->X), test->y) : kNaN;
    return r;
  };
  Eigen::VectorXd theta = pack(init);
  TrainedMlp out;
  optimize(prob, theta, config, stream, out);
  out.model = init;
  unpack(theta, out.model);
  return out;
}

}  // namespace

TrainedMlp train_gd(const Mlp& init, const Dataset& train, const TrainConfig& config, const Dataset* test) {
  return train_mlp(init, train, config, test, 0);
}

AdversarialResult adversarial_init_protocol(const Mlp& skeleton, const Dataset& train, const Dataset& test,
                                            const TrainConfig& config, int pretrain_epochs, int main_epochs) {
  if (pretrain_epochs < 0 || main_epochs < 0) throw InvalidArgument("epoch counts must be non-negative");
  AdversarialResult res;
  Mlp start = skeleton;
  if (pretrain_epochs > 0) {
    const Dataset corrupted = flip_labels(train, 1.0, substream_seed(config.seed, 0xAD7));
    TrainConfig pre = config;
    pre.epochs = pretrain_epochs;
    TrainedMlp phase1 = train_mlp(skeleton, corrupted, pre, &test, 1);
    res.pretrain_history = std::move(phase1.history);
    start = std::move(phase1.model);
  }
  TrainConfig main = config;
  main.epochs = main_epochs;
  res.model = train_mlp(start, train, main, &test, 0);
  return res;
}

}  // namespace meandim
