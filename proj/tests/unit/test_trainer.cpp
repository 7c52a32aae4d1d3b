#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "meandim/csv.hpp"
#include "meandim/dataset.hpp"
#include "meandim/error.hpp"
#include "meandim/estimator.hpp"
#include "meandim/mlp.hpp"
#include "meandim/rng.hpp"
#include "meandim/robustness.hpp"
#include "meandim/trainer.hpp"

using namespace meandim;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("meandim_test_" + name)).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

// Majority vote over +1 coordinates: label +1 while more than half are +1.
class MajorityClassifier : public Classifier {
 public:
  explicit MajorityClassifier(int d) : d_(d) {}
  int dim() const override { return d_; }
  int predict(const double* x) const override {
    int pos = 0;
    for (int i = 0; i < d_; ++i) pos += x[i] > 0.0;
    return 2 * pos > d_ ? 1 : -1;
  }

 private:
  int d_;
};

class ConstantClassifier : public Classifier {
 public:
  explicit ConstantClassifier(int d) : d_(d) {}
  int dim() const override { return d_; }
  int predict(const double*) const override { return 1; }

 private:
  int d_;
};

Dataset all_positive(int P, int D) {
  Dataset ds;
  ds.X = Eigen::MatrixXd::Ones(P, D);
  ds.y.assign(static_cast<std::size_t>(P), 1);
  ds.noise_mask.assign(static_cast<std::size_t>(P), 0);
  return ds;
}

}  // namespace

TEST_CASE("teacher labels follow the teacher sign") {
  const TeacherTask task = make_teacher(30, SamplerKind::Binary, 0.0, 4);
  CHECK(task.w_T.squaredNorm() == doctest::Approx(30.0).epsilon(1e-12));
  const auto [train, test] = gen_teacher_student(30, 200, 50, task, 9);
  CHECK(train.size() == 200);
  CHECK(test.size() == 50);
  for (int i = 0; i < train.size(); ++i) {
    const double u = train.X.row(i).dot(task.w_T);
    CHECK(std::abs(train.X(i, 0)) == 1.0);
    CHECK(train.y[static_cast<std::size_t>(i)] == (u >= 0.0 ? 1 : -1));
  }
}

TEST_CASE("flip_labels corrupts exactly the requested count") {
  const TeacherTask task = make_teacher(10, SamplerKind::Gaussian, 0.0, 1);
  const Dataset clean = gen_teacher_student(10, 101, 1, task, 2).first;
  const Dataset noisy = flip_labels(clean, 0.2, 3);
  int flipped = 0;
  int marked = 0;
  for (std::size_t i = 0; i < clean.y.size(); ++i) {
    flipped += noisy.y[i] != clean.y[i];
    marked += noisy.noise_mask[i];
    if (noisy.noise_mask[i]) CHECK(noisy.y[i] == -clean.y[i]);
  }
  CHECK(flipped == 20);
  CHECK(marked == 20);
  const Dataset all = flip_labels(clean, 1.0, 3);
  for (std::size_t i = 0; i < clean.y.size(); ++i) CHECK(all.y[i] == -clean.y[i]);

  const MulticlassTask mt = make_multiclass_teacher(12, 4, SamplerKind::Binary, 0.0, 5);
  const Dataset mc = gen_multiclass(80, 1, mt, 6).first;
  const Dataset mcn = flip_labels(mc, 0.5, 7);
  int changed = 0;
  for (std::size_t i = 0; i < mc.y.size(); ++i) {
    changed += mcn.y[i] != mc.y[i];
    CHECK(mcn.y[i] >= 0);
    CHECK(mcn.y[i] < 4);
  }
  CHECK(changed == 40);
  CHECK_THROWS_AS(flip_labels(clean, 1.5, 1), InvalidArgument);
}

TEST_CASE("ridge solution is stationary and matches gradient descent") {
  const TeacherTask task = make_teacher(12, SamplerKind::Binary, 0.0, 11);
  const auto [train, test] = gen_teacher_student(12, 40, 30, task, 12);
  for (int N : {20, 70}) {  // primal and dual forms
    const RfmModel skel = RfmModel::random(12, N, Activation::tanh(), 13);
    const double lambda = 0.3;
    const TrainedRfm ridge = train_rfm_ridge(skel, train, lambda, &test);
    // Gradient of sum (y - yhat)^2 / 2 + lambda |w|^2 / 2 at the solution.
    const Eigen::MatrixXd Phi = skel.feature_matrix(train.X) / std::sqrt(static_cast<double>(N));
    const Eigen::VectorXd w = ridge.model.w();
    const Eigen::VectorXd grad = Phi.transpose() * (Phi * w - train.targets()) + lambda * w;
    CHECK(grad.norm() < 1e-9 * (1.0 + w.norm()));

    TrainConfig cfg;
    cfg.loss = LossKind::Mse;
    cfg.optimizer = OptimizerKind::FullBatchGd;
    cfg.lambda = lambda;
    cfg.learning_rate = 0.5;
    cfg.epochs = 20000;
    cfg.record_every = 20000;
    const TrainedRfm gd = train_gd(skel, train, cfg, &test);
    CHECK((gd.model.w() - w).norm() / w.norm() < 1e-4);
    CHECK(gd.test_error == doctest::Approx(ridge.test_error));
  }
}

TEST_CASE("ridge without regularization on duplicated rows is rank deficient") {
  const TeacherTask task = make_teacher(6, SamplerKind::Binary, 0.0, 1);
  Dataset train = gen_teacher_student(6, 10, 1, task, 2).first;
  train.X.row(1) = train.X.row(0);
  train.y[1] = train.y[0];
  const RfmModel skel = RfmModel::random(6, 40, Activation::tanh(), 3);
  CHECK_THROWS_AS(train_rfm_ridge(skel, train, 0.0), RankDeficiencyError);
  CHECK_NOTHROW(train_rfm_ridge(skel, train, 1e-3));
  CHECK_THROWS_AS(train_rfm_ridge(skel, train, -1.0), InvalidArgument);
}

TEST_CASE("cross-entropy drives separable data to zero training error") {
  const TeacherTask task = make_teacher(8, SamplerKind::Gaussian, 0.0, 21);
  const Dataset train = gen_teacher_student(8, 30, 1, task, 22).first;
  const RfmModel skel = RfmModel::random(8, 200, Activation::tanh(), 23);
  TrainConfig cfg;
  cfg.loss = LossKind::Ce;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.learning_rate = 0.05;
  cfg.epochs = 400;
  cfg.batch_size = 10;
  cfg.record_every = 100;
  const TrainedRfm t = train_gd(skel, train, cfg);
  CHECK(t.train_error == 0.0);
  REQUIRE(t.history.size() == 5);
  CHECK(t.history.front().epoch == 0);
  CHECK(t.history.back().epoch == 400);
  CHECK(t.history.back().train_loss < t.history.front().train_loss);
  CHECK(std::isnan(t.test_error));
}

TEST_CASE("divergent learning rate is reported") {
  const TeacherTask task = make_teacher(8, SamplerKind::Binary, 0.0, 1);
  const Dataset train = gen_teacher_student(8, 50, 1, task, 2).first;
  TrainConfig cfg;
  cfg.loss = LossKind::Mse;
  cfg.optimizer = OptimizerKind::FullBatchGd;
  cfg.learning_rate = 1e4;
  cfg.epochs = 50;
  CHECK_THROWS_AS(train_gd(RfmModel::random(8, 30, Activation::tanh(), 3), train, cfg), LearningRateError);
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.learning_rate = 0.1;
  cfg.optimizer = OptimizerKind::ClosedFormRidge;
  cfg.loss = LossKind::Ce;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const MulticlassTask task = make_multiclass_teacher(16, 3, SamplerKind::Binary, 0.0, 2);
  const auto [train, test] = gen_multiclass(60, 20, task, 3);
  const Mlp init = Mlp::init(16, 8, 3, 4);
  TrainConfig cfg;
  cfg.loss = LossKind::Ce;
  cfg.optimizer = OptimizerKind::MinibatchGd;
  cfg.learning_rate = 0.1;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.seed = 9;
  const TrainedMlp a = train_gd(init, train, cfg, &test);
  const TrainedMlp b = train_gd(init, train, cfg, &test);
  CHECK((a.model.W1 - b.model.W1).norm() == 0.0);
  CHECK(a.test_error == b.test_error);
  CHECK(a.history.size() == 21);
}

TEST_CASE("mlp learns a small multiclass task") {
  const MulticlassTask task = make_multiclass_teacher(20, 3, SamplerKind::Binary, 0.0, 12);
  const auto [train, test] = gen_multiclass(300, 300, task, 13);
  TrainConfig cfg;
  cfg.loss = LossKind::Ce;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 100;
  cfg.batch_size = 32;
  cfg.record_every = 100;
  const TrainedMlp t = train_gd(Mlp::init(20, 32, 3, 14), train, cfg, &test);
  CHECK(t.train_error < 0.05);
  CHECK(t.test_error < 0.4);
  CHECK(t.history.back().train_loss < t.history.front().train_loss);
}

TEST_CASE("mlp score probes match recomputation") {
  const Mlp net = Mlp::init(7, 5, 4, 3);
  const MlpScore s(net);
  CHECK(s.outputs() == 4);
  Rng rng = make_rng(1);
  std::vector<double> x(7), alt(7), fx(4), fast(28), slow(28);
  for (int i = 0; i < 7; ++i) {
    x[static_cast<std::size_t>(i)] = random_sign(rng);
    alt[static_cast<std::size_t>(i)] = -x[static_cast<std::size_t>(i)];
  }
  s.evaluate(x.data(), fx.data());
  double norm = 0.0;
  for (double v : fx) norm += std::exp(v);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));  // log-softmax outputs
  s.evaluate_probes(x.data(), fx.data(), alt.data(), fast.data());
  s.ScoreFunction::evaluate_probes(x.data(), fx.data(), alt.data(), slow.data());
  for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
}

TEST_CASE("adversarial protocol without pretraining equals plain training") {
  const MulticlassTask task = make_multiclass_teacher(10, 3, SamplerKind::Binary, 0.0, 5);
  const auto [train, test] = gen_multiclass(40, 20, task, 6);
  const Mlp init = Mlp::init(10, 6, 3, 7);
  TrainConfig cfg;
  cfg.loss = LossKind::Ce;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.seed = 3;
  const AdversarialResult a = adversarial_init_protocol(init, train, test, cfg, 0, 5);
  const TrainedMlp b = train_gd(init, train, cfg, &test);
  CHECK((a.model.model.W2 - b.model.W2).norm() == 0.0);
  CHECK(a.pretrain_history.empty());
  const AdversarialResult c = adversarial_init_protocol(init, train, test, cfg, 3, 5);
  CHECK(c.pretrain_history.size() == 4);
  CHECK((c.model.model.W2 - b.model.W2).norm() > 0.0);
}

TEST_CASE("error helpers") {
  CHECK(classification_error({1, -1, 1, 1}, {1, 1, 1, -1}) == doctest::Approx(0.5));
  const std::vector<char> mask{1, 0, 0, 1};
  CHECK(classification_error({1, -1, 1, 1}, {1, 1, 1, -1}, &mask, true) == doctest::Approx(0.5));
  CHECK(classification_error({1, -1, 1, 1}, {1, 1, 1, -1}, &mask, false) == doctest::Approx(0.5));
  CHECK_THROWS_AS(classification_error({1}, {1, 1}), InvalidArgument);

  Dataset ds = all_positive(4, 2);
  ds.noise_mask = {1, 0, 0, 0};
  const NoiseSplitError e = noise_split_error({-1, 1, 1, -1}, ds);
  REQUIRE(e.corrupted);
  REQUIRE(e.clean);
  CHECK(*e.corrupted == doctest::Approx(1.0));
  CHECK(*e.clean == doctest::Approx(1.0 / 3.0));
  ds.noise_mask = {0, 0, 0, 0};
  CHECK_FALSE(noise_split_error({1, 1, 1, 1}, ds).corrupted);
}

TEST_CASE("history csv layout") {
  const std::string path = tmp_path("history.csv");
  write_history_csv(path, {{0, 0.5, 0.4, 1.0}, {10, 0.1, 0.2, 0.3}});
  const auto rows = read_csv_rows(path);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"epoch", "train_err", "test_err", "train_loss"});
  CHECK(rows[2][0] == "10");
  std::filesystem::remove(path);
}

TEST_CASE("robustness flip counts") {
  // Majority of 5: any order of negations changes the label after exactly 3.
  const RobustnessResult r = robustness_flip_count(MajorityClassifier(5), all_positive(7, 5), 1);
  REQUIRE(r.mean_flips);
  CHECK(*r.mean_flips == doctest::Approx(3.0));
  CHECK(r.correct_points == 7);
  CHECK(r.cap_hits == 0);
  CHECK(r.std_err == doctest::Approx(0.0));

  const RobustnessResult c = robustness_flip_count(ConstantClassifier(4), all_positive(3, 4), 1);
  CHECK(*c.mean_flips == doctest::Approx(4.0));
  CHECK(c.cap_hits == 3);

  Dataset wrong = all_positive(3, 5);
  wrong.y.assign(3, -1);
  const RobustnessResult w = robustness_flip_count(MajorityClassifier(5), wrong, 1);
  CHECK_FALSE(w.mean_flips);
  CHECK(w.correct_points == 0);
}

TEST_CASE("csv dataset loading") {
  const std::string path = tmp_path("data.csv");
  write_file(path, "a,b,label\n0,10,1\n2,10,-1\n4,10,1\n");
  const Dataset ds = load_csv_dataset(path);
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 2);
  CHECK(ds.label_kind == LabelKind::Binary);
  CHECK(ds.X(0, 0) == doctest::Approx(-1.0));
  CHECK(ds.X(1, 0) == doctest::Approx(0.0));
  CHECK(ds.X(2, 0) == doctest::Approx(1.0));
  CHECK(ds.X(0, 1) == doctest::Approx(0.0));  // constant column maps to the midpoint
  const Dataset unit = renormalize(ds, 0.0, 1.0);
  CHECK(unit.X(0, 0) == doctest::Approx(0.0));
  CHECK(unit.X(2, 0) == doctest::Approx(1.0));

  write_file(path, "0,1,2\n3,4,0\n5,6,1\n");
  const Dataset mc = load_csv_dataset(path);
  CHECK(mc.label_kind == LabelKind::Multiclass);
  CHECK(mc.n_classes == 3);

  write_file(path, "1,2,1\n3,1\n");
  CHECK_THROWS_AS(load_csv_dataset(path), FormatError);
  write_file(path, "1,x,1\n3,1,1\n");
  CHECK_THROWS_AS(load_csv_dataset(path), FormatError);
  write_file(path, "");
  CHECK_THROWS_AS(load_csv_dataset(path), FormatError);
  std::filesystem::remove(path);
}
