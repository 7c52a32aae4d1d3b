#include "meandim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "meandim/csv.hpp"
#include "meandim/error.hpp"
#include "meandim/rng.hpp"

namespace meandim {

void Dataset::validate() const {
  if (static_cast<Eigen::Index>(y.size()) != X.rows()) throw InvalidArgument("label count does not match rows");
  if (!noise_mask.empty() && noise_mask.size() != y.size()) throw InvalidArgument("noise mask size mismatch");
  for (int v : y) {
    if (label_kind == LabelKind::Binary && v != 1 && v != -1) throw InvalidArgument("binary labels must be -1 or +1");
    if (label_kind == LabelKind::Multiclass && (v < 0 || v >= n_classes))
      throw InvalidArgument("class label out of range");
  }
}

Eigen::VectorXd Dataset::targets() const {
  if (label_kind != LabelKind::Binary) throw InvalidArgument("regression targets need binary labels");
  Eigen::VectorXd t(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) t(static_cast<Eigen::Index>(i)) = y[i];
  return t;
}

TeacherTask make_teacher(int D, SamplerKind input_kind, double delta, std::uint64_t seed) {
  if (D < 1) throw InvalidArgument("teacher dimension must be positive");
  if (!(delta >= 0.0)) throw InvalidArgument("label noise variance must be non-negative");
  if (input_kind == SamplerKind::Empirical) throw InvalidArgument("teacher inputs must be binary, gaussian or uniform");
  Rng rng = make_rng(seed, 0x7EAC);
  TeacherTask t;
  t.w_T.resize(D);
  for (int k = 0; k < D; ++k) t.w_T(k) = standard_normal(rng);
  t.w_T *= std::sqrt(static_cast<double>(D)) / t.w_T.norm();
  t.input_kind = input_kind;
  t.delta = delta;
  return t;
}

namespace {

InputSampler sampler_for(SamplerKind kind, int D) {
  switch (kind) {
    case SamplerKind::Binary: return InputSampler::binary(D);
    case SamplerKind::Gaussian: return InputSampler::gaussian(D);
    case SamplerKind::Uniform: return InputSampler::uniform(D, -1.0, 1.0);
    case SamplerKind::Empirical: break;
  }
  throw InvalidArgument("synthetic inputs must be binary, gaussian or uniform");
}

Eigen::MatrixXd draw_inputs(const InputSampler& s, int P, Rng& rng) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X(P, s.dim());
  for (int mu = 0; mu < P; ++mu) s.draw(rng, X.row(mu).data());
  return X;
}

Dataset teacher_labels(const TeacherTask& task, Eigen::MatrixXd X, Rng& rng) {
  Dataset ds;
  const double scale = 1.0 / std::sqrt(static_cast<double>(X.cols()));
  const Eigen::VectorXd u = X * task.w_T * scale;
  ds.y.resize(static_cast<std::size_t>(X.rows()));
  const double noise = std::sqrt(task.delta);
  for (Eigen::Index mu = 0; mu < X.rows(); ++mu) {
    double h = u(mu);
    if (task.delta > 0.0) h += noise * standard_normal(rng);
    ds.y[static_cast<std::size_t>(mu)] = h >= 0.0 ? 1 : -1;
  }
  ds.X = std::move(X);
  ds.noise_mask.assign(ds.y.size(), 0);
  ds.label_kind = LabelKind::Binary;
  ds.n_classes = 2;
  return ds;
}

}  // namespace

std::pair<Dataset, Dataset> gen_teacher_student(int D, int P_train, int P_test, const TeacherTask& task,
                                                std::uint64_t seed) {
  if (D < 1 || P_train < 1 || P_test < 0) throw InvalidArgument("teacher-student sizes must be positive");
  if (task.w_T.size() != D) throw InvalidArgument("teacher vector dimension does not match D");
  const InputSampler s = sampler_for(task.input_kind, D);
  Rng rng_train = make_rng(seed, 1);
  Rng rng_test = make_rng(seed, 2);
  Rng noise_train = make_rng(seed, 3);
  Rng noise_test = make_rng(seed, 4);
  Dataset train = teacher_labels(task, draw_inputs(s, P_train, rng_train), noise_train);
  Dataset test = teacher_labels(task, draw_inputs(s, P_test, rng_test), noise_test);
  if (task.input_kind == SamplerKind::Gaussian) {
    train.lo = test.lo = -HUGE_VAL;
    train.hi = test.hi = HUGE_VAL;
  }
  return {std::move(train), std::move(test)};
}

MulticlassTask make_multiclass_teacher(int D, int K, SamplerKind input_kind, double noise, std::uint64_t seed,
                                       int grid_width, double envelope) {
  if (D < 1 || K < 2) throw InvalidArgument("multiclass teacher needs D >= 1 and K >= 2");
  Rng rng = make_rng(seed, 0x3C1A);
  MulticlassTask t;
  t.W.resize(D, K);
  for (int c = 0; c < K; ++c)
    for (int k = 0; k < D; ++k) t.W(k, c) = standard_normal(rng);
  if (grid_width > 0 && envelope > 0.0) {
    if (D % grid_width != 0) throw InvalidArgument("grid width must divide the input dimension");
    const int rows = D / grid_width;
    const double cr = 0.5 * (rows - 1);
    const double cc = 0.5 * (grid_width - 1);
    const double sr = envelope * rows;
    const double sc = envelope * grid_width;
    for (int k = 0; k < D; ++k) {
      const double dr = (k / grid_width - cr) / sr;
      const double dc = (k % grid_width - cc) / sc;
      t.W.row(k) *= std::exp(-0.5 * (dr * dr + dc * dc));
    }
  }
  // Every direction normalised to |w|^2 = D.
  for (int c = 0; c < K; ++c) t.W.col(c) *= std::sqrt(static_cast<double>(D)) / t.W.col(c).norm();
  t.input_kind = input_kind;
  t.noise = noise;
  return t;
}

std::pair<Dataset, Dataset> gen_multiclass(int P_train, int P_test, const MulticlassTask& task, std::uint64_t seed) {
  const int D = static_cast<int>(task.W.rows());
  const int K = static_cast<int>(task.W.cols());
  if (P_train < 1 || P_test < 0) throw InvalidArgument("dataset sizes must be positive");
  const InputSampler s = sampler_for(task.input_kind, D);
  auto make = [&](int P, std::uint64_t stream) {
    Rng rng = make_rng(seed, stream);
    Rng noise_rng = make_rng(seed, stream + 100);
    Dataset ds;
    ds.X = draw_inputs(s, P, rng);
    const Eigen::MatrixXd scores = ds.X * task.W / std::sqrt(static_cast<double>(D));
    ds.y.resize(static_cast<std::size_t>(P));
    for (int mu = 0; mu < P; ++mu) {
      int best = 0;
      double best_v = -HUGE_VAL;
      for (int c = 0; c < K; ++c) {
        double v = scores(mu, c);
        if (task.noise > 0.0) v += task.noise * standard_normal(noise_rng);
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      ds.y[static_cast<std::size_t>(mu)] = best;
    }
    ds.noise_mask.assign(ds.y.size(), 0);
    ds.label_kind = LabelKind::Multiclass;
    ds.n_classes = K;
    if (task.input_kind == SamplerKind::Gaussian) {
      ds.lo = -HUGE_VAL;
      ds.hi = HUGE_VAL;
    }
    return ds;
  };
  return {make(P_train, 11), make(P_test, 12)};
}

Dataset flip_labels(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidArgument("flip fraction must lie in [0, 1]");
  Dataset out = ds;
  const int P = ds.size();
  if (out.noise_mask.size() != static_cast<std::size_t>(P)) out.noise_mask.assign(static_cast<std::size_t>(P), 0);
  const auto count = static_cast<std::size_t>(std::floor(fraction * P + 1e-9));
  if (count == 0) return out;
  Rng rng = make_rng(seed, 0xF11B);
  std::vector<std::size_t> idx(static_cast<std::size_t>(P));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` entries are a uniform subset.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_index(rng, idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = idx[i];
    int& label = out.y[r];
    if (ds.label_kind == LabelKind::Binary) {
      label = -label;
    } else {
      const auto shift = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(ds.n_classes - 1)));
      label = (label + shift) % ds.n_classes;
    }
    out.noise_mask[r] = 1;
  }
  return out;
}

Dataset load_csv_dataset(const std::string& path, double lo, double hi) {
  if (!(lo < hi)) throw InvalidArgument("normalisation interval needs lo < hi");
  auto rows = read_csv_rows(path);
  if (rows.empty()) throw FormatError(path + ": empty file");
  std::size_t first = 0;
  {
    bool any_numeric = false;
    for (const auto& c : rows[0]) any_numeric = any_numeric || parse_double(c).has_value();
    if (!any_numeric) first = 1;
  }
  if (first >= rows.size()) throw FormatError(path + ": no data rows");
  const std::size_t cols = rows[first].size();
  if (cols < 2) throw FormatError(path + ": need at least one feature column and a label column");
  const std::size_t P = rows.size() - first;
  const std::size_t D = cols - 1;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(D));
  std::vector<double> labels(P);
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != cols)
      throw FormatError(path + ": line " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                        " columns, expected " + std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      auto v = parse_double(row[c]);
      if (!v || !std::isfinite(*v))
        throw FormatError(path + ": non-numeric cell '" + row[c] + "' at line " + std::to_string(r + 1) +
                          ", column " + std::to_string(c + 1));
      if (c < D) X(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(c)) = *v;
      else labels[r - first] = *v;
    }
  }

  Dataset ds;
  bool binary = true;
  int max_label = 0;
  for (double l : labels) {
    if (l != std::round(l)) throw FormatError(path + ": labels must be integers");
    if (l != 1.0 && l != -1.0) binary = false;
    max_label = std::max(max_label, static_cast<int>(l));
  }
  ds.y.resize(P);
  if (binary) {
    ds.label_kind = LabelKind::Binary;
    ds.n_classes = 2;
  } else {
    for (double l : labels)
      if (l < 0) throw FormatError(path + ": class labels must be non-negative (or -1/+1 for binary)");
    ds.label_kind = LabelKind::Multiclass;
    ds.n_classes = std::max(max_label + 1, 2);
  }
  for (std::size_t i = 0; i < P; ++i) ds.y[i] = static_cast<int>(labels[i]);

  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double mn = X.col(c).minCoeff();
    const double mx = X.col(c).maxCoeff();
    if (mx > mn)
      X.col(c) = ((X.col(c).array() - mn) * ((hi - lo) / (mx - mn)) + lo).matrix();
    else
      X.col(c).setConstant(0.5 * (lo + hi));
  }
  ds.X = std::move(X);
  ds.noise_mask.assign(P, 0);
  ds.lo = lo;
  ds.hi = hi;
  ds.validate();
  return ds;
}

Dataset renormalize(const Dataset& ds, double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(ds.lo) || !std::isfinite(ds.hi))
    throw InvalidArgument("renormalisation needs finite intervals");
  Dataset out = ds;
  out.X = ((ds.X.array() - ds.lo) * ((hi - lo) / (ds.hi - ds.lo)) + lo).matrix();
  out.lo = lo;
  out.hi = hi;
  return out;
}

}  // namespace meandim
