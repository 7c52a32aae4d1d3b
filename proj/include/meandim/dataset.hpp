#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "meandim/sampler.hpp"

namespace meandim {

enum class LabelKind { Binary, Multiclass };

/// Rows of X are samples. Binary labels are -1/+1; multiclass labels are 0..K-1.
struct Dataset {
  Eigen::MatrixXd X;
  std::vector<int> y;
  std::vector<char> noise_mask;  // 1 where the label was corrupted
  LabelKind label_kind = LabelKind::Binary;
  int n_classes = 2;
  double lo = -1.0;
  double hi = 1.0;

  int size() const noexcept { return static_cast<int>(X.rows()); }
  int dim() const noexcept { return static_cast<int>(X.cols()); }
  void validate() const;
  /// Labels as regression targets (binary only).
  Eigen::VectorXd targets() const;
};

struct TeacherTask {
  Eigen::VectorXd w_T;  // |w_T|^2 = D
  SamplerKind input_kind = SamplerKind::Binary;
  double delta = 0.0;  // variance of Gaussian noise added before the sign
};

/// Gaussian teacher direction rescaled to |w_T|^2 = D.
TeacherTask make_teacher(int D, SamplerKind input_kind, double delta, std::uint64_t seed);

/// Train and test sets labelled y = sign(w_T.x / sqrt(D) + sqrt(delta) * noise).
std::pair<Dataset, Dataset> gen_teacher_student(int D, int P_train, int P_test, const TeacherTask& task,
                                                std::uint64_t seed);

struct MulticlassTask {
  Eigen::MatrixXd W;  // D x K teacher directions
  SamplerKind input_kind = SamplerKind::Binary;
  double noise = 0.0;  // std of Gaussian noise on teacher scores before argmax
};

/// K random teacher directions. With `grid_width` > 0 the inputs are treated as
/// a grid_width-wide image and each direction is damped by a Gaussian envelope
/// of relative width `envelope` around the image centre.
MulticlassTask make_multiclass_teacher(int D, int K, SamplerKind input_kind, double noise, std::uint64_t seed,
                                       int grid_width = 0, double envelope = 0.0);

/// Train and test sets labelled by argmax of the teacher scores.
std::pair<Dataset, Dataset> gen_multiclass(int P_train, int P_test, const MulticlassTask& task, std::uint64_t seed);

/// Relabels exactly floor(fraction * P) distinct rows, each uniformly among
/// the wrong labels; noise_mask marks them.
Dataset flip_labels(const Dataset& ds, double fraction, std::uint64_t seed);

/// Numeric CSV, last column the label. Features are mapped per column onto
/// [lo, hi]; a constant column maps to the midpoint. A first row with no
/// numeric cell is treated as a header.
Dataset load_csv_dataset(const std::string& path, double lo = -1.0, double hi = 1.0);

/// Affine map of every feature from [ds.lo, ds.hi] onto [lo, hi].
Dataset renormalize(const Dataset& ds, double lo, double hi);

}  // namespace meandim
