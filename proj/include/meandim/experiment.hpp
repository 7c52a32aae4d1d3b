#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meandim/config.hpp"
#include "meandim/error.hpp"
#include "meandim/sampler.hpp"
#include "meandim/trainer.hpp"

namespace meandim {

enum class ExperimentKind {
  DoubleDescentRfm,
  DoubleDescentMlp,
  TheoryCurve,
  RegularizationSweep,
  TrainsetSizeSweep,
  AdversarialInit,
  RobustnessSweep,
  Heatmap,
  DistributionComparison,
  NormalizationComparison,
};

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);
/// Human-readable name of the figure an experiment kind reproduces.
std::string figure_title(ExperimentKind k);

/// A failure inside one experiment cell, tagged with its grid coordinates.
class ExperimentError : public Error {
 public:
  using Error::Error;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::DoubleDescentRfm;

  // Data. `dataset` is teacher (binary labels), multiclass, or csv.
  std::string dataset = "teacher";
  std::string csv_path;
  double csv_test_fraction = 0.2;
  int input_dim = 100;
  int train_size = 300;
  int test_size = 1000;
  int classes = 10;
  double teacher_noise = 0.0;
  SamplerKind input = SamplerKind::Binary;
  int image_width = 0;  // > 0: inputs are image_width-wide images (heatmaps, centred teachers)
  double envelope = 0.35;

  // Model and training.
  std::string model = "rfm";  // rfm or mlp
  std::string activation = "tanh";
  TrainConfig train;

  // Grids.
  std::vector<int> widths;
  std::vector<double> lambdas;
  std::vector<int> train_sizes;
  std::vector<int> pretrain_epochs;
  int main_epochs = 200;
  std::vector<double> ranges;
  std::vector<SamplerKind> samplers;
  std::string source = "empirical";  // regularization-sweep: theory or empirical

  // Theory.
  double alpha_T = 3.0;
  std::vector<double> inv_alpha_grid;
  bool optimal_lambda = false;

  // Mean-dimension estimation. md_samples = 0 selects the closed form for RFMs.
  std::size_t md_samples = 0;
  int heatmap_class = 0;
  // double-descent-rfm: write the first repetition's model per width as a checkpoint.
  bool save_models = false;

  int repetitions = 1;
  std::uint64_t seed = 0;

  /// Reads and validates every field; unknown keys are rejected.
  static ExperimentConfig from_config(const Config& c);
  void validate() const;
};

struct ExperimentOutput {
  std::vector<std::string> files;  // relative to the output directory
  std::string summary;
};

/// Runs one experiment, writing CSV/SVG artifacts and summary.txt into out_dir.
/// Cells (grid point x repetition) run on `jobs` workers; outputs do not depend on jobs.
ExperimentOutput run_experiment(const ExperimentConfig& config, const std::string& out_dir, int jobs = 1);

}  // namespace meandim
