#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meandim/dataset.hpp"
#include "meandim/mlp.hpp"
#include "meandim/rfm.hpp"

namespace meandim {

enum class LossKind { Mse, Ce };
enum class OptimizerKind { ClosedFormRidge, FullBatchGd, MinibatchGd, Adam };

std::string to_string(LossKind k);
std::string to_string(OptimizerKind k);
LossKind parse_loss_kind(const std::string& s);
OptimizerKind parse_optimizer_kind(const std::string& s);

/// Per-sample losses on margins or logits. Binary: mse = (y - z)^2 / 2,
/// ce = log(1 + exp(-y z)). Multiclass: squared error against the one-hot
/// target, or softmax cross-entropy.
struct TrainConfig {
  LossKind loss = LossKind::Mse;
  double lambda = 0.0;
  OptimizerKind optimizer = OptimizerKind::FullBatchGd;
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double label_noise_fraction = 0.0;  // applied by the experiment layer through flip_labels
  int record_every = 1;  // history stride in epochs; the last epoch is always recorded
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_err = 0.0;
  double test_err = 0.0;  // NaN without a test set
  double train_loss = 0.0;
};

struct TrainMetrics {
  double train_error = 0.0;
  double test_error = 0.0;  // NaN without a test set
  double train_loss = 0.0;  // mean per-sample data loss, without the ridge term
  std::vector<EpochRecord> history;
};

struct TrainedRfm : TrainMetrics {
  RfmModel model;
  explicit TrainedRfm(RfmModel m) : model(std::move(m)) {}
};

struct TrainedMlp : TrainMetrics {
  Mlp model;
};

/// Minimiser of sum_mu (y_mu - yhat_mu)^2 / 2 + lambda |w|^2 / 2 over the
/// second layer. Solved in the N x N (N <= P) or P x P (N > P) form.
TrainedRfm train_rfm_ridge(const RfmModel& skeleton, const Dataset& train, double lambda,
                           const Dataset* test = nullptr);

/// Gradient training of the RFM second layer on the per-sample mean objective
/// (1/P) sum_mu loss + lambda |w|^2 / (2P), starting from skeleton.w().
TrainedRfm train_gd(const RfmModel& skeleton, const Dataset& train, const TrainConfig& config,
                    const Dataset* test = nullptr);

/// Gradient training of both MLP layers (same objective; biases are not penalised).
TrainedMlp train_gd(const Mlp& init, const Dataset& train, const TrainConfig& config, const Dataset* test = nullptr);

struct AdversarialResult {
  TrainedMlp model;
  std::vector<EpochRecord> pretrain_history;
};

/// Phase 1 trains on fully corrupted labels for pretrain_epochs, phase 2 continues
/// on the clean labels for main_epochs. Optimiser state restarts between phases.
AdversarialResult adversarial_init_protocol(const Mlp& skeleton, const Dataset& train, const Dataset& test,
                                            const TrainConfig& config, int pretrain_epochs, int main_epochs);

double classification_error(const std::vector<int>& predicted, const std::vector<int>& labels,
                            const std::vector<char>* mask = nullptr, bool masked_value = true);

std::vector<int> predict_labels(const RfmModel& model, const Eigen::MatrixXd& X);

/// Train error restricted to corrupted rows and to clean rows.
struct NoiseSplitError {
  std::optional<double> corrupted;
  std::optional<double> clean;
};
NoiseSplitError noise_split_error(const std::vector<int>& predicted, const Dataset& train);

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace meandim
