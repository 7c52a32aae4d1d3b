#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include "meandim/activation.hpp"
#include "meandim/score.hpp"

namespace meandim {

struct PsiMatrices {
  Eigen::MatrixXd omega;    // F^T F / D
  Eigen::MatrixXd psi_bar;  // numerator matrix of the closed-form BMD
  Eigen::MatrixXd psi;      // denominator matrix
};

/// Two-layer network with a frozen Gaussian first layer:
/// y(x) = N^{-1/2} sum_i w_i act((F^T x)_i / sqrt(D)).
class RfmModel {
 public:
  RfmModel(Eigen::MatrixXd F, Eigen::VectorXd w, Activation act);
  /// F with i.i.d. standard normal entries and zero second-layer weights.
  static RfmModel random(int D, int N, Activation act, std::uint64_t seed);

  int D() const noexcept { return static_cast<int>(shared_->F.rows()); }
  int N() const noexcept { return static_cast<int>(shared_->F.cols()); }
  const Eigen::MatrixXd& F() const noexcept { return shared_->F; }
  const Eigen::VectorXd& w() const noexcept { return w_; }
  const Activation& activation() const noexcept { return shared_->act; }
  const KappaSet& kappas() const noexcept { return shared_->kappas; }

  /// Same features (shared, including the cached matrices) with new weights.
  RfmModel with_weights(Eigen::VectorXd w) const;

  double forward(const Eigen::VectorXd& x) const;
  double forward(const double* x) const;
  /// Post-activation features act(F^T x / sqrt(D)) for one input.
  Eigen::VectorXd features(const Eigen::VectorXd& x) const;
  /// Post-activation design matrix, one row per row of X.
  Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& X) const;

  /// Lazily built and cached; safe to call concurrently.
  const PsiMatrices& psi() const;

 private:
  struct Shared {
    Eigen::MatrixXd F;
    Activation act;
    KappaSet kappas;
    std::once_flag psi_once;
    PsiMatrices psi;
  };
  RfmModel(std::shared_ptr<Shared> shared, Eigen::VectorXd w) : shared_(std::move(shared)), w_(std::move(w)) {}

  std::shared_ptr<Shared> shared_;
  Eigen::VectorXd w_;
};

PsiMatrices build_psi(const Eigen::MatrixXd& F, const KappaSet& k);
inline const PsiMatrices& build_psi(const RfmModel& m) { return m.psi(); }

/// Ratio of quadratic forms w^T PsiBar w / w^T Psi w.
double analytic_bmd(const RfmModel& model);

struct RfmOverlaps {
  double q_d;  // |w|^2 / N
  double p_d;  // w^T Omega w / N
  double Q_d;  // k_star^2 q_d + k1^2 p_d
};
RfmOverlaps rfm_overlaps(const RfmModel& model);

/// 1 + (kbar2 - k2) q_d / Q_d, valid for odd activations with unit-norm feature columns.
double analytic_bmd_odd_form(const RfmModel& model);

/// Score adapter with O(N) incremental probes.
class RfmScore : public ScoreFunction {
 public:
  explicit RfmScore(const RfmModel& model);
  int dim() const override { return model_.D(); }
  void evaluate(const double* x, double* out) const override;
  void evaluate_probes(const double* x, const double* fx, const double* alt, double* out) const override;

 private:
  const RfmModel& model_;
};

inline constexpr const char* kRfmCheckpointHeader = "meandim-rfm-checkpoint,1";

void save_rfm_checkpoint(const std::string& path, const RfmModel& model);
RfmModel load_rfm_checkpoint(const std::string& path);

}  // namespace meandim
