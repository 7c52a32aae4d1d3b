#pragma once

#include <optional>
#include <string>
#include <vector>

#include "meandim/activation.hpp"
#include "meandim/trainer.hpp"

namespace meandim {

/// One point of the high-dimensional limit: alpha = P/N, alpha_D = D/N,
/// alpha_T = P/D = alpha / alpha_D.
struct ReplicaInput {
  double alpha = 1.0;
  double alpha_D = 1.0;
  double lambda = 1e-4;
  LossKind loss = LossKind::Mse;
  KappaSet kappas;
  double delta = 0.0;  // variance of the label noise added before the sign

  static ReplicaInput from_alpha_T(double alpha, double alpha_T, double lambda, LossKind loss, const KappaSet& k,
                                   double delta = 0.0);
  static ReplicaInput from_alpha_D(double alpha, double alpha_D, double lambda, LossKind loss, const KappaSet& k,
                                   double delta = 0.0);
  double alpha_T() const { return alpha / alpha_D; }
  void validate() const;
};

/// Zero-temperature order parameters. The *_hat entries are conjugates.
struct OrderParams {
  double q_d = 1.0;
  double delta_q = 1.0;
  double delta_q_hat = 0.0;
  double delta_Q_hat = 0.0;
  double p_d = 1.0;
  double delta_p = 1.0;
  double delta_p_hat = 0.0;
  double delta_P_hat = 0.0;
  double r = 0.5;
  double r_hat = 0.0;

  long iterations = 0;
  double residual = 0.0;

  double M(const KappaSet& k) const { return k.k1 * r; }
  double Q_d(const KappaSet& k) const { return k.k_star_sq * q_d + k.k1 * k.k1 * p_d; }
  double delta_Q(const KappaSet& k) const { return k.k_star_sq * delta_q + k.k1 * k.k1 * delta_p; }

  static constexpr int kCount = 10;
  double get(int i) const;
  void set(int i, double v);
  static const char* name(int i);
};

/// The averaged loss term and its partial derivatives in (M, Q_d, dQ).
struct EnergeticValue {
  double value = 0.0;
  double d_M = 0.0;
  double d_Qd = 0.0;
  double d_dQ = 0.0;
};

/// Loss-dependent term of the free energy:
/// 2 E_z0[ H(-k z0) max_z1( -z1^2/2 - loss(sqrt(Q_d) z0 + sqrt(dQ) z1) ) ],
/// k = M / sqrt(Q_d (1 + delta) - M^2).
class EnergeticTerm {
 public:
  EnergeticTerm(LossKind loss, double delta);
  EnergeticValue evaluate(double M, double Q_d, double dQ) const;

  /// Margin loss and its derivative.
  double loss(double h) const;
  double loss_prime(double h) const;
  /// Maximiser h* of -(h - omega)^2 / (2 dQ) - loss(h); closed form for mse, safeguarded Newton for ce.
  double proximal(double omega, double dQ) const;

  /// Averaged loss at the proximal point (training loss) and at the raw margin (test loss).
  double train_loss(double M, double Q_d, double dQ) const;
  double test_loss(double M, double Q_d) const;

 private:
  double kernel_slope(double M, double Q_d) const;

  LossKind loss_;
  double delta_;
};

/// Negative free energy as a function of all ten order parameters.
double free_energy(const OrderParams& p, const ReplicaInput& in);

/// Central-difference gradient of free_energy with step h * max(1e-3, |x|).
std::vector<double> free_energy_gradient(const OrderParams& p, const ReplicaInput& in, double h = 1e-6);

struct SolverOptions {
  double damping = 0.5;
  long max_iterations = 100000;
  double tolerance = 1e-9;
};

/// Damped fixed-point iteration of the stationarity conditions.
OrderParams solve_saddle(const ReplicaInput& in, const std::optional<OrderParams>& init = std::nullopt,
                         const SolverOptions& opt = {});

/// Conjugate parameters implied by the primal ones (the half-step of the iteration).
void update_conjugates(OrderParams& p, const ReplicaInput& in);

struct Observables {
  double eps_g = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double bmd = 0.0;
};

Observables observables(const OrderParams& p, const ReplicaInput& in);

struct CurveRow {
  double inv_alpha = 0.0;
  double alpha_T = 0.0;
  double lambda = 0.0;
  LossKind loss = LossKind::Mse;
  Observables obs;
  double q_d = 0.0;
  double p_d = 0.0;
  double Q_d = 0.0;
  bool converged = false;
};

/// Solves along a monotone grid of 1/alpha at fixed alpha_T, warm-starting each
/// point from the previous converged one. Failed points keep NaN observables.
std::vector<CurveRow> sweep_curve(const ReplicaInput& tmpl, const std::vector<double>& inv_alpha_grid,
                                  bool continuation = true, const SolverOptions& opt = {});

struct OptimalLambda {
  double lambda = 0.0;
  Observables obs;
  OrderParams params;
};

/// Golden-section search on log10(lambda) in [lo, hi] minimising eps_g.
OptimalLambda optimal_lambda(const ReplicaInput& tmpl, double log10_lo = -6.0, double log10_hi = 1.0,
                             double tol = 1e-3);

void write_curve_csv(const std::string& path, const std::vector<CurveRow>& rows);

/// Log-spaced grid of `points` values from 10^lo to 10^hi.
std::vector<double> log_grid(double log10_lo, double log10_hi, int points);

}  // namespace meandim
