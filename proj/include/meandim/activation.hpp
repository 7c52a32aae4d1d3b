#pragma once

#include <string>
#include <vector>

namespace meandim {

enum class ActivationKind { Tanh, Sign, LeakyRelu, Linear };

/// Pointwise nonlinearity of the random feature layer.
class Activation {
 public:
  Activation() = default;
  static Activation tanh() { return Activation(ActivationKind::Tanh, 0.0); }
  static Activation sign() { return Activation(ActivationKind::Sign, 0.0); }
  static Activation leaky_relu(double negative_slope) { return Activation(ActivationKind::LeakyRelu, negative_slope); }
  static Activation linear() { return Activation(ActivationKind::Linear, 0.0); }

  /// "tanh", "sign", "linear", or "leaky-relu:<slope>".
  static Activation parse(const std::string& tag);
  std::string tag() const;

  ActivationKind kind() const noexcept { return kind_; }
  double slope() const noexcept { return slope_; }

  double operator()(double z) const;
  /// Derivative away from kinks (the weak derivative's regular part).
  double derivative(double z) const;
  double second_derivative(double z) const;

  bool is_odd() const noexcept;
  /// Points where the function or its derivative is not smooth.
  std::vector<double> kinks() const;
  /// True when the weak derivative carries a point mass (a jump in the function).
  bool has_jump() const noexcept { return kind_ == ActivationKind::Sign; }

 private:
  Activation(ActivationKind kind, double slope) : kind_(kind), slope_(slope) {}

  ActivationKind kind_ = ActivationKind::Tanh;
  double slope_ = 0.0;
};

/// Gaussian moments of an activation and of its derivative.
struct KappaSet {
  double k0 = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double k_star_sq = 0.0;
  double kbar0 = 0.0;
  double kbar1 = 0.0;
  double kbar2 = 0.0;  // +inf when the derivative has a point mass
  double kbar_star_sq = 0.0;
};

struct KappaOptions {
  int nodes = 201;
  double tolerance = 1e-8;  // allowed discrepancy against the 4x-node reference
};

/// Computes the eight coefficients and checks them against a rule with four
/// times as many nodes. Smooth activations use Gauss–Hermite; activations with
/// kinks use Gauss–Legendre panels split at the kinks.
KappaSet compute_kappas(const Activation& act, const KappaOptions& opt = {});

/// Largest absolute coefficient difference between the default rule and its
/// 4x reference (diagnostic).
double kappa_quadrature_discrepancy(const Activation& act, int nodes = 201);

}  // namespace meandim
