#include "meandim/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meandim/csv.hpp"
#include "meandim/error.hpp"
#include "meandim/quadrature.hpp"

namespace meandim {

Activation Activation::parse(const std::string& tag) {
  if (tag == "tanh") return tanh();
  if (tag == "sign") return sign();
  if (tag == "linear") return linear();
  const std::string prefix = "leaky-relu";
  if (tag.rfind(prefix, 0) == 0) {
    if (tag.size() == prefix.size()) return leaky_relu(0.01);
    if (tag[prefix.size()] == ':') {
      auto v = parse_double(tag.substr(prefix.size() + 1));
      if (v && std::isfinite(*v)) return leaky_relu(*v);
    }
  }
  throw InvalidArgument("unknown activation '" + tag + "' (expected tanh, sign, linear or leaky-relu:<slope>)");
}

std::string Activation::tag() const {
  switch (kind_) {
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Sign: return "sign";
    case ActivationKind::Linear: return "linear";
    case ActivationKind::LeakyRelu: return "leaky-relu:" + format_double(slope_);
  }
  return "?";
}

double Activation::operator()(double z) const {
  switch (kind_) {
    case ActivationKind::Tanh: return std::tanh(z);
    case ActivationKind::Sign: return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
    case ActivationKind::Linear: return z;
    case ActivationKind::LeakyRelu: return z >= 0.0 ? z : slope_ * z;
  }
  return 0.0;
}

double Activation::derivative(double z) const {
  switch (kind_) {
    case ActivationKind::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case ActivationKind::Sign: return 0.0;
    case ActivationKind::Linear: return 1.0;
    case ActivationKind::LeakyRelu: return z >= 0.0 ? 1.0 : slope_;
  }
  return 0.0;
}

double Activation::second_derivative(double z) const {
  if (kind_ == ActivationKind::Tanh) {
    const double t = std::tanh(z);
    return -2.0 * t * (1.0 - t * t);
  }
  return 0.0;
}

bool Activation::is_odd() const noexcept {
  switch (kind_) {
    case ActivationKind::Tanh:
    case ActivationKind::Sign:
    case ActivationKind::Linear: return true;
    case ActivationKind::LeakyRelu: return slope_ == 1.0;
  }
  return false;
}

std::vector<double> Activation::kinks() const {
  if (kind_ == ActivationKind::Sign || kind_ == ActivationKind::LeakyRelu) return {0.0};
  return {};
}

namespace {

struct RawMoments {
  double m0, m1, m2, mbar1, mbar2;
};

// kappa_1 and kbar_1 use the Stein forms E[z s] and E[(z^2 - 1) s], which need
// no derivative of the activation at its kinks.
template <class Rule>
RawMoments moments(const Activation& act, const Rule& rule) {
  RawMoments m{0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double z = rule.nodes[i];
    const double w = rule.weights[i];
    const double s = act(z);
    const double d = act.derivative(z);
    m.m0 += w * s;
    m.m1 += w * z * s;
    m.m2 += w * s * s;
    m.mbar1 += w * (z * z - 1.0) * s;
    m.mbar2 += w * d * d;
  }
  return m;
}

RawMoments moments_with(const Activation& act, int nodes) {
  if (act.kinks().empty()) return moments(act, gauss_hermite(nodes));
  // Half the nodes on each side of the kink.
  return moments(act, gaussian_legendre_rule(std::max(nodes / 2, 1), act.kinks()));
}

double max_diff(const RawMoments& a, const RawMoments& b) {
  return std::max({std::abs(a.m0 - b.m0), std::abs(a.m1 - b.m1), std::abs(a.m2 - b.m2),
                   std::abs(a.mbar1 - b.mbar1), std::abs(a.mbar2 - b.mbar2)});
}

}  // namespace

double kappa_quadrature_discrepancy(const Activation& act, int nodes) {
  return max_diff(moments_with(act, nodes), moments_with(act, 4 * nodes));
}

KappaSet compute_kappas(const Activation& act, const KappaOptions& opt) {
  if (opt.nodes < 100) throw InvalidArgument("kappa quadrature needs at least 100 nodes");
  const RawMoments m = moments_with(act, opt.nodes);
  const RawMoments ref = moments_with(act, 4 * opt.nodes);
  const double disc = max_diff(m, ref);
  if (!(disc <= opt.tolerance))
    throw NumericalError("kappa quadrature for '" + act.tag() + "' did not converge (node-doubling discrepancy " +
                         format_double(disc) + ")");
  KappaSet k;
  k.k0 = m.m0;
  k.k1 = m.m1;
  k.k2 = m.m2;
  k.kbar0 = m.m1;
  k.kbar1 = m.mbar1;
  if (act.is_odd()) {
    // Exact zeros by symmetry; removes quadrature residue.
    k.k0 = 0.0;
    k.kbar1 = 0.0;
  }
  k.k_star_sq = std::max(0.0, k.k2 - k.k1 * k.k1 - k.k0 * k.k0);
  if (act.has_jump()) {
    k.kbar2 = std::numeric_limits<double>::infinity();
    k.kbar_star_sq = std::numeric_limits<double>::infinity();
  } else {
    k.kbar2 = m.mbar2;
    k.kbar_star_sq = std::max(0.0, k.kbar2 - k.kbar1 * k.kbar1 - k.kbar0 * k.kbar0);
  }
  return k;
}

}  // namespace meandim
