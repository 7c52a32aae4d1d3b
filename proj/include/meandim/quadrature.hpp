#pragma once

#include <functional>
#include <vector>

namespace meandim {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }
};

/// Nodes and weights with sum_i w_i g(z_i) ≈ E[g(Z)], Z ~ N(0, 1) (Golub–Welsch).
/// Rules are cached; the returned reference stays valid for the program lifetime.
const QuadratureRule& gauss_hermite(int n);

/// Gauss–Legendre rule on [a, b].
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Concatenated Gauss–Legendre panels over consecutive breakpoints.
QuadratureRule composite_gauss_legendre(const std::vector<double>& breakpoints, int per_panel);

/// Rule for E[g(Z)] built from Gauss–Legendre panels on [-cutoff, cutoff] with the
/// standard normal density folded into the weights; `splits` are extra panel
/// boundaries (kinks of g).
QuadratureRule gaussian_legendre_rule(int per_piece, const std::vector<double>& splits, double cutoff = 12.0);

double normal_pdf(double x);
double normal_cdf(double x);
/// Upper tail H(x) = P(Z > x).
double normal_tail(double x);

}  // namespace meandim
