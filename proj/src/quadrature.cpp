#include "meandim/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "meandim/error.hpp"

namespace meandim {

namespace {

constexpr double kPi = 3.14159265358979323846;

QuadratureRule build_gauss_hermite(int n) {
  // Jacobi matrix of the probabilists' Hermite polynomials: zero diagonal,
  // off-diagonal sqrt(k).
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalError("Gauss-Hermite eigenproblem failed");
  QuadratureRule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    r.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    r.weights[static_cast<std::size_t>(i)] = v * v;
  }
  // Symmetrise to remove eigen-solver asymmetry in the last digits.
  for (int i = 0; i < n / 2; ++i) {
    const auto a = static_cast<std::size_t>(i);
    const auto b = static_cast<std::size_t>(n - 1 - i);
    const double z = 0.5 * (r.nodes[b] - r.nodes[a]);
    const double w = 0.5 * (r.weights[a] + r.weights[b]);
    r.nodes[a] = -z;
    r.nodes[b] = z;
    r.weights[a] = r.weights[b] = w;
  }
  if (n % 2 == 1) r.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  double total = 0.0;
  for (double w : r.weights) total += w;
  for (double& w : r.weights) w /= total;
  return r;
}

}  // namespace

const QuadratureRule& gauss_hermite(int n) {
  if (n < 1) throw InvalidArgument("Gauss-Hermite rule needs at least one node");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<QuadratureRule>(build_gauss_hermite(n));
  return *slot;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw InvalidArgument("Gauss-Legendre rule needs at least one node");
  QuadratureRule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        // One more pass so dp matches the final x.
        p0 = 1.0;
        p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        break;
      }
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    r.nodes[lo] = mid - half * x;
    r.nodes[hi] = mid + half * x;
    r.weights[lo] = r.weights[hi] = half * w;
  }
  if (n % 2 == 1) r.nodes[static_cast<std::size_t>(n / 2)] = mid;
  return r;
}

QuadratureRule composite_gauss_legendre(const std::vector<double>& breakpoints, int per_panel) {
  if (breakpoints.size() < 2) throw InvalidArgument("composite rule needs at least two breakpoints");
  QuadratureRule r;
  for (std::size_t p = 0; p + 1 < breakpoints.size(); ++p) {
    if (!(breakpoints[p] < breakpoints[p + 1])) throw InvalidArgument("composite rule breakpoints must increase");
    auto panel = gauss_legendre(per_panel, breakpoints[p], breakpoints[p + 1]);
    r.nodes.insert(r.nodes.end(), panel.nodes.begin(), panel.nodes.end());
    r.weights.insert(r.weights.end(), panel.weights.begin(), panel.weights.end());
  }
  return r;
}

QuadratureRule gaussian_legendre_rule(int per_piece, const std::vector<double>& splits, double cutoff) {
  std::vector<double> bp{-cutoff};
  for (double s : splits)
    if (s > -cutoff && s < cutoff) bp.push_back(s);
  bp.push_back(cutoff);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  auto r = composite_gauss_legendre(bp, per_piece);
  for (std::size_t i = 0; i < r.size(); ++i) r.weights[i] *= normal_pdf(r.nodes[i]);
  return r;
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace meandim
