#include "meandim/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "meandim/error.hpp"
#include "meandim/quadrature.hpp"
#include "meandim/rng.hpp"

namespace meandim {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check(double alpha_D, double lambda, const KappaSet& k) {
  if (!(alpha_D > 0.0 && std::isfinite(alpha_D))) throw InvalidArgument("alpha_D must be positive");
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  if (!(k.k_star_sq > 0.0)) throw InvalidArgument("spectral traces need a nonlinear activation (k_star^2 > 0)");
}

SpectralResult finish(double alpha_D, double lambda, const KappaSet& k, const SpectralOptions& opt, double tq,
                      double tQ) {
  SpectralResult r;
  const double pref = opt.signal_power * k.k1 * k.k1 / alpha_D;
  r.q_d = pref * tq;
  r.Q_d = pref * tQ;
  if (!(r.Q_d > 0.0)) throw NumericalError("spectral traces vanish (k1 = 0?)");
  r.bmd = 1.0 + (k.kbar2 - k.k2) * r.q_d / r.Q_d;
  if (lambda == 0.0 && std::abs(alpha_D - 1.0) < 0.1)
    r.warning = "lambda = 0 near alpha_D = 1: the spectrum touches the origin and the traces are ill-conditioned";
  return r;
}

}  // namespace

std::vector<double> sampled_spectrum(double alpha_D, int N, std::uint64_t seed) {
  if (N < 1) throw InvalidArgument("N must be positive");
  const int D = static_cast<int>(std::lround(alpha_D * N));
  if (D < 1) throw InvalidArgument("alpha_D * N rounds to zero rows");
  Rng rng = make_rng(seed);
  Eigen::MatrixXd F(D, N);
  for (Eigen::Index j = 0; j < F.cols(); ++j)
    for (Eigen::Index i = 0; i < F.rows(); ++i) F(i, j) = standard_normal(rng);
  // Nonzero eigenvalues of F^T F / D from the smaller Gram matrix.
  const Eigen::MatrixXd G = D < N ? Eigen::MatrixXd(F * F.transpose() / D) : Eigen::MatrixXd(F.transpose() * F / D);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  std::vector<double> ev(static_cast<std::size_t>(N), 0.0);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    ev[static_cast<std::size_t>(i)] = std::max(0.0, es.eigenvalues()(i));
  std::sort(ev.begin(), ev.end());
  return ev;
}

SpectralResult spectral_ols(double alpha_D, double lambda, const KappaSet& k, const std::vector<double>& spectrum,
                            const SpectralOptions& opt) {
  check(alpha_D, lambda, k);
  if (spectrum.empty()) throw InvalidArgument("empty spectrum");
  const double a = k.k1 * k.k1;
  double tq = 0.0;
  double tQ = 0.0;
  for (double rho : spectrum) {
    if (!(rho >= 0.0)) throw InvalidArgument("spectrum must be non-negative");
    const double d = a * rho + k.k_star_sq + lambda;
    tq += rho / (d * d);
    tQ += rho * (a * rho + k.k_star_sq) / (d * d);
  }
  const double n = static_cast<double>(spectrum.size());
  return finish(alpha_D, lambda, k, opt, tq / n, tQ / n);
}

SpectralResult spectral_ols_mp(double alpha_D, double lambda, const KappaSet& k, const SpectralOptions& opt) {
  check(alpha_D, lambda, k);
  if (opt.mp_nodes < 2) throw InvalidArgument("need at least two quadrature nodes");
  const double c = 1.0 / alpha_D;
  const double lo = (1.0 - std::sqrt(c)) * (1.0 - std::sqrt(c));
  const double hi = (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c));
  // rho = lo + (hi - lo)(1 - cos t)/2 removes the square-root edges of the density.
  const QuadratureRule rule = gauss_legendre(opt.mp_nodes, 0.0, kPi);
  const double a = k.k1 * k.k1;
  double tq = 0.0;
  double tQ = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double t = rule.nodes[i];
    const double rho = lo + (hi - lo) * (1.0 - std::cos(t)) / 2.0;
    const double jac = (hi - lo) / 2.0 * std::sin(t);
    const double dens = std::sqrt(std::max(0.0, (hi - rho) * (rho - lo))) / (2.0 * kPi * c * rho);
    const double w = rule.weights[i] * jac * dens;
    const double d = a * rho + k.k_star_sq + lambda;
    tq += w * rho / (d * d);
    tQ += w * rho * (a * rho + k.k_star_sq) / (d * d);
  }
  return finish(alpha_D, lambda, k, opt, tq, tQ);
}

}  // namespace meandim
