#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "meandim/activation.hpp"
#include "meandim/boolfn.hpp"
#include "meandim/error.hpp"
#include "meandim/estimator.hpp"
#include "meandim/quadrature.hpp"
#include "meandim/rfm.hpp"
#include "meandim/rng.hpp"

using namespace meandim;

namespace {

RfmModel random_weights(int D, int N, Activation act, std::uint64_t seed) {
  const RfmModel m = RfmModel::random(D, N, act, seed);
  Rng rng = make_rng(seed, 99);
  Eigen::VectorXd w(N);
  for (int i = 0; i < N; ++i) w(i) = standard_normal(rng);
  return m.with_weights(w);
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("meandim_test_" + name)).string();
}

}  // namespace

TEST_CASE("gauss-hermite rule integrates gaussian moments") {
  const auto& r = gauss_hermite(41);
  CHECK(r.integrate([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.integrate([](double z) { return z * z; }) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(r.integrate([](double z) { return z * z * z * z; }) == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(r.integrate([](double z) { return std::cos(z); }) == doctest::Approx(std::exp(-0.5)).epsilon(1e-13));
  const auto gl = gauss_legendre(12, 0.0, 2.0);
  CHECK(gl.integrate([](double x) { return x * x * x; }) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(normal_tail(0.0) == doctest::Approx(0.5));
  CHECK(normal_tail(1.0) + normal_cdf(1.0) == doctest::Approx(1.0));
}

TEST_CASE("tanh coefficients match high-precision reference values") {
  // Independent reference: adaptive arbitrary-precision quadrature.
  const KappaSet k = compute_kappas(Activation::tanh());
  CHECK(k.k0 == 0.0);
  CHECK(k.k1 == doctest::Approx(0.605705509602158825).epsilon(1e-12));
  CHECK(k.k2 == doctest::Approx(0.394294490397841174).epsilon(1e-12));
  CHECK(k.kbar0 == doctest::Approx(0.605705509602158825).epsilon(1e-12));
  CHECK(k.kbar1 == 0.0);
  CHECK(k.kbar2 == doctest::Approx(0.464402902448268242).epsilon(1e-12));
  CHECK(k.k_star_sq == doctest::Approx(k.k2 - k.k1 * k.k1).epsilon(1e-12));
  CHECK(k.kbar2 / k.k2 == doctest::Approx(1.1778).epsilon(1e-4));
  CHECK(kappa_quadrature_discrepancy(Activation::tanh()) < 1e-8);
}

TEST_CASE("kinked and linear activations") {
  const KappaSet lr = compute_kappas(Activation::leaky_relu(0.1));
  CHECK(lr.k0 == doctest::Approx(0.9 / std::sqrt(2.0 * M_PI)).epsilon(1e-10));
  CHECK(lr.k1 == doctest::Approx(0.55).epsilon(1e-10));
  CHECK(lr.k2 == doctest::Approx(0.505).epsilon(1e-10));
  CHECK(lr.kbar0 == doctest::Approx(0.55).epsilon(1e-10));
  CHECK(lr.kbar2 == doctest::Approx(0.505).epsilon(1e-10));

  const KappaSet sg = compute_kappas(Activation::sign());
  CHECK(sg.k1 == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-10));
  CHECK(sg.k2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isinf(sg.kbar2));

  const KappaSet lin = compute_kappas(Activation::linear());
  CHECK(lin.k1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lin.k_star_sq == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(compute_kappas(Activation::tanh(), KappaOptions{20, 1e-8}), InvalidArgument);
  CHECK_THROWS_AS(Activation::parse("swish"), InvalidArgument);
  CHECK(Activation::parse("leaky-relu:0.2").tag() == "leaky-relu:0.2");
}

TEST_CASE("forward matches the feature expansion") {
  const RfmModel m = random_weights(7, 11, Activation::tanh(), 3);
  Rng rng = make_rng(4);
  Eigen::VectorXd x(7);
  for (int i = 0; i < 7; ++i) x(i) = random_sign(rng);
  const Eigen::VectorXd phi = m.features(x);
  CHECK(m.forward(x) == doctest::Approx(phi.dot(m.w()) / std::sqrt(11.0)).epsilon(1e-13));
  const Eigen::VectorXd pre = m.F().transpose() * x / std::sqrt(7.0);
  CHECK(phi(3) == doctest::Approx(std::tanh(pre(3))).epsilon(1e-14));
  Eigen::MatrixXd X(2, 7);
  X.row(0) = x.transpose();
  X.row(1) = -x.transpose();
  const Eigen::MatrixXd P = m.feature_matrix(X);
  CHECK((P.row(0).transpose() - phi).norm() < 1e-13);
  CHECK((P.row(1).transpose() + phi).norm() < 1e-13);
}

TEST_CASE("incremental probes agree with full recomputation") {
  const RfmModel m = random_weights(9, 13, Activation::tanh(), 8);
  const RfmScore fast(m);
  const FunctionScore slow(9, [&](const double* x) { return m.forward(x); });
  Rng rng = make_rng(2);
  std::vector<double> x(9), alt(9), a(9), b(9);
  for (int i = 0; i < 9; ++i) {
    x[static_cast<std::size_t>(i)] = standard_normal(rng);
    alt[static_cast<std::size_t>(i)] = standard_normal(rng);
  }
  double fx = 0.0;
  fast.evaluate(x.data(), &fx);
  fast.evaluate_probes(x.data(), &fx, alt.data(), a.data());
  slow.evaluate_probes(x.data(), &fx, alt.data(), b.data());
  for (int i = 0; i < 9; ++i) CHECK(a[static_cast<std::size_t>(i)] == doctest::Approx(b[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("monte carlo bmd of a small network matches the exact fourier value") {
  const int D = 10;
  const RfmModel m = random_weights(D, 16, Activation::tanh(), 21);
  const VertexTable t = tabulate(D, [&](const SpinVector& s) {
    std::vector<double> x(s.bits().begin(), s.bits().end());
    return m.forward(x.data());
  });
  const double exact = *degree_profile(walsh_hadamard(t)).mean_dimension;
  const auto p = estimate_md_binary_fast(RfmScore(m), D, 100000, 5);
  REQUIRE(p.md);
  CHECK(std::abs(*p.md - exact) <= 3.0 * p.std_err_md);
}

TEST_CASE("closed-form bmd tracks the monte carlo estimate at moderate size") {
  const RfmModel m = random_weights(60, 120, Activation::tanh(), 31);
  const double analytic = analytic_bmd(m);
  const auto p = estimate_md_binary_fast(RfmScore(m), 60, 20000, 7);
  REQUIRE(p.md);
  CHECK(std::abs(analytic - *p.md) / *p.md < 0.05);
  CHECK(analytic >= 1.0);
  CHECK(analytic_bmd_odd_form(m) == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("closed-form bmd special cases") {
  const RfmModel lin = random_weights(20, 30, Activation::linear(), 2);
  CHECK(analytic_bmd(lin) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(analytic_bmd(RfmModel::random(5, 6, Activation::tanh(), 1)), InvalidArgument);
  CHECK_THROWS_AS(analytic_bmd(random_weights(5, 6, Activation::sign(), 1)), InvalidArgument);
  CHECK_THROWS_AS(analytic_bmd_odd_form(random_weights(5, 6, Activation::leaky_relu(0.1), 1)), InvalidArgument);
}

TEST_CASE("psi matrices are symmetric and shared between weight vectors") {
  const RfmModel a = random_weights(8, 10, Activation::tanh(), 12);
  const RfmModel b = a.with_weights(Eigen::VectorXd::Ones(10));
  CHECK(&a.psi() == &b.psi());
  const auto& p = a.psi();
  CHECK((p.psi - p.psi.transpose()).norm() < 1e-14);
  CHECK((p.psi_bar - p.psi_bar.transpose()).norm() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.psi);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("checkpoint round trip") {
  const RfmModel m = random_weights(6, 5, Activation::leaky_relu(0.2), 77);
  const std::string path = tmp_path("ckpt.csv");
  save_rfm_checkpoint(path, m);
  const RfmModel r = load_rfm_checkpoint(path);
  CHECK(r.D() == 6);
  CHECK(r.N() == 5);
  CHECK(r.activation().tag() == m.activation().tag());
  CHECK((r.F() - m.F()).norm() == 0.0);
  CHECK((r.w() - m.w()).norm() == 0.0);

  {
    std::ofstream bad(path);
    bad << "something else\n";
  }
  CHECK_THROWS_AS(load_rfm_checkpoint(path), FormatError);
  CHECK_THROWS_AS(load_rfm_checkpoint(tmp_path("missing.csv")), Error);
  std::filesystem::remove(path);
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(RfmModel::random(0, 3, Activation::tanh(), 1), InvalidArgument);
  CHECK_THROWS_AS(RfmModel(Eigen::MatrixXd::Ones(3, 4), Eigen::VectorXd::Ones(3), Activation::tanh()),
                  InvalidArgument);
}
