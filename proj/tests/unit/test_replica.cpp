#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>

#include "meandim/activation.hpp"
#include "meandim/csv.hpp"
#include "meandim/error.hpp"
#include "meandim/quadrature.hpp"
#include "meandim/replica.hpp"
#include "meandim/rng.hpp"
#include "meandim/spectral.hpp"

using namespace meandim;

namespace {

const KappaSet& tanh_k() {
  static const KappaSet k = compute_kappas(Activation::tanh());
  return k;
}

// Root of an increasing function on [a, b] by bisection to full precision.
double increasing_root(const std::function<double(double)>& g, double a, double b) {
  for (int i = 0; i < 200 && b - a > 0.0; ++i) {
    const double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    (g(m) < 0.0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

// Maximiser of a concave function on [a, b] via the sign of a central difference.
double argmax_concave(const std::function<double(double)>& f, double a, double b) {
  return increasing_root(
      [&](double x) {
        const double h = 1e-7 * (1.0 + std::abs(x));
        return f(x - h) - f(x + h);
      },
      a, b);
}

bool has_local_max_near(const std::vector<double>& grid, const std::vector<double>& v, double target, int steps) {
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (!(v[i] > v[i - 1] && v[i] > v[i + 1])) continue;
    std::size_t nearest = 0;
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (std::abs(std::log(grid[j] / target)) < std::abs(std::log(grid[nearest] / target))) nearest = j;
    const long dist = static_cast<long>(i) - static_cast<long>(nearest);
    if (std::labs(dist) <= steps) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("mse proximal step matches a numerical maximisation") {
  const EnergeticTerm term(LossKind::Mse, 0.0);
  Rng rng = make_rng(3);
  for (int t = 0; t < 20; ++t) {
    const double z0 = standard_normal(rng);
    const double Qd = 0.1 + 2.0 * uniform01(rng);
    const double dQ = 0.01 + 3.0 * uniform01(rng);
    const double omega = std::sqrt(Qd) * z0;
    // Stationarity of -z^2/2 - loss(omega + sqrt(dQ) z) written in h = omega + sqrt(dQ) z.
    const double h = increasing_root([&](double x) { return x - omega + dQ * term.loss_prime(x); }, -100.0, 100.0);
    CHECK(std::abs(term.proximal(omega, dQ) - h) < 1e-10);
    const double z1 = argmax_concave(
        [&](double z) { return -0.5 * z * z - term.loss(omega + std::sqrt(dQ) * z); }, -50.0, 50.0);
    CHECK(std::abs(term.proximal(omega, dQ) - (omega + std::sqrt(dQ) * z1)) < 1e-6);
  }
}

TEST_CASE("cross-entropy proximal step matches a numerical maximisation") {
  const EnergeticTerm term(LossKind::Ce, 0.0);
  for (double omega : {-30.0, -3.0, -0.5, 0.0, 0.7, 4.0, 25.0}) {
    for (double dQ : {1e-4, 0.1, 1.0, 50.0}) {
      const double h =
          increasing_root([&](double x) { return x - omega + dQ * term.loss_prime(x); }, omega - 1.0, omega + dQ + 1.0);
      CHECK(std::abs(term.proximal(omega, dQ) - h) < 1e-10 * (1.0 + std::abs(h)));
    }
  }
  // Wide widths used to make Newton bounce between the bracket ends.
  int bad = 0;
  for (double dQ : {0.5, 15.249, 200.0}) {
    for (double omega = -80.0; omega <= 80.0; omega += 0.0137) {
      const double h = term.proximal(omega, dQ);
      bad += std::abs(h - omega + dQ * term.loss_prime(h)) > 1e-9 * (1.0 + std::abs(h));
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("energetic term agrees with brute-force double integration") {
  const auto& gh = gauss_hermite(201);
  for (LossKind loss : {LossKind::Mse, LossKind::Ce}) {
    for (double delta : {0.0, 0.4}) {
      const EnergeticTerm term(loss, delta);
      const double M = 0.3;
      const double Qd = 0.5;
      const double dQ = 0.8;
      const double k = M / std::sqrt(Qd * (1.0 + delta) - M * M);
      double ref = 0.0;
      for (std::size_t j = 0; j < gh.nodes.size(); ++j) {
        const double z0 = gh.nodes[j];
        const auto obj = [&](double z1) { return -0.5 * z1 * z1 - term.loss(std::sqrt(Qd) * z0 + std::sqrt(dQ) * z1); };
        const double z1 = argmax_concave(obj, -40.0, 40.0);
        ref += gh.weights[j] * 2.0 * normal_tail(-k * z0) * obj(z1);
      }
      CHECK(term.evaluate(M, Qd, dQ).value == doctest::Approx(ref).epsilon(1e-8));
    }
  }
}

TEST_CASE("energetic derivatives match finite differences") {
  for (LossKind loss : {LossKind::Mse, LossKind::Ce}) {
    const EnergeticTerm term(loss, 0.2);
    const double M = 0.25, Qd = 0.6, dQ = 1.3, h = 1e-5;
    const EnergeticValue v = term.evaluate(M, Qd, dQ);
    const auto f = [&](double a, double b, double c) { return term.evaluate(a, b, c).value; };
    CHECK(v.d_M == doctest::Approx((f(M + h, Qd, dQ) - f(M - h, Qd, dQ)) / (2 * h)).epsilon(1e-6));
    CHECK(v.d_Qd == doctest::Approx((f(M, Qd + h, dQ) - f(M, Qd - h, dQ)) / (2 * h)).epsilon(1e-6));
    CHECK(v.d_dQ == doctest::Approx((f(M, Qd, dQ + h) - f(M, Qd, dQ - h)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("converged solutions are stationary points of the free energy") {
  for (LossKind loss : {LossKind::Mse, LossKind::Ce}) {
    for (double inv_alpha : {0.2, 0.8, 3.0}) {
      const ReplicaInput in = ReplicaInput::from_alpha_T(1.0 / inv_alpha, 2.0, 1e-2, loss, tanh_k(), 0.1);
      const OrderParams p = solve_saddle(in);
      for (double g : free_energy_gradient(p, in)) CHECK(std::abs(g) < 1e-5);
    }
  }
}

TEST_CASE("the two ratio parameterisations agree") {
  const ReplicaInput a = ReplicaInput::from_alpha_T(2.5, 4.0, 1e-3, LossKind::Mse, tanh_k());
  const ReplicaInput b = ReplicaInput::from_alpha_D(2.5, 2.5 / 4.0, 1e-3, LossKind::Mse, tanh_k());
  const Observables oa = observables(solve_saddle(a), a);
  const Observables ob = observables(solve_saddle(b), b);
  CHECK(oa.eps_g == doctest::Approx(ob.eps_g).epsilon(1e-8));
  CHECK(oa.bmd == doctest::Approx(ob.bmd).epsilon(1e-8));
  CHECK(oa.test_loss == doctest::Approx(ob.test_loss).epsilon(1e-8));
  CHECK(b.alpha_T() == doctest::Approx(4.0));
}

TEST_CASE("strong shrinkage decouples student from teacher") {
  const ReplicaInput in = ReplicaInput::from_alpha_T(2.0, 3.0, 1e3, LossKind::Mse, tanh_k());
  const OrderParams p = solve_saddle(in);
  CHECK(p.q_d < 1e-5);
  CHECK(p.M(tanh_k()) < 1e-3);
}

TEST_CASE("generalisation error at the teacher-overlap extremes") {
  const ReplicaInput in = ReplicaInput::from_alpha_T(2.0, 3.0, 1e-2, LossKind::Mse, tanh_k());
  OrderParams p;
  p.q_d = 0.4;
  p.p_d = 0.3;
  p.r = 0.0;
  CHECK(observables(p, in).eps_g == doctest::Approx(0.5).epsilon(1e-14));
  p.q_d = 1e-30;
  p.r = std::sqrt(p.p_d);
  CHECK(observables(p, in).eps_g == doctest::Approx(0.0).epsilon(1e-6));
  p.r = 2.0;
  CHECK_THROWS_AS(observables(p, in), NumericalError);
}

TEST_CASE("observables stay in range along a sweep") {
  for (LossKind loss : {LossKind::Mse, LossKind::Ce}) {
    const ReplicaInput tmpl = ReplicaInput::from_alpha_T(1.0, 3.0, 1e-3, loss, tanh_k());
    const auto rows = sweep_curve(tmpl, log_grid(-1.0, 1.0, 9));
    REQUIRE(rows.size() == 9);
    for (const auto& r : rows) {
      REQUIRE(r.converged);
      CHECK(r.obs.eps_g >= 0.0);
      CHECK(r.obs.eps_g <= 0.5);
      CHECK(r.obs.bmd >= 1.0);
      CHECK(r.obs.test_loss >= 0.0);
    }
  }
}

TEST_CASE("large-alpha limit reproduces the kernel ratio") {
  const ReplicaInput in = ReplicaInput::from_alpha_T(1e3, 3.0, 1e-4, LossKind::Mse, tanh_k());
  CHECK(observables(solve_saddle(in), in).bmd == doctest::Approx(1.1778).epsilon(1e-3 / 1.1778));
}

TEST_CASE("interpolation singularity and invalid inputs are reported") {
  const ReplicaInput sing = ReplicaInput::from_alpha_T(1.0, 3.0, 0.0, LossKind::Mse, tanh_k());
  CHECK_THROWS_AS(solve_saddle(sing), NumericalError);
  CHECK_THROWS_AS(ReplicaInput::from_alpha_T(1.0, 3.0, 1e-3, LossKind::Mse, compute_kappas(Activation::linear())),
                  InvalidArgument);
  CHECK_THROWS_AS(
      ReplicaInput::from_alpha_T(1.0, 3.0, 1e-3, LossKind::Mse, compute_kappas(Activation::leaky_relu(0.1))),
      InvalidArgument);
  CHECK_THROWS_AS(ReplicaInput::from_alpha_T(1.0, 3.0, -1.0, LossKind::Mse, tanh_k()), InvalidArgument);
  const ReplicaInput tmpl = ReplicaInput::from_alpha_T(1.0, 3.0, 1e-3, LossKind::Mse, tanh_k());
  CHECK_THROWS_AS(sweep_curve(tmpl, {0.1, 1.0, 0.5}), InvalidArgument);
}

TEST_CASE("non-converged sweep points become NaN rows") {
  const ReplicaInput tmpl = ReplicaInput::from_alpha_T(1.0, 3.0, 1e-3, LossKind::Mse, tanh_k());
  SolverOptions opt;
  opt.max_iterations = 3;
  const auto rows = sweep_curve(tmpl, {0.5, 1.0}, true, opt);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK_FALSE(r.converged);
    CHECK(std::isnan(r.obs.eps_g));
    CHECK(std::isnan(r.obs.bmd));
  }
  const std::string path = (std::filesystem::temp_directory_path() / "meandim_curve.csv").string();
  write_curve_csv(path, rows);
  const auto cells = read_csv_rows(path);
  REQUIRE(cells.size() == 3);
  CHECK(cells[0].size() == 12);
  CHECK(cells[0][0] == "inv_alpha");
  CHECK(cells[1][4] == "nan");
  std::filesystem::remove(path);
}

TEST_CASE("optimal regularisation removes the peak") {
  const std::vector<double> grid = log_grid(-0.6, 0.6, 7);
  std::vector<double> eps;
  for (double ia : grid) {
    const ReplicaInput in = ReplicaInput::from_alpha_T(1.0 / ia, 3.0, 1e-4, LossKind::Mse, tanh_k());
    eps.push_back(optimal_lambda(in).obs.eps_g);
  }
  for (std::size_t i = 1; i < eps.size(); ++i) CHECK(eps[i] <= eps[i - 1] + 1e-6);
  const ReplicaInput at_one = ReplicaInput::from_alpha_T(1.0, 3.0, 1e-4, LossKind::Mse, tanh_k());
  const OptimalLambda best = optimal_lambda(at_one);
  CHECK(best.lambda > 1e-4);
  CHECK(best.obs.eps_g < observables(solve_saddle(at_one), at_one).eps_g);
}

TEST_CASE("label noise gives the test loss a peak at P = D that the bmd does not share") {
  // Fixed D/N = 0.1 while P varies, so P = D sits at 1/alpha = 10.
  const std::vector<double> grid = log_grid(-1.0, 2.0, 31);
  std::vector<double> loss;
  std::vector<double> bmd;
  std::optional<OrderParams> warm;
  for (double ia : grid) {
    const ReplicaInput in = ReplicaInput::from_alpha_D(1.0 / ia, 0.1, 1e-4, LossKind::Mse, tanh_k(), 5.0);
    const OrderParams p = solve_saddle(in, warm);
    warm = p;
    const Observables o = observables(p, in);
    loss.push_back(o.test_loss);
    bmd.push_back(o.bmd);
  }
  CHECK(has_local_max_near(grid, loss, 10.0, 1));
  CHECK_FALSE(has_local_max_near(grid, bmd, 10.0, 1));
}

TEST_CASE("sampled spectrum and marchenko-pastur law give the same traces") {
  const double alpha_D = 0.5;
  const double lambda = 1e-2;
  const auto spec = sampled_spectrum(alpha_D, 2000, 4);
  CHECK(spec.size() == 2000);
  const SpectralResult a = spectral_ols(alpha_D, lambda, tanh_k(), spec);
  const SpectralResult b = spectral_ols_mp(alpha_D, lambda, tanh_k());
  CHECK(std::abs(a.q_d - b.q_d) / b.q_d < 0.01);
  CHECK(std::abs(a.Q_d - b.Q_d) / b.Q_d < 0.01);
}

TEST_CASE("spectral bmd peaks when the spectrum reaches the origin") {
  std::vector<double> bmd;
  for (double aD : {0.5, 0.8, 1.0, 1.25, 2.0}) bmd.push_back(spectral_ols_mp(aD, 1e-6, tanh_k()).bmd);
  CHECK(bmd[2] > bmd[1]);
  CHECK(bmd[2] > bmd[3]);

  std::vector<double> far;
  for (double aD : {50.0, 80.0, 100.0, 125.0, 200.0}) far.push_back(spectral_ols_mp(aD, 1e-6, tanh_k()).bmd);
  for (std::size_t i = 1; i < far.size(); ++i) CHECK(far[i] < far[i - 1]);
  CHECK(far[2] < tanh_k().kbar2 / tanh_k().k2 + 0.05);

  CHECK(spectral_ols_mp(1.0, 0.0, tanh_k()).warning);
  CHECK_FALSE(spectral_ols_mp(2.0, 1e-3, tanh_k()).warning);
  CHECK_THROWS_AS(spectral_ols_mp(-1.0, 1e-3, tanh_k()), InvalidArgument);
}

TEST_CASE("spectral traces agree with the saddle point at large sample ratio") {
  const double alpha = 1e3;
  const ReplicaInput in = ReplicaInput::from_alpha_T(alpha, 3.0, 1e-2, LossKind::Mse, tanh_k());
  const OrderParams p = solve_saddle(in);
  const SpectralResult s = spectral_ols_mp(in.alpha_D, in.lambda / alpha, tanh_k());
  CHECK(s.q_d == doctest::Approx(p.q_d).epsilon(0.02));
  CHECK(s.Q_d == doctest::Approx(p.Q_d(tanh_k())).epsilon(0.02));
  CHECK(s.bmd == doctest::Approx(observables(p, in).bmd).epsilon(0.01));
}
