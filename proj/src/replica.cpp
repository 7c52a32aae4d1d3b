#include "meandim/replica.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meandim/csv.hpp"
#include "meandim/error.hpp"
#include "meandim/quadrature.hpp"

namespace meandim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Gaussian-weighted Gauss–Legendre panels on (-8, 8), graded towards 0 where the
// teacher factor H(-k z) turns into a step for large k.
const QuadratureRule& z_rule() {
  static const QuadratureRule rule = [] {
    std::vector<double> bp{0.0};
    for (double b = 1.0 / 32.0; b < 8.0; b *= 2.0) {
      bp.push_back(b);
      bp.push_back(-b);
    }
    bp.push_back(8.0);
    bp.push_back(-8.0);
    std::sort(bp.begin(), bp.end());
    QuadratureRule r = composite_gauss_legendre(bp, 20);
    for (std::size_t i = 0; i < r.size(); ++i) r.weights[i] *= normal_pdf(r.nodes[i]);
    return r;
  }();
  return rule;
}

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
double sigmoid(double t) { return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

}  // namespace

ReplicaInput ReplicaInput::from_alpha_T(double alpha, double alpha_T, double lambda, LossKind loss, const KappaSet& k,
                                        double delta) {
  ReplicaInput in;
  in.alpha = alpha;
  in.alpha_D = alpha / alpha_T;
  in.lambda = lambda;
  in.loss = loss;
  in.kappas = k;
  in.delta = delta;
  in.validate();
  return in;
}

ReplicaInput ReplicaInput::from_alpha_D(double alpha, double alpha_D, double lambda, LossKind loss, const KappaSet& k,
                                        double delta) {
  ReplicaInput in;
  in.alpha = alpha;
  in.alpha_D = alpha_D;
  in.lambda = lambda;
  in.loss = loss;
  in.kappas = k;
  in.delta = delta;
  in.validate();
  return in;
}

void ReplicaInput::validate() const {
  if (!(alpha > 0.0 && std::isfinite(alpha))) throw InvalidArgument("alpha must be positive");
  if (!(alpha_D > 0.0 && std::isfinite(alpha_D))) throw InvalidArgument("alpha_D must be positive");
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  if (!(delta >= 0.0)) throw InvalidArgument("label noise variance must be non-negative");
  if (!(kappas.k_star_sq > 0.0))
    throw InvalidArgument("the saddle-point equations need a nonlinear activation (k_star^2 > 0)");
  if (std::abs(kappas.k0) > 1e-12 || std::abs(kappas.kbar1) > 1e-12)
    throw InvalidArgument("the saddle-point equations are implemented for odd activations only");
  if (!std::isfinite(kappas.kbar2)) throw InvalidArgument("activation derivative must be square integrable");
}

double OrderParams::get(int i) const {
  switch (i) {
    case 0: return q_d;
    case 1: return delta_q;
    case 2: return delta_q_hat;
    case 3: return delta_Q_hat;
    case 4: return p_d;
    case 5: return delta_p;
    case 6: return delta_p_hat;
    case 7: return delta_P_hat;
    case 8: return r;
    case 9: return r_hat;
  }
  throw InvalidArgument("order parameter index out of range");
}

void OrderParams::set(int i, double v) {
  switch (i) {
    case 0: q_d = v; return;
    case 1: delta_q = v; return;
    case 2: delta_q_hat = v; return;
    case 3: delta_Q_hat = v; return;
    case 4: p_d = v; return;
    case 5: delta_p = v; return;
    case 6: delta_p_hat = v; return;
    case 7: delta_P_hat = v; return;
    case 8: r = v; return;
    case 9: r_hat = v; return;
  }
  throw InvalidArgument("order parameter index out of range");
}

const char* OrderParams::name(int i) {
  static const char* names[] = {"q_d",         "delta_q", "delta_q_hat", "delta_Q_hat", "p_d",
                                "delta_p",     "delta_p_hat", "delta_P_hat", "r",       "r_hat"};
  if (i < 0 || i >= kCount) throw InvalidArgument("order parameter index out of range");
  return names[i];
}

EnergeticTerm::EnergeticTerm(LossKind loss, double delta) : loss_(loss), delta_(delta) {
  if (!(delta >= 0.0)) throw InvalidArgument("label noise variance must be non-negative");
}

double EnergeticTerm::loss(double h) const {
  return loss_ == LossKind::Mse ? 0.5 * (1.0 - h) * (1.0 - h) : softplus(-h);
}

double EnergeticTerm::loss_prime(double h) const { return loss_ == LossKind::Mse ? h - 1.0 : -sigmoid(-h); }

double EnergeticTerm::proximal(double omega, double dQ) const {
  if (!(dQ > 0.0)) throw NumericalError("proximal step needs a positive width");
  if (loss_ == LossKind::Mse) return (omega + dQ) / (1.0 + dQ);
  // g(h) = h - omega + dQ loss'(h) is increasing with its root in [omega, omega + dQ].
  double lo = omega;
  double hi = omega + dQ;
  double h = omega + dQ * sigmoid(-omega) / (1.0 + 0.25 * dQ);
  double dx = hi - lo;
  double dx_old = dx;
  for (int it = 0; it < 400; ++it) {
    const double s = sigmoid(-h);
    const double g = h - omega - dQ * s;
    if (g == 0.0) return h;
    if (g > 0.0) hi = h;
    else lo = h;
    const double gp = 1.0 + dQ * s * (1.0 - s);
    double next = h - g / gp;
    // Bisect when Newton leaves the bracket or fails to halve the step before last.
    if (!(next > lo && next < hi) || std::abs(2.0 * g) > std::abs(dx_old * gp)) next = 0.5 * (lo + hi);
    dx_old = dx;
    dx = std::abs(next - h);
    if (dx <= 1e-15 * (1.0 + std::abs(h))) return next;
    h = next;
    if (hi - lo <= 1e-15 * (1.0 + std::abs(h))) return h;
  }
  throw NumericalError("proximal step did not converge (omega = " + format_double(omega) + ")");
}

double EnergeticTerm::kernel_slope(double M, double Q_d) const {
  const double S = Q_d * (1.0 + delta_) - M * M;
  if (!(Q_d > 0.0) || !(S > 0.0))
    throw NumericalError("teacher overlap violates M^2 < Q_d (M = " + format_double(M) + ", Q_d = " +
                         format_double(Q_d) + ")");
  return M / std::sqrt(S);
}

EnergeticValue EnergeticTerm::evaluate(double M, double Q_d, double dQ) const {
  if (!(dQ > 0.0)) throw NumericalError("delta_Q must be positive");
  const double S = Q_d * (1.0 + delta_) - M * M;
  const double k = kernel_slope(M, Q_d);
  const double dk_dM = Q_d * (1.0 + delta_) / (S * std::sqrt(S));
  const double dk_dQ = -M * (1.0 + delta_) / (2.0 * S * std::sqrt(S));
  EnergeticValue v;
  if (loss_ == LossKind::Mse) {
    const double c = std::sqrt(2.0 / kPi) / std::sqrt(1.0 + delta_);
    const double E = 1.0 - 2.0 * c * M + Q_d;
    v.value = -E / (2.0 * (1.0 + dQ));
    v.d_M = c / (1.0 + dQ);
    v.d_Qd = -1.0 / (2.0 * (1.0 + dQ));
    v.d_dQ = E / (2.0 * (1.0 + dQ) * (1.0 + dQ));
    return v;
  }
  const auto& rule = z_rule();
  const double sq = std::sqrt(Q_d);
  double value = 0.0;
  double dq_explicit = 0.0;
  double d_dq = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j) {
    const double z = rule.nodes[j];
    const double wH = rule.weights[j] * normal_tail(-k * z);
    const double omega = sq * z;
    const double h = proximal(omega, dQ);
    const double phi = -(h - omega) * (h - omega) / (2.0 * dQ) - loss(h);
    const double lp = loss_prime(h);
    value += wH * phi;
    dq_explicit += wH * ((h - omega) / dQ) * z / (2.0 * sq);
    d_dq += wH * 0.5 * lp * lp;
  }
  // Derivative of the teacher factor: 2 E_z[z pdf(k z) phi(sqrt(Q_d) z)], rewritten
  // as a Gaussian average in t = z sqrt(1 + k^2).
  const double a = std::sqrt(1.0 + k * k);
  double J = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j) {
    const double t = rule.nodes[j];
    const double omega = sq * t / a;
    const double h = proximal(omega, dQ);
    const double phi = -(h - omega) * (h - omega) / (2.0 * dQ) - loss(h);
    J += rule.weights[j] * t * phi;
  }
  J *= 2.0 / (std::sqrt(2.0 * kPi) * (1.0 + k * k));
  v.value = 2.0 * value;
  v.d_M = J * dk_dM;
  v.d_Qd = 2.0 * dq_explicit + J * dk_dQ;
  v.d_dQ = 2.0 * d_dq;
  return v;
}

double EnergeticTerm::train_loss(double M, double Q_d, double dQ) const {
  if (loss_ == LossKind::Mse) {
    const double c = std::sqrt(2.0 / kPi) / std::sqrt(1.0 + delta_);
    const double E = 1.0 - 2.0 * c * M + Q_d;
    return E / (2.0 * (1.0 + dQ) * (1.0 + dQ));
  }
  const double k = kernel_slope(M, Q_d);
  const double sq = std::sqrt(Q_d);
  const auto& rule = z_rule();
  double s = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j)
    s += rule.weights[j] * normal_tail(-k * rule.nodes[j]) * loss(proximal(sq * rule.nodes[j], dQ));
  return 2.0 * s;
}

double EnergeticTerm::test_loss(double M, double Q_d) const {
  if (loss_ == LossKind::Mse) {
    const double c = std::sqrt(2.0 / kPi) / std::sqrt(1.0 + delta_);
    return 0.5 * (1.0 - 2.0 * c * M + Q_d);
  }
  const double k = kernel_slope(M, Q_d);
  const double sq = std::sqrt(Q_d);
  const auto& rule = z_rule();
  double s = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j)
    s += rule.weights[j] * normal_tail(-k * rule.nodes[j]) * loss(sq * rule.nodes[j]);
  return 2.0 * s;
}

double free_energy(const OrderParams& p, const ReplicaInput& in) {
  const KappaSet& k = in.kappas;
  const double aD = in.alpha_D;
  const double B = p.delta_P_hat;
  const double G_SS = p.delta_q_hat / (2.0 * (p.delta_Q_hat + in.lambda));
  const double G_SE = -p.q_d / (2.0 * p.delta_q) +
                      0.5 * ((p.delta_p_hat + p.r_hat * p.r_hat) * p.delta_q + p.q_d / p.delta_q) / (1.0 + B * p.delta_q);
  const EnergeticTerm term(in.loss, in.delta);
  const double G_E = term.evaluate(p.M(k), p.Q_d(k), p.delta_Q(k)).value;
  return 0.5 * (p.q_d * p.delta_Q_hat - p.delta_q * p.delta_q_hat) +
         0.5 * aD * (p.p_d * p.delta_P_hat - p.delta_p * p.delta_p_hat) - aD * p.r * p.r_hat + G_SS + aD * G_SE +
         in.alpha * G_E;
}

std::vector<double> free_energy_gradient(const OrderParams& p, const ReplicaInput& in, double h) {
  std::vector<double> g(OrderParams::kCount);
  for (int i = 0; i < OrderParams::kCount; ++i) {
    const double x = p.get(i);
    const double step = h * std::max(1e-3, std::abs(x));
    OrderParams a = p;
    OrderParams b = p;
    a.set(i, x + step);
    b.set(i, x - step);
    g[static_cast<std::size_t>(i)] = (free_energy(a, in) - free_energy(b, in)) / (2.0 * step);
  }
  return g;
}

void update_conjugates(OrderParams& p, const ReplicaInput& in) {
  const KappaSet& k = in.kappas;
  const double a = in.alpha;
  const double aD = in.alpha_D;
  const double k1sq = k.k1 * k.k1;
  const EnergeticValue e = EnergeticTerm(in.loss, in.delta).evaluate(p.M(k), p.Q_d(k), p.delta_Q(k));
  p.r_hat = (a / aD) * k.k1 * e.d_M;
  p.delta_P_hat = -(2.0 * a / aD) * k1sq * e.d_Qd;
  p.delta_p_hat = (2.0 * a / aD) * k1sq * e.d_dQ;
  const double B = p.delta_P_hat;
  const double A = p.delta_p_hat + p.r_hat * p.r_hat;
  const double dq = p.delta_q;
  const double den = 1.0 + B * dq;
  p.delta_Q_hat = aD * B / den - 2.0 * a * k.k_star_sq * e.d_Qd;
  // Partial derivative of the entropic term in delta_q.
  const double dGSE = p.q_d / (2.0 * dq * dq) + 0.5 * ((A - p.q_d / (dq * dq)) / den - B * (A * dq + p.q_d / dq) / (den * den));
  p.delta_q_hat = 2.0 * aD * dGSE + 2.0 * a * k.k_star_sq * e.d_dQ;
}

OrderParams solve_saddle(const ReplicaInput& in, const std::optional<OrderParams>& init, const SolverOptions& opt) {
  in.validate();
  if (in.lambda == 0.0 && in.loss == LossKind::Mse && std::abs(in.alpha - 1.0) < 1e-9)
    throw NumericalError("mse with lambda = 0 diverges at the interpolation point alpha = 1");
  if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw InvalidArgument("damping must lie in (0, 1]");
  OrderParams p = init.value_or(OrderParams{});
  double damping = opt.damping;
  double prev_step[5] = {0, 0, 0, 0, 0};
  int flips = 0;
  double diff = std::numeric_limits<double>::infinity();
  for (long it = 1; it <= opt.max_iterations; ++it) {
    update_conjugates(p, in);
    const double dq = 1.0 / (p.delta_Q_hat + in.lambda);
    const double qd = p.delta_q_hat * dq * dq;
    const double den = 1.0 + p.delta_P_hat * dq;
    const double dp = dq / den;
    const double pd = ((p.delta_p_hat + p.r_hat * p.r_hat) * dq * dq + qd) / (den * den);
    const double r = p.r_hat * dp;
    if (!(dq > 0.0 && qd > 0.0 && dp > 0.0 && pd > 0.0 && std::isfinite(r) && std::isfinite(pd) && std::isfinite(qd)))
      throw ConvergenceError("saddle-point iteration left the admissible region at iteration " + std::to_string(it) +
                                 " (alpha = " + format_double(in.alpha) + ", alpha_T = " + format_double(in.alpha_T()) +
                                 ", lambda = " + format_double(in.lambda) + ")",
                             diff, it);
    const double step[5] = {qd - p.q_d, dq - p.delta_q, pd - p.p_d, dp - p.delta_p, r - p.r};
    diff = 0.0;
    int lead = 0;
    for (int i = 0; i < 5; ++i) {
      if (std::abs(step[i]) > diff) {
        diff = std::abs(step[i]);
        lead = i;
      }
    }
    // Oscillation: the dominant update keeps changing sign. Halve the step.
    flips = step[lead] * prev_step[lead] < 0.0 ? flips + 1 : 0;
    if (flips >= 6 && damping > 1e-3) {
      damping *= 0.5;
      flips = 0;
    }
    std::copy(step, step + 5, prev_step);
    p.q_d += damping * step[0];
    p.delta_q += damping * step[1];
    p.p_d += damping * step[2];
    p.delta_p += damping * step[3];
    p.r += damping * step[4];
    p.iterations = it;
    p.residual = diff;
    if (diff < opt.tolerance) {
      update_conjugates(p, in);
      return p;
    }
  }
  throw ConvergenceError("saddle-point iteration did not converge in " + std::to_string(opt.max_iterations) +
                             " iterations (last change " + format_double(diff) + ", alpha = " + format_double(in.alpha) +
                             ", alpha_T = " + format_double(in.alpha_T()) + ", lambda = " + format_double(in.lambda) + ")",
                         diff, opt.max_iterations);
}

Observables observables(const OrderParams& p, const ReplicaInput& in) {
  const KappaSet& k = in.kappas;
  const double M = p.M(k);
  const double Q_d = p.Q_d(k);
  if (!(Q_d > 0.0) || M * M > Q_d * (1.0 + 1e-12))
    throw NumericalError("order parameters violate M^2 <= Q_d (M = " + format_double(M) + ", Q_d = " +
                         format_double(Q_d) + ")");
  const EnergeticTerm term(in.loss, in.delta);
  Observables o;
  const double cosine = std::clamp(M / std::sqrt(Q_d * (1.0 + in.delta)), -1.0, 1.0);
  o.eps_g = std::acos(cosine) / kPi;
  o.bmd = 1.0 + (k.kbar2 - k.k2) * p.q_d / Q_d;
  if (M * M < Q_d * (1.0 + in.delta)) {
    o.train_loss = term.train_loss(M, Q_d, p.delta_Q(k));
    o.test_loss = term.test_loss(M, Q_d);
  } else {
    o.train_loss = o.test_loss = kNaN;
  }
  return o;
}

std::vector<CurveRow> sweep_curve(const ReplicaInput& tmpl, const std::vector<double>& inv_alpha_grid,
                                  bool continuation, const SolverOptions& opt) {
  if (inv_alpha_grid.empty()) throw InvalidArgument("1/alpha grid is empty");
  bool up = true;
  bool down = true;
  for (std::size_t i = 1; i < inv_alpha_grid.size(); ++i) {
    up = up && inv_alpha_grid[i] > inv_alpha_grid[i - 1];
    down = down && inv_alpha_grid[i] < inv_alpha_grid[i - 1];
  }
  if (!up && !down) throw InvalidArgument("1/alpha grid must be strictly monotone");
  const double alpha_T = tmpl.alpha_T();
  std::vector<CurveRow> rows;
  std::optional<OrderParams> warm;
  for (double ia : inv_alpha_grid) {
    if (!(ia > 0.0)) throw InvalidArgument("1/alpha grid values must be positive");
    CurveRow row;
    row.inv_alpha = ia;
    row.alpha_T = alpha_T;
    row.lambda = tmpl.lambda;
    row.loss = tmpl.loss;
    row.obs = {kNaN, kNaN, kNaN, kNaN};
    row.q_d = row.p_d = row.Q_d = kNaN;
    const ReplicaInput in =
        ReplicaInput::from_alpha_T(1.0 / ia, alpha_T, tmpl.lambda, tmpl.loss, tmpl.kappas, tmpl.delta);
    try {
      OrderParams p;
      try {
        p = solve_saddle(in, continuation ? warm : std::nullopt, opt);
      } catch (const NumericalError&) {
        if (!(continuation && warm)) throw;
        p = solve_saddle(in, std::nullopt, opt);
      }
      row.obs = observables(p, in);
      row.q_d = p.q_d;
      row.p_d = p.p_d;
      row.Q_d = p.Q_d(in.kappas);
      row.converged = true;
      warm = p;
    } catch (const NumericalError&) {
      row.converged = false;
    }
    rows.push_back(row);
  }
  return rows;
}

OptimalLambda optimal_lambda(const ReplicaInput& tmpl, double log10_lo, double log10_hi, double tol) {
  if (!(log10_lo < log10_hi)) throw InvalidArgument("lambda search interval is empty");
  std::optional<OrderParams> warm;
  OptimalLambda best;
  best.obs.eps_g = std::numeric_limits<double>::infinity();
  auto eval = [&](double x) {
    ReplicaInput in = tmpl;
    in.lambda = std::pow(10.0, x);
    OrderParams p;
    try {
      p = solve_saddle(in, warm);
    } catch (const NumericalError&) {
      p = solve_saddle(in);
    }
    warm = p;
    const Observables o = observables(p, in);
    if (o.eps_g < best.obs.eps_g) {
      best.lambda = in.lambda;
      best.obs = o;
      best.params = p;
    }
    return o.eps_g;
  };
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = log10_lo;
  double b = log10_hi;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = eval(d);
    }
  }
  return best;
}

void write_curve_csv(const std::string& path, const std::vector<CurveRow>& rows) {
  CsvWriter w(path);
  w.header({"inv_alpha", "alpha_T", "lambda", "loss", "eps_g", "train_loss", "test_loss", "bmd", "q_d", "p_d", "Q_d",
            "converged"});
  for (const auto& r : rows)
    w.row({format_double(r.inv_alpha), format_double(r.alpha_T), format_double(r.lambda), to_string(r.loss),
           format_double(r.obs.eps_g), format_double(r.obs.train_loss), format_double(r.obs.test_loss),
           format_double(r.obs.bmd), format_double(r.q_d), format_double(r.p_d), format_double(r.Q_d),
           r.converged ? "1" : "0"});
  w.close();
}

std::vector<double> log_grid(double log10_lo, double log10_hi, int points) {
  if (points < 1) throw InvalidArgument("grid needs at least one point");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    g[static_cast<std::size_t>(i)] = std::pow(10.0, log10_lo + (log10_hi - log10_lo) * t);
  }
  return g;
}

}  // namespace meandim
