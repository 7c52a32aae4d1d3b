#include "meandim/rfm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "meandim/csv.hpp"
#include "meandim/error.hpp"
#include "meandim/rng.hpp"

namespace meandim {

RfmModel::RfmModel(Eigen::MatrixXd F, Eigen::VectorXd w, Activation act) : shared_(std::make_shared<Shared>()) {
  if (F.rows() < 1 || F.cols() < 1) throw InvalidArgument("feature matrix must be non-empty");
  if (w.size() != F.cols())
    throw InvalidArgument("weight vector has " + std::to_string(w.size()) + " entries, expected " +
                          std::to_string(F.cols()));
  shared_->F = std::move(F);
  shared_->act = act;
  shared_->kappas = compute_kappas(act);
  w_ = std::move(w);
}

RfmModel RfmModel::random(int D, int N, Activation act, std::uint64_t seed) {
  if (D < 1 || N < 1) throw InvalidArgument("RFM dimensions must be positive");
  Rng rng = make_rng(seed, 0xF);
  Eigen::MatrixXd F(D, N);
  for (int j = 0; j < N; ++j)
    for (int k = 0; k < D; ++k) F(k, j) = standard_normal(rng);
  return RfmModel(std::move(F), Eigen::VectorXd::Zero(N), act);
}

RfmModel RfmModel::with_weights(Eigen::VectorXd w) const {
  if (w.size() != N()) throw InvalidArgument("weight vector size does not match the hidden width");
  return RfmModel(shared_, std::move(w));
}

Eigen::VectorXd RfmModel::features(const Eigen::VectorXd& x) const {
  if (x.size() != D()) throw InvalidArgument("input dimension does not match the model");
  Eigen::VectorXd h = F().transpose() * x / std::sqrt(static_cast<double>(D()));
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = activation()(h(i));
  return h;
}

Eigen::MatrixXd RfmModel::feature_matrix(const Eigen::MatrixXd& X) const {
  if (X.cols() != D()) throw InvalidArgument("design matrix has the wrong number of columns");
  Eigen::MatrixXd H = X * F() / std::sqrt(static_cast<double>(D()));
  const Activation& act = activation();
  H = H.unaryExpr([&act](double z) { return act(z); });
  return H;
}

double RfmModel::forward(const Eigen::VectorXd& x) const {
  return features(x).dot(w_) / std::sqrt(static_cast<double>(N()));
}

double RfmModel::forward(const double* x) const {
  return forward(Eigen::Map<const Eigen::VectorXd>(x, D()).eval());
}

const PsiMatrices& RfmModel::psi() const {
  std::call_once(shared_->psi_once, [this] { shared_->psi = build_psi(shared_->F, shared_->kappas); });
  return shared_->psi;
}

PsiMatrices build_psi(const Eigen::MatrixXd& F, const KappaSet& k) {
  const double D = static_cast<double>(F.rows());
  const Eigen::Index N = F.cols();
  PsiMatrices m;
  m.omega.noalias() = F.transpose() * F / D;
  m.omega = 0.5 * (m.omega + m.omega.transpose()).eval();
  m.psi = k.k1 * k.k1 * m.omega;
  m.psi.diagonal().array() += k.k_star_sq;
  m.psi_bar = k.kbar0 * k.kbar0 * m.omega + k.kbar1 * k.kbar1 * m.omega.cwiseProduct(m.omega);
  for (Eigen::Index i = 0; i < N; ++i) m.psi_bar(i, i) += k.kbar_star_sq * m.omega(i, i);
  return m;
}

double analytic_bmd(const RfmModel& model) {
  const auto& w = model.w();
  if (w.squaredNorm() == 0.0) throw InvalidArgument("analytic BMD is undefined for a zero weight vector");
  const auto& k = model.kappas();
  if (!std::isfinite(k.kbar2))
    throw InvalidArgument("analytic BMD needs a finite derivative second moment; '" + model.activation().tag() +
                          "' has a jump");
  if (!(k.k_star_sq + k.k1 * k.k1 > 0.0)) throw InvalidArgument("activation has vanishing Gaussian variance");
  const auto& p = model.psi();
  const double num = w.dot(p.psi_bar * w);
  const double den = w.dot(p.psi * w);
  if (!(den > 0.0)) throw NumericalError("closed-form BMD denominator is not positive");
  return num / den;
}

RfmOverlaps rfm_overlaps(const RfmModel& model) {
  const auto& w = model.w();
  const double N = static_cast<double>(model.N());
  const Eigen::VectorXd Fw = model.F() * w;
  RfmOverlaps o{};
  o.q_d = w.squaredNorm() / N;
  o.p_d = Fw.squaredNorm() / (static_cast<double>(model.D()) * N);
  o.Q_d = model.kappas().k_star_sq * o.q_d + model.kappas().k1 * model.kappas().k1 * o.p_d;
  return o;
}

double analytic_bmd_odd_form(const RfmModel& model) {
  if (!model.activation().is_odd()) throw InvalidArgument("the simplified BMD form needs an odd activation");
  if (model.w().squaredNorm() == 0.0) throw InvalidArgument("analytic BMD is undefined for a zero weight vector");
  const auto& k = model.kappas();
  if (!std::isfinite(k.kbar2)) throw InvalidArgument("activation derivative has a jump");
  const auto o = rfm_overlaps(model);
  return 1.0 + (k.kbar2 - k.k2) * o.q_d / o.Q_d;
}

RfmScore::RfmScore(const RfmModel& model) : model_(model) {}

void RfmScore::evaluate(const double* x, double* out) const { out[0] = model_.forward(x); }

void RfmScore::evaluate_probes(const double* x, const double*, const double* alt, double* out) const {
  const int D = model_.D();
  const int N = model_.N();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(N));
  const Eigen::Map<const Eigen::VectorXd> xv(x, D);
  const Eigen::VectorXd h = model_.F().transpose() * xv * inv_sqrt_d;
  const Activation& act = model_.activation();
  const auto& F = model_.F();
  const auto& w = model_.w();
  for (int i = 0; i < D; ++i) {
    const double delta = (alt[i] - x[i]) * inv_sqrt_d;
    double s = 0.0;
    for (int j = 0; j < N; ++j) s += w(j) * act(h(j) + F(i, j) * delta);
    out[i] = s * inv_sqrt_n;
  }
}

void save_rfm_checkpoint(const std::string& path, const RfmModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << kRfmCheckpointHeader << '\n';
  out << "D,N,activation\n" << model.D() << ',' << model.N() << ',' << model.activation().tag() << '\n';
  for (int k = 0; k < model.D(); ++k) {
    for (int j = 0; j < model.N(); ++j) out << (j ? "," : "") << format_double(model.F()(k, j));
    out << '\n';
  }
  for (int j = 0; j < model.N(); ++j) out << (j ? "," : "") << format_double(model.w()(j));
  out << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

RfmModel load_rfm_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw FormatError(path + ": truncated checkpoint (missing " + what + ")");
    return split_csv_line(line);
  };
  std::getline(in, line);
  if (trim(line) != kRfmCheckpointHeader) throw FormatError(path + ": not an RFM checkpoint (bad version header)");
  next("column names");
  auto meta = next("dimensions");
  if (meta.size() != 3) throw FormatError(path + ": malformed dimension line");
  auto D = parse_int(meta[0]);
  auto N = parse_int(meta[1]);
  if (!D || !N || *D < 1 || *N < 1) throw FormatError(path + ": invalid dimensions");
  Activation act = Activation::parse(meta[2]);
  Eigen::MatrixXd F(*D, *N);
  auto read_row = [&](const char* what, Eigen::Index r, Eigen::MatrixXd* dst, Eigen::VectorXd* vec) {
    auto cells = next(what);
    if (static_cast<long long>(cells.size()) != *N) throw FormatError(path + ": " + what + " row has the wrong length");
    for (long long j = 0; j < *N; ++j) {
      auto v = parse_double(cells[static_cast<std::size_t>(j)]);
      if (!v) throw FormatError(path + ": non-numeric entry in " + what);
      if (dst) (*dst)(r, j) = *v;
      else (*vec)(j) = *v;
    }
  };
  for (long long k = 0; k < *D; ++k) read_row("feature matrix", k, &F, nullptr);
  Eigen::VectorXd w(*N);
  read_row("weights", 0, nullptr, &w);
  return RfmModel(std::move(F), std::move(w), act);
}

}  // namespace meandim
