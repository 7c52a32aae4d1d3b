#include "meandim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "meandim/activation.hpp"
#include "meandim/csv.hpp"
#include "meandim/dataset.hpp"
#include "meandim/estimator.hpp"
#include "meandim/heatmap_svg.hpp"
#include "meandim/mlp.hpp"
#include "meandim/parallel.hpp"
#include "meandim/peaks.hpp"
#include "meandim/replica.hpp"
#include "meandim/rfm.hpp"
#include "meandim/rng.hpp"
#include "meandim/robustness.hpp"

namespace meandim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct KindName {
  ExperimentKind kind;
  const char* name;
  const char* title;
};

constexpr KindName kKinds[] = {
    {ExperimentKind::DoubleDescentRfm, "double-descent-rfm",
     "Random feature model: train/test error and BMD against hidden width"},
    {ExperimentKind::DoubleDescentMlp, "double-descent-mlp",
     "Two-layer network on multiclass data: train/test error and BMD against hidden width"},
    {ExperimentKind::TheoryCurve, "theory-curve",
     "Asymptotic theory: generalization error and BMD against the overparameterization degree"},
    {ExperimentKind::RegularizationSweep, "regularization-sweep", "Dampening of the BMD peak by L2 regularization"},
    {ExperimentKind::TrainsetSizeSweep, "trainset-size-sweep", "Shift of the test error and BMD peaks with training set size"},
    {ExperimentKind::AdversarialInit, "adversarial-init",
     "Adversarial initialization: test error and BMD against pretraining length"},
    {ExperimentKind::RobustnessSweep, "robustness-sweep", "BMD against robustness to random sign flips"},
    {ExperimentKind::Heatmap, "heatmap", "Per-input contributions to the BMD as heatmaps, with participation ratio"},
    {ExperimentKind::DistributionComparison, "distribution-comparison",
     "Mean dimension under different input distributions"},
    {ExperimentKind::NormalizationComparison, "normalization-comparison", "BMD for different input normalization ranges"},
};

std::uint64_t rep_seed(const ExperimentConfig& c, int rep) { return c.seed + static_cast<std::uint64_t>(rep); }

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

// ---- data -----------------------------------------------------------------

struct Data {
  Dataset train;
  Dataset test;
};

class DataSource {
 public:
  explicit DataSource(const ExperimentConfig& c) : c_(c) {
    if (c.dataset == "csv") csv_ = std::make_shared<Dataset>(load_csv_dataset(c.csv_path));
  }

  int dim() const { return csv_ ? csv_->dim() : c_.input_dim; }
  int outputs() const {
    if (csv_) return csv_->label_kind == LabelKind::Binary ? 1 : csv_->n_classes;
    return c_.dataset == "teacher" ? 1 : c_.classes;
  }

  /// Same data for every grid point of a repetition; label noise included.
  Data make(int P, std::uint64_t seed) const {
    Data d;
    if (csv_) {
      const int total = csv_->size();
      const int n_test = std::max(1, static_cast<int>(std::lround(c_.csv_test_fraction * total)));
      const int avail = total - n_test;
      if (P > avail)
        throw InvalidArgument("train_size " + std::to_string(P) + " exceeds the " + std::to_string(avail) +
                              " csv rows left after the test split");
      std::vector<int> idx(static_cast<std::size_t>(total));
      std::iota(idx.begin(), idx.end(), 0);
      Rng rng = make_rng(substream_seed(seed, 2));
      for (int i = total - 1; i > 0; --i)
        std::swap(idx[static_cast<std::size_t>(i)], idx[uniform_index(rng, static_cast<std::uint64_t>(i) + 1)]);
      auto take = [&](int from, int count) {
        Dataset s;
        s.label_kind = csv_->label_kind;
        s.n_classes = csv_->n_classes;
        s.lo = csv_->lo;
        s.hi = csv_->hi;
        s.X.resize(count, csv_->dim());
        s.y.resize(static_cast<std::size_t>(count));
        for (int r = 0; r < count; ++r) {
          const int src = idx[static_cast<std::size_t>(from + r)];
          s.X.row(r) = csv_->X.row(src);
          s.y[static_cast<std::size_t>(r)] = csv_->y[static_cast<std::size_t>(src)];
        }
        s.noise_mask.assign(static_cast<std::size_t>(count), 0);
        return s;
      };
      d.test = take(0, n_test);
      d.train = take(n_test, P);
    } else if (c_.dataset == "teacher") {
      const TeacherTask task = make_teacher(c_.input_dim, c_.input, c_.teacher_noise, substream_seed(seed, 1));
      std::tie(d.train, d.test) = gen_teacher_student(c_.input_dim, P, c_.test_size, task, substream_seed(seed, 2));
    } else {
      const MulticlassTask task = make_multiclass_teacher(c_.input_dim, c_.classes, c_.input, c_.teacher_noise,
                                                          substream_seed(seed, 1), c_.image_width, c_.envelope);
      std::tie(d.train, d.test) = gen_multiclass(P, c_.test_size, task, substream_seed(seed, 2));
    }
    if (c_.train.label_noise_fraction > 0.0)
      d.train = flip_labels(d.train, c_.train.label_noise_fraction, substream_seed(seed, 3));
    return d;
  }

 private:
  const ExperimentConfig& c_;
  std::shared_ptr<Dataset> csv_;
};

// ---- models ---------------------------------------------------------------

struct CellResult {
  double train_err = kNaN;
  double test_err = kNaN;
  double bmd = kNaN;
  double train_err_corrupted = kNaN;
  double train_err_clean = kNaN;
};

TrainConfig cell_train_config(const ExperimentConfig& c, std::uint64_t seed) {
  TrainConfig t = c.train;
  t.seed = substream_seed(seed, 4);
  t.record_every = std::max(1, t.epochs);
  return t;
}

TrainedRfm train_rfm(const ExperimentConfig& c, const Data& d, int N, std::uint64_t seed, int grid_index) {
  if (d.train.label_kind != LabelKind::Binary) throw InvalidArgument("the random feature model needs binary labels");
  const RfmModel skeleton =
      RfmModel::random(d.train.dim(), N, Activation::parse(c.activation), substream_seed(seed, 100 + grid_index));
  if (c.train.optimizer == OptimizerKind::ClosedFormRidge) return train_rfm_ridge(skeleton, d.train, c.train.lambda, &d.test);
  return train_gd(skeleton, d.train, cell_train_config(c, seed), &d.test);
}

TrainedMlp train_mlp(const ExperimentConfig& c, const Data& d, int H, int outputs, std::uint64_t seed, int grid_index) {
  const Mlp init = Mlp::init(d.train.dim(), H, outputs, substream_seed(seed, 100 + grid_index));
  return train_gd(init, d.train, cell_train_config(c, seed), &d.test);
}

double rfm_bmd(const ExperimentConfig& c, const RfmModel& m, std::uint64_t seed) {
  if (c.md_samples == 0) return analytic_bmd(m);
  const RfmScore score(m);
  return estimate_md_binary_fast(score, m.D(), c.md_samples, substream_seed(seed, 5)).md.value_or(kNaN);
}

double mlp_bmd(const ExperimentConfig& c, const Mlp& net, std::uint64_t seed) {
  const MlpScore score(net);
  const auto profiles =
      estimate_md_per_output(score, InputSampler::binary(net.input_dim()), c.md_samples, substream_seed(seed, 5));
  return mean_md(profiles).value_or(kNaN);
}

void fill_errors(CellResult& r, const TrainMetrics& t, const std::vector<int>& predicted, const Dataset& train) {
  r.train_err = t.train_error;
  r.test_err = t.test_error;
  const NoiseSplitError split = noise_split_error(predicted, train);
  r.train_err_corrupted = split.corrupted.value_or(kNaN);
  r.train_err_clean = split.clean.value_or(kNaN);
}

CellResult rfm_cell(const ExperimentConfig& c, const DataSource& src, int P, int N, int rep, int grid_index,
                    const std::string& checkpoint = {}) {
  const std::uint64_t seed = rep_seed(c, rep);
  const Data d = src.make(P, seed);
  const TrainedRfm t = train_rfm(c, d, N, seed, grid_index);
  if (!checkpoint.empty() && rep == 0) save_rfm_checkpoint(checkpoint, t.model);
  CellResult r;
  fill_errors(r, t, predict_labels(t.model, d.train.X), d.train);
  r.bmd = rfm_bmd(c, t.model, seed);
  return r;
}

// ---- cell scheduling ------------------------------------------------------

using Samples = std::vector<std::vector<std::vector<double>>>;  // [grid][rep][metric]

template <class Cell, class Describe>
Samples run_cells(std::size_t grid, int reps, int jobs, Cell&& cell, Describe&& describe) {
  Samples out(grid, std::vector<std::vector<double>>(static_cast<std::size_t>(reps)));
  parallel_for(grid * static_cast<std::size_t>(reps), jobs, [&](std::size_t k) {
    const std::size_t g = k / static_cast<std::size_t>(reps);
    const int rep = static_cast<int>(k % static_cast<std::size_t>(reps));
    try {
      out[g][static_cast<std::size_t>(rep)] = cell(g, rep);
    } catch (const std::exception& e) {
      throw ExperimentError("cell " + describe(g) + ", rep " + std::to_string(rep) + ": " + e.what());
    }
  });
  return out;
}

std::vector<double> to_doubles(const std::vector<int>& v) { return std::vector<double>(v.begin(), v.end()); }

std::string header(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "experiment: " << to_string(c.kind) << "\n";
  os << "figure: " << figure_title(c.kind) << "\n";
  os << "repetitions: " << c.repetitions << " (seeds " << c.seed << " .. " << c.seed + c.repetitions - 1 << ")\n";
  return os.str();
}

const std::vector<std::string> kRfmMetrics{"train_err", "test_err", "bmd", "train_err_corrupted", "train_err_clean"};

std::vector<double> as_row(const CellResult& r) {
  return {r.train_err, r.test_err, r.bmd, r.train_err_corrupted, r.train_err_clean};
}

std::string checkpoint_name(int N) { return "model_width_" + std::to_string(N) + ".ckpt"; }

SweepResult rfm_width_sweep(const ExperimentConfig& c, const DataSource& src, int P, int jobs,
                            const std::string& checkpoint_dir = {}) {
  const auto samples = run_cells(
      c.widths.size(), c.repetitions, jobs,
      [&](std::size_t g, int rep) {
        const std::string ckpt = checkpoint_dir.empty() ? std::string() : join_path(checkpoint_dir, checkpoint_name(c.widths[g]));
        return as_row(rfm_cell(c, src, P, c.widths[g], rep, static_cast<int>(g), ckpt));
      },
      [&](std::size_t g) { return "width = " + std::to_string(c.widths[g]) + ", train_size = " + std::to_string(P); });
  return aggregate_sweep("width", to_doubles(c.widths), kRfmMetrics, samples);
}

// Short sweeps still get their CSV; only the peak report needs a real grid.
std::string peak_section(const SweepResult& s, const std::string& first, const std::string& second,
                         const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (s.rows() < 5) return "peak report skipped: " + std::to_string(s.rows()) + " grid points, need at least 5\n";
  return format_peak_report(summarize_peaks(s, first, second, pairs), "width");
}

void add_sweep(ExperimentOutput& out, const std::string& dir, const std::string& file, const SweepResult& s) {
  write_sweep_csv(join_path(dir, file), s);
  out.files.push_back(file);
}

// ---- kinds ----------------------------------------------------------------

ExperimentOutput run_double_descent_rfm(const ExperimentConfig& c, const std::string& dir, int jobs) {
  const DataSource src(c);
  ExperimentOutput out;
  const SweepResult s = rfm_width_sweep(c, src, c.train_size, jobs, c.save_models ? dir : std::string());
  add_sweep(out, dir, "double_descent_rfm.csv", s);
  if (c.save_models)
    for (int N : c.widths) out.files.push_back(checkpoint_name(N));
  out.summary = header(c) + "train_size: " + std::to_string(c.train_size) + "\n" +
                peak_section(s, "test_err", "bmd", {{"test_err", "bmd"}});
  return out;
}

ExperimentOutput run_mlp_width_sweep(const ExperimentConfig& c, const std::string& dir, int jobs, bool robustness) {
  const DataSource src(c);
  std::vector<std::string> metrics{"train_err", "test_err", "bmd", "train_err_corrupted", "train_err_clean"};
  if (robustness) {
    metrics.push_back("flips");
    metrics.push_back("cap_hits");
  }
  const auto samples = run_cells(
      c.widths.size(), c.repetitions, jobs,
      [&](std::size_t g, int rep) {
        const std::uint64_t seed = rep_seed(c, rep);
        const Data d = src.make(c.train_size, seed);
        const TrainedMlp t = train_mlp(c, d, c.widths[g], src.outputs(), seed, static_cast<int>(g));
        CellResult r;
        fill_errors(r, t, t.model.predict(d.train.X), d.train);
        r.bmd = mlp_bmd(c, t.model, seed);
        std::vector<double> row = as_row(r);
        if (robustness) {
          const MlpClassifier cls(t.model);
          const RobustnessResult rob = robustness_flip_count(cls, d.test, substream_seed(seed, 6));
          row.push_back(rob.mean_flips.value_or(kNaN));
          row.push_back(rob.cap_hits);
        }
        return row;
      },
      [&](std::size_t g) { return "width = " + std::to_string(c.widths[g]); });
  const SweepResult s = aggregate_sweep("width", to_doubles(c.widths), metrics, samples);
  ExperimentOutput out;
  add_sweep(out, dir, robustness ? "robustness_sweep.csv" : "double_descent_mlp.csv", s);
  std::vector<std::pair<std::string, std::string>> pairs{{"test_err", "bmd"}};
  if (robustness) pairs.emplace_back("bmd", "flips");
  out.summary = header(c) + peak_section(s, "test_err", "bmd", pairs);
  if (robustness) {
    const PeakInfo low = find_peak(s.x, [&] {
      std::vector<double> neg = s.column("flips");
      for (double& v : neg) v = -v;
      return neg;
    }(), "flips");
    out.summary += "minimum flips: width = " + format_double(low.coordinate) + " (" + format_double(-low.value) + ")\n";
  }
  return out;
}

ReplicaInput theory_template(const ExperimentConfig& c, double lambda) {
  const KappaSet k = compute_kappas(Activation::parse(c.activation));
  return ReplicaInput::from_alpha_T(1.0, c.alpha_T, lambda, c.train.loss, k, c.teacher_noise);
}

std::string theory_peaks(const std::vector<CurveRow>& rows) {
  std::vector<double> x;
  std::vector<double> eg;
  std::vector<double> bmd;
  for (const auto& r : rows) {
    x.push_back(r.inv_alpha);
    eg.push_back(r.obs.eps_g);
    bmd.push_back(r.obs.bmd);
  }
  std::ostringstream os;
  const PeakInfo pe = find_peak(x, eg, "eps_g");
  const PeakInfo pb = find_peak(x, bmd, "bmd");
  for (const PeakInfo* p : {&pe, &pb}) {
    os << "peak " << p->metric << ": inv_alpha = " << format_double(p->coordinate) << " (grid index " << p->index
       << ", value " << format_double(p->value) << ")" << (p->interior ? "" : " [no interior peak]") << "\n";
  }
  os << "peak grid distance eps_g vs bmd: " << (pe.index > pb.index ? pe.index - pb.index : pb.index - pe.index)
     << "\n";
  auto list = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i : local_maxima(v)) s += (s.empty() ? "" : ", ") + format_double(x[i]);
    return s.empty() ? std::string("none") : s;
  };
  os << "local maxima eps_g at inv_alpha: " << list(eg) << "\n";
  os << "local maxima bmd at inv_alpha: " << list(bmd) << "\n";
  std::size_t lo = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].inv_alpha < rows[lo].inv_alpha) lo = i;
  os << "bmd at smallest inv_alpha (" << format_double(rows[lo].inv_alpha) << "): " << format_double(rows[lo].obs.bmd)
     << "\n";
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const CurveRow& r) { return !r.converged; });
  os << "unconverged points: " << failed << "\n";
  return os.str();
}

ExperimentOutput run_theory_curve(const ExperimentConfig& c, const std::string& dir) {
  ExperimentOutput out;
  const ReplicaInput tmpl = theory_template(c, c.train.lambda);
  const auto rows = sweep_curve(tmpl, c.inv_alpha_grid);
  write_curve_csv(join_path(dir, "theory_curve.csv"), rows);
  out.files.push_back("theory_curve.csv");
  out.summary = header(c) + "alpha_T: " + format_double(c.alpha_T) + ", lambda: " + format_double(c.train.lambda) +
                ", loss: " + to_string(c.train.loss) + "\n" + theory_peaks(rows);
  if (c.optimal_lambda) {
    std::vector<CurveRow> opt;
    for (double ia : c.inv_alpha_grid) {
      ReplicaInput in = tmpl;
      in.alpha = 1.0 / ia;
      in.alpha_D = in.alpha / c.alpha_T;
      CurveRow row;
      row.inv_alpha = ia;
      row.alpha_T = c.alpha_T;
      row.loss = c.train.loss;
      try {
        const OptimalLambda best = optimal_lambda(in);
        row.lambda = best.lambda;
        row.obs = best.obs;
        row.q_d = best.params.q_d;
        row.p_d = best.params.p_d;
        row.Q_d = best.params.Q_d(in.kappas);
        row.converged = true;
      } catch (const NumericalError&) {
        row.lambda = kNaN;
        row.obs = {kNaN, kNaN, kNaN, kNaN};
        row.q_d = row.p_d = row.Q_d = kNaN;
      }
      opt.push_back(row);
    }
    write_curve_csv(join_path(dir, "theory_optimal_lambda.csv"), opt);
    out.files.push_back("theory_optimal_lambda.csv");
    out.summary += "optimal-lambda curve:\n" + theory_peaks(opt);
  }
  return out;
}

std::string lambda_tag(std::size_t i) { return "lambda_" + std::to_string(i); }

ExperimentOutput run_regularization_sweep(const ExperimentConfig& c, const std::string& dir, int jobs) {
  ExperimentOutput out;
  out.summary = header(c) + "source: " + c.source + "\n";
  std::vector<double> peaks(c.lambdas.size(), kNaN);
  if (c.source == "theory") {
    std::vector<std::vector<CurveRow>> curves(c.lambdas.size());
    parallel_for(c.lambdas.size(), jobs, [&](std::size_t i) {
      try {
        curves[i] = sweep_curve(theory_template(c, c.lambdas[i]), c.inv_alpha_grid);
      } catch (const std::exception& e) {
        throw ExperimentError("lambda = " + format_double(c.lambdas[i]) + ": " + e.what());
      }
    });
    for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
      const std::string file = "theory_" + lambda_tag(i) + ".csv";
      write_curve_csv(join_path(dir, file), curves[i]);
      out.files.push_back(file);
      std::vector<double> x;
      std::vector<double> b;
      for (const auto& r : curves[i]) {
        x.push_back(r.inv_alpha);
        b.push_back(r.obs.bmd);
      }
      const PeakInfo p = find_peak(x, b, "bmd");
      peaks[i] = p.value;
      out.summary += "lambda = " + format_double(c.lambdas[i]) + ": peak bmd " + format_double(p.value) +
                     " at inv_alpha = " + format_double(p.coordinate) + "\n";
    }
  } else {
    const DataSource src(c);
    for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
      ExperimentConfig ci = c;
      ci.train.lambda = c.lambdas[i];
      const SweepResult s = rfm_width_sweep(ci, src, c.train_size, jobs);
      const std::string file = "empirical_" + lambda_tag(i) + ".csv";
      add_sweep(out, dir, file, s);
      const PeakInfo p = find_peak(s.x, s.column("bmd"), "bmd");
      peaks[i] = p.value;
      out.summary += "lambda = " + format_double(c.lambdas[i]) + ": peak bmd " + format_double(p.value) +
                     " at width = " + format_double(p.coordinate) + "\n";
    }
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < peaks.size(); ++i) decreasing = decreasing && peaks[i] < peaks[i - 1];
  out.summary += std::string("peak bmd strictly decreasing along the lambda list: ") + (decreasing ? "yes" : "no") + "\n";
  return out;
}

ExperimentOutput run_trainset_size_sweep(const ExperimentConfig& c, const std::string& dir, int jobs) {
  const DataSource src(c);
  ExperimentOutput out;
  out.summary = header(c);
  for (std::size_t i = 0; i < c.train_sizes.size(); ++i) {
    const SweepResult s = rfm_width_sweep(c, src, c.train_sizes[i], jobs);
    const std::string file = "train_size_" + std::to_string(c.train_sizes[i]) + ".csv";
    add_sweep(out, dir, file, s);
    const PeakInfo pt = find_peak(s.x, s.column("test_err"), "test_err");
    const PeakInfo pb = find_peak(s.x, s.column("bmd"), "bmd");
    out.summary += "train_size = " + std::to_string(c.train_sizes[i]) + ": test_err peak at width " +
                   format_double(pt.coordinate) + ", bmd peak at width " + format_double(pb.coordinate) + "\n";
  }
  return out;
}

ExperimentOutput run_adversarial_init(const ExperimentConfig& c, const std::string& dir, int jobs) {
  const DataSource src(c);
  const int H = c.widths.front();
  const auto samples = run_cells(
      c.pretrain_epochs.size(), c.repetitions, jobs,
      [&](std::size_t g, int rep) {
        const std::uint64_t seed = rep_seed(c, rep);
        const Data d = src.make(c.train_size, seed);
        const Mlp init = Mlp::init(d.train.dim(), H, src.outputs(), substream_seed(seed, 100));
        const AdversarialResult res = adversarial_init_protocol(init, d.train, d.test, cell_train_config(c, seed),
                                                                c.pretrain_epochs[g], c.main_epochs);
        return std::vector<double>{res.model.train_error, res.model.test_error, mlp_bmd(c, res.model.model, seed)};
      },
      [&](std::size_t g) { return "pretrain_epochs = " + std::to_string(c.pretrain_epochs[g]); });
  const SweepResult s =
      aggregate_sweep("pretrain_epochs", to_doubles(c.pretrain_epochs), {"train_err", "test_err", "bmd"}, samples);
  ExperimentOutput out;
  add_sweep(out, dir, "adversarial_init.csv", s);
  out.summary = header(c) + "width: " + std::to_string(H) + ", main epochs: " + std::to_string(c.main_epochs) + "\n";
  for (const char* m : {"bmd", "test_err"}) {
    const auto rho = spearman(s.x, s.column(m));
    out.summary += std::string("spearman(pretrain_epochs, ") + m + "): " +
                   (rho ? format_double_fixed(*rho, 4) : std::string("undefined")) + "\n";
  }
  return out;
}

ExperimentOutput run_heatmap(const ExperimentConfig& c, const std::string& dir, int jobs) {
  const DataSource src(c);
  const int D = src.dim();
  const int width = c.image_width > 0 ? c.image_width : D;
  if (D % width != 0)
    throw ConfigError("image_width", "input dimension " + std::to_string(D) + " is not a multiple of " +
                                         std::to_string(width));
  const int height = D / width;
  std::vector<std::vector<double>> rep0_tau(c.widths.size());
  const auto samples = run_cells(
      c.widths.size(), c.repetitions, jobs,
      [&](std::size_t g, int rep) {
        const std::uint64_t seed = rep_seed(c, rep);
        const Data d = src.make(c.train_size, seed);
        InfluenceProfile prof;
        double train_err = kNaN;
        double test_err = kNaN;
        if (c.model == "mlp") {
          const TrainedMlp t = train_mlp(c, d, c.widths[g], src.outputs(), seed, static_cast<int>(g));
          train_err = t.train_error;
          test_err = t.test_error;
          const MlpScore score(t.model);
          const auto all =
              estimate_md_per_output(score, InputSampler::binary(D), c.md_samples, substream_seed(seed, 5));
          const int k = std::min<int>(c.heatmap_class, static_cast<int>(all.size()) - 1);
          prof = all[static_cast<std::size_t>(k)];
        } else {
          const TrainedRfm t = train_rfm(c, d, c.widths[g], seed, static_cast<int>(g));
          train_err = t.train_error;
          test_err = t.test_error;
          prof = estimate_md_binary_fast(RfmScore(t.model), D, c.md_samples, substream_seed(seed, 5));
        }
        if (rep == 0) rep0_tau[g] = prof.tau_sq;
        return std::vector<double>{train_err, test_err, prof.md.value_or(kNaN), prof.participation_ratio.value_or(kNaN)};
      },
      [&](std::size_t g) { return "width = " + std::to_string(c.widths[g]); });
  const SweepResult s =
      aggregate_sweep("width", to_doubles(c.widths), {"train_err", "test_err", "md", "participation_ratio"}, samples);
  ExperimentOutput out;
  add_sweep(out, dir, "heatmap_sweep.csv", s);
  for (std::size_t g = 0; g < c.widths.size(); ++g) {
    InfluenceProfile p;
    p.tau_sq = rep0_tau[g];
    const std::string base = "heatmap_width_" + std::to_string(c.widths[g]);
    emit_heatmap_svg(influence_heatmap(p, width, height), join_path(dir, base + ".svg"));
    write_profile_csv(join_path(dir, base + ".csv"), p);
    out.files.push_back(base + ".svg");
    out.files.push_back(base + ".csv");
  }
  out.summary = header(c) + "class: " + std::to_string(c.heatmap_class) + ", image: " + std::to_string(width) + " x " +
                std::to_string(height) + "\n" +
                peak_section(s, "test_err", "md", {{"md", "participation_ratio"}});
  return out;
}

ExperimentOutput run_distribution_comparison(const ExperimentConfig& c, const std::string& dir, int jobs) {
  const DataSource src(c);
  const int D = src.dim();
  std::vector<std::string> metrics{"train_err", "test_err"};
  for (SamplerKind k : c.samplers) {
    metrics.push_back("md_" + to_string(k));
    metrics.push_back("md_" + to_string(k) + "_se");
  }
  const auto samples = run_cells(
      c.widths.size(), c.repetitions, jobs,
      [&](std::size_t g, int rep) {
        const std::uint64_t seed = rep_seed(c, rep);
        const Data d = src.make(c.train_size, seed);
        std::unique_ptr<ScoreFunction> score;
        std::unique_ptr<TrainedRfm> rfm;
        std::unique_ptr<TrainedMlp> mlp;
        std::vector<double> row;
        if (c.model == "mlp") {
          mlp = std::make_unique<TrainedMlp>(train_mlp(c, d, c.widths[g], src.outputs(), seed, static_cast<int>(g)));
          score = std::make_unique<MlpScore>(mlp->model);
          row = {mlp->train_error, mlp->test_error};
        } else {
          rfm = std::make_unique<TrainedRfm>(train_rfm(c, d, c.widths[g], seed, static_cast<int>(g)));
          score = std::make_unique<RfmScore>(rfm->model);
          row = {rfm->train_error, rfm->test_error};
        }
        const auto rows = std::make_shared<const Eigen::MatrixXd>(d.train.X);
        for (std::size_t j = 0; j < c.samplers.size(); ++j) {
          InputSampler sampler = InputSampler::binary(D);
          switch (c.samplers[j]) {
            case SamplerKind::Binary: break;
            case SamplerKind::Gaussian: sampler = InputSampler::gaussian(D); break;
            case SamplerKind::Uniform: sampler = InputSampler::uniform(D, -1.0, 1.0); break;
            case SamplerKind::Empirical: sampler = InputSampler::empirical(rows, d.train.lo, d.train.hi); break;
          }
          // Common seed across samplers: differences come from the distributions.
          const auto profiles = estimate_md_per_output(*score, sampler, c.md_samples, substream_seed(seed, 5));
          double se = 0.0;
          for (const auto& p : profiles) se += p.std_err_md * p.std_err_md;
          row.push_back(mean_md(profiles).value_or(kNaN));
          row.push_back(std::sqrt(se) / static_cast<double>(profiles.size()));
        }
        return row;
      },
      [&](std::size_t g) { return "width = " + std::to_string(c.widths[g]); });
  const SweepResult s = aggregate_sweep("width", to_doubles(c.widths), metrics, samples);
  ExperimentOutput out;
  add_sweep(out, dir, "distribution_comparison.csv", s);
  out.summary = header(c);
  for (SamplerKind k : c.samplers) {
    const std::string m = "md_" + to_string(k);
    const PeakInfo p = find_peak(s.x, s.column(m), m);
    out.summary += "peak " + m + ": width = " + format_double(p.coordinate) + " (value " + format_double(p.value) +
                   ")" + (p.interior ? "" : " [no interior peak]") + "\n";
  }
  return out;
}

ExperimentOutput run_normalization_comparison(const ExperimentConfig& c, const std::string& dir, int jobs) {
  const DataSource src(c);
  std::vector<std::string> metrics;
  for (double r : c.ranges) {
    metrics.push_back("test_err_range_" + format_double(r));
    metrics.push_back("bmd_range_" + format_double(r));
  }
  const auto samples = run_cells(
      c.widths.size(), c.repetitions, jobs,
      [&](std::size_t g, int rep) {
        const std::uint64_t seed = rep_seed(c, rep);
        const Data base = src.make(c.train_size, seed);
        std::vector<double> row;
        for (double r : c.ranges) {
          Data d{renormalize(base.train, -r, r), renormalize(base.test, -r, r)};
          const TrainedRfm t = train_rfm(c, d, c.widths[g], seed, static_cast<int>(g));
          row.push_back(t.test_error);
          row.push_back(rfm_bmd(c, t.model, seed));
        }
        return row;
      },
      [&](std::size_t g) { return "width = " + std::to_string(c.widths[g]); });
  const SweepResult s = aggregate_sweep("width", to_doubles(c.widths), metrics, samples);
  ExperimentOutput out;
  add_sweep(out, dir, "normalization_comparison.csv", s);
  out.summary = header(c);
  for (double r : c.ranges) {
    const std::string m = "bmd_range_" + format_double(r);
    const PeakInfo p = find_peak(s.x, s.column(m), m);
    out.summary += "range [-" + format_double(r) + ", " + format_double(r) + "]: bmd peak at width " +
                   format_double(p.coordinate) + " (value " + format_double(p.value) + ")\n";
  }
  return out;
}

void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError(field, msg);
}

template <class T>
void require_positive(const std::vector<T>& v, const std::string& field) {
  require(!v.empty(), field, "grid is empty");
  for (const T& x : v) require(x > 0, field, "grid values must be positive");
}

}  // namespace

std::string to_string(ExperimentKind k) {
  for (const auto& e : kKinds)
    if (e.kind == k) return e.name;
  throw InvalidArgument("unknown experiment kind");
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  for (const auto& e : kKinds)
    if (s == e.name) return e.kind;
  throw ConfigError("kind", "unknown experiment kind '" + s + "'");
}

std::string figure_title(ExperimentKind k) {
  for (const auto& e : kKinds)
    if (e.kind == k) return e.title;
  throw InvalidArgument("unknown experiment kind");
}

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
  ExperimentConfig c;
  c.kind = parse_experiment_kind(cfg.get_string("kind"));
  const bool mlp_kind = c.kind == ExperimentKind::DoubleDescentMlp || c.kind == ExperimentKind::AdversarialInit ||
                        c.kind == ExperimentKind::RobustnessSweep;
  c.model = cfg.get_string("model", mlp_kind ? "mlp" : "rfm");
  c.dataset = cfg.get_string("dataset", c.model == "mlp" ? "multiclass" : "teacher");
  c.csv_path = cfg.get_string("csv_path", "");
  c.csv_test_fraction = cfg.get_double("csv_test_fraction", c.csv_test_fraction);
  c.input_dim = static_cast<int>(cfg.get_int("input_dim", c.input_dim));
  c.train_size = static_cast<int>(cfg.get_int("train_size", c.train_size));
  c.test_size = static_cast<int>(cfg.get_int("test_size", c.test_size));
  c.classes = static_cast<int>(cfg.get_int("classes", c.classes));
  c.teacher_noise = cfg.get_double("teacher_noise", c.teacher_noise);
  try {
    c.input = parse_sampler_kind(cfg.get_string("input", "binary"));
  } catch (const InvalidArgument& e) {
    throw ConfigError("input", e.what());
  }
  c.image_width = static_cast<int>(cfg.get_int("image_width", c.image_width));
  c.envelope = cfg.get_double("envelope", c.envelope);
  c.activation = cfg.get_string("activation", c.activation);
  try {
    Activation::parse(c.activation);
  } catch (const InvalidArgument& e) {
    throw ConfigError("activation", e.what());
  }

  TrainConfig& t = c.train;
  try {
    t.loss = parse_loss_kind(cfg.get_string("loss", c.model == "mlp" ? "ce" : "mse"));
  } catch (const InvalidArgument& e) {
    throw ConfigError("loss", e.what());
  }
  try {
    t.optimizer = parse_optimizer_kind(cfg.get_string("optimizer", c.model == "mlp" ? "adam" : "closed-form-ridge"));
  } catch (const InvalidArgument& e) {
    throw ConfigError("optimizer", e.what());
  }
  t.lambda = cfg.get_double("lambda", c.model == "mlp" ? 0.0 : 1e-4);
  t.epochs = static_cast<int>(cfg.get_int("epochs", t.epochs));
  t.batch_size = static_cast<int>(cfg.get_int("batch_size", t.batch_size));
  t.learning_rate = cfg.get_double("learning_rate", t.learning_rate);
  t.label_noise_fraction = cfg.get_double("label_noise", 0.0);

  c.widths = cfg.get_int_list("widths", {});
  c.lambdas = cfg.get_double_list("lambdas", {});
  c.train_sizes = cfg.get_int_list("train_sizes", {});
  c.pretrain_epochs = cfg.get_int_list("pretrain_epochs", {});
  c.main_epochs = static_cast<int>(cfg.get_int("main_epochs", c.main_epochs));
  c.ranges = cfg.get_double_list("ranges", {});
  if (cfg.has("samplers")) {
    std::string list = cfg.get_string("samplers");
    for (const auto& part : split_csv_line(list)) {
      try {
        c.samplers.push_back(parse_sampler_kind(std::string(trim(part))));
      } catch (const InvalidArgument& e) {
        throw ConfigError("samplers", e.what());
      }
    }
  }
  c.source = cfg.get_string("source", c.source);
  c.alpha_T = cfg.get_double("alpha_t", c.alpha_T);
  c.inv_alpha_grid = cfg.get_double_list("inv_alpha_grid", {});
  c.optimal_lambda = cfg.get_bool("optimal_lambda", false);
  const long long md = cfg.get_int("md_samples", 0);
  if (md < 0) throw ConfigError("md_samples", "must be non-negative");
  c.md_samples = static_cast<std::size_t>(md);
  c.heatmap_class = static_cast<int>(cfg.get_int("heatmap_class", 0));
  c.save_models = cfg.get_bool("save_models", false);
  c.repetitions = static_cast<int>(cfg.get_int("repetitions", 1));
  const long long seed = cfg.get_int("seed", 0);
  if (seed < 0) throw ConfigError("seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);

  const auto unused = cfg.unused_keys();
  for (const auto& k : unused)
    if (k != "out") throw ConfigError(k, "unknown field for experiment kind " + to_string(c.kind));
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  require(repetitions >= 1, "repetitions", "must be at least 1");
  require(model == "rfm" || model == "mlp", "model", "must be rfm or mlp");
  require(dataset == "teacher" || dataset == "multiclass" || dataset == "csv", "dataset",
          "must be teacher, multiclass or csv");
  require(dataset != "csv" || !csv_path.empty(), "csv_path", "required for dataset = csv");
  require(csv_test_fraction > 0.0 && csv_test_fraction < 1.0, "csv_test_fraction", "must lie in (0, 1)");
  require(input_dim >= 1, "input_dim", "must be positive");
  require(train_size >= 1, "train_size", "must be positive");
  require(test_size >= 1, "test_size", "must be positive");
  require(classes >= 2, "classes", "must be at least 2");
  require(teacher_noise >= 0.0, "teacher_noise", "must be non-negative");
  require(envelope >= 0.0, "envelope", "must be non-negative");
  require(train.label_noise_fraction >= 0.0 && train.label_noise_fraction <= 1.0, "label_noise", "must lie in [0, 1]");
  require(train.lambda >= 0.0, "lambda", "must be non-negative");
  require(train.epochs >= 0, "epochs", "must be non-negative");
  require(train.batch_size >= 1, "batch_size", "must be positive");
  require(train.learning_rate > 0.0, "learning_rate", "must be positive");
  require(train.optimizer != OptimizerKind::ClosedFormRidge || train.loss == LossKind::Mse, "optimizer",
          "closed-form-ridge requires loss = mse");
  require(train.optimizer != OptimizerKind::ClosedFormRidge || model == "rfm", "optimizer",
          "closed-form-ridge applies to the random feature model only");
  const bool needs_mc = model == "mlp" || kind == ExperimentKind::Heatmap ||
                        kind == ExperimentKind::DistributionComparison;
  require(!save_models || kind == ExperimentKind::DoubleDescentRfm, "save_models",
          "only double-descent-rfm writes model checkpoints");
  require(!needs_mc || md_samples >= 100, "md_samples", "at least 100 Monte Carlo samples are required");

  switch (kind) {
    case ExperimentKind::TheoryCurve:
      require(alpha_T > 0.0, "alpha_t", "must be positive");
      require_positive(inv_alpha_grid, "inv_alpha_grid");
      break;
    case ExperimentKind::RegularizationSweep:
      require(source == "theory" || source == "empirical", "source", "must be theory or empirical");
      require(!lambdas.empty(), "lambdas", "grid is empty");
      for (double l : lambdas) require(l >= 0.0, "lambdas", "values must be non-negative");
      if (source == "theory") {
        require(alpha_T > 0.0, "alpha_t", "must be positive");
        require_positive(inv_alpha_grid, "inv_alpha_grid");
      } else {
        require_positive(widths, "widths");
        require(model == "rfm", "model", "the empirical regularization sweep uses the random feature model");
      }
      break;
    case ExperimentKind::TrainsetSizeSweep:
      require_positive(train_sizes, "train_sizes");
      require_positive(widths, "widths");
      require(model == "rfm", "model", "the training-set-size sweep uses the random feature model");
      break;
    case ExperimentKind::AdversarialInit:
      require(!pretrain_epochs.empty(), "pretrain_epochs", "grid is empty");
      for (int e : pretrain_epochs) require(e >= 0, "pretrain_epochs", "values must be non-negative");
      require(widths.size() == 1, "widths", "adversarial-init takes exactly one width");
      require(widths.front() > 0, "widths", "width must be positive");
      require(model == "mlp", "model", "adversarial-init uses the two-layer network");
      require(main_epochs >= 0, "main_epochs", "must be non-negative");
      break;
    case ExperimentKind::DistributionComparison:
      require_positive(widths, "widths");
      require(!samplers.empty(), "samplers", "list is empty");
      break;
    case ExperimentKind::NormalizationComparison:
      require_positive(widths, "widths");
      require_positive(ranges, "ranges");
      require(model == "rfm", "model", "the normalization comparison uses the random feature model");
      break;
    case ExperimentKind::DoubleDescentRfm:
      require(model == "rfm", "model", "double-descent-rfm uses the random feature model");
      require_positive(widths, "widths");
      break;
    case ExperimentKind::DoubleDescentMlp:
    case ExperimentKind::RobustnessSweep:
      require(model == "mlp", "model", "this experiment uses the two-layer network");
      require_positive(widths, "widths");
      break;
    case ExperimentKind::Heatmap:
      require_positive(widths, "widths");
      require(heatmap_class >= 0, "heatmap_class", "must be non-negative");
      break;
  }
}

ExperimentOutput run_experiment(const ExperimentConfig& config, const std::string& out_dir, int jobs) {
  config.validate();
  if (jobs < 1) throw InvalidArgument("jobs must be at least 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + out_dir + "': " + ec.message());
  ExperimentOutput out;
  switch (config.kind) {
    case ExperimentKind::DoubleDescentRfm: out = run_double_descent_rfm(config, out_dir, jobs); break;
    case ExperimentKind::DoubleDescentMlp: out = run_mlp_width_sweep(config, out_dir, jobs, false); break;
    case ExperimentKind::RobustnessSweep: out = run_mlp_width_sweep(config, out_dir, jobs, true); break;
    case ExperimentKind::TheoryCurve: out = run_theory_curve(config, out_dir); break;
    case ExperimentKind::RegularizationSweep: out = run_regularization_sweep(config, out_dir, jobs); break;
    case ExperimentKind::TrainsetSizeSweep: out = run_trainset_size_sweep(config, out_dir, jobs); break;
    case ExperimentKind::AdversarialInit: out = run_adversarial_init(config, out_dir, jobs); break;
    case ExperimentKind::Heatmap: out = run_heatmap(config, out_dir, jobs); break;
    case ExperimentKind::DistributionComparison: out = run_distribution_comparison(config, out_dir, jobs); break;
    case ExperimentKind::NormalizationComparison: out = run_normalization_comparison(config, out_dir, jobs); break;
  }
  write_text_file(join_path(out_dir, "summary.txt"), out.summary);
  out.files.push_back("summary.txt");
  return out;
}

}  // namespace meandim
