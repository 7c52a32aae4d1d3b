#include <CLI11.hpp>

#include <iostream>
#include <memory>

#include "meandim/config.hpp"
#include "meandim/csv.hpp"
#include "meandim/dataset.hpp"
#include "meandim/estimator.hpp"
#include "meandim/experiment.hpp"
#include "meandim/replica.hpp"
#include "meandim/rfm.hpp"

using namespace meandim;

namespace {

int cmd_run(const std::string& path, std::string out, int jobs) {
  const Config cfg = Config::load(path);
  const ExperimentConfig ec = ExperimentConfig::from_config(cfg);
  if (out.empty()) out = cfg.get_string("out", "out/" + to_string(ec.kind));
  const ExperimentOutput res = run_experiment(ec, out, jobs);
  for (const auto& f : res.files) std::cout << "wrote " << out << "/" << f << "\n";
  std::cout << res.summary;
  return 0;
}

int cmd_md(const std::string& checkpoint, const std::string& sampler_name, std::size_t samples, std::uint64_t seed,
           const std::string& data, const std::string& profile_csv, const std::string& summary_json, int threads) {
  const RfmModel model = load_rfm_checkpoint(checkpoint);
  const SamplerKind kind = parse_sampler_kind(sampler_name);
  const int D = model.D();
  std::unique_ptr<InputSampler> sampler;
  switch (kind) {
    case SamplerKind::Binary: sampler = std::make_unique<InputSampler>(InputSampler::binary(D)); break;
    case SamplerKind::Gaussian: sampler = std::make_unique<InputSampler>(InputSampler::gaussian(D)); break;
    case SamplerKind::Uniform: sampler = std::make_unique<InputSampler>(InputSampler::uniform(D, -1.0, 1.0)); break;
    case SamplerKind::Empirical: {
      if (data.empty()) throw InvalidArgument("--sampler empirical needs --data <csv>");
      const Dataset ds = load_csv_dataset(data);
      if (ds.dim() != D)
        throw InvalidArgument("data has " + std::to_string(ds.dim()) + " features, the model expects " +
                              std::to_string(D));
      sampler = std::make_unique<InputSampler>(
          InputSampler::empirical(std::make_shared<const Eigen::MatrixXd>(ds.X), ds.lo, ds.hi));
      break;
    }
  }
  EstimatorOptions opt;
  opt.threads = threads;
  const RfmScore score(model);
  const InfluenceProfile p = estimate_md(score, *sampler, samples, seed, opt);
  std::cout << "sampler: " << to_string(kind) << "\n";
  std::cout << "md: " << (p.md ? format_double(*p.md) : std::string("undefined (variance below floor)")) << "\n";
  std::cout << "std_err: " << format_double(p.std_err_md) << "\n";
  std::cout << "variance: " << format_double(p.sigma_sq) << "\n";
  std::cout << "participation_ratio: "
            << (p.participation_ratio ? format_double(*p.participation_ratio) : std::string("undefined")) << "\n";
  if (model.w().squaredNorm() > 0.0 && std::isfinite(model.kappas().kbar2))
    std::cout << "analytic_bmd: " << format_double(analytic_bmd(model)) << "\n";
  if (!profile_csv.empty()) write_profile_csv(profile_csv, p);
  if (!summary_json.empty()) write_profile_summary(summary_json, p);
  return 0;
}

int cmd_theory(const std::string& loss, double alpha_t, double lambda, const std::string& grid,
               const std::string& activation, double delta, const std::string& out) {
  Config g;
  g.set("grid", grid);
  const std::vector<double> inv_alpha = g.get_double_list("grid");
  const KappaSet k = compute_kappas(Activation::parse(activation));
  const ReplicaInput tmpl = ReplicaInput::from_alpha_T(1.0, alpha_t, lambda, parse_loss_kind(loss), k, delta);
  const auto rows = sweep_curve(tmpl, inv_alpha);
  const std::string path = out.empty() ? "/dev/stdout" : out;
  write_curve_csv(path, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean dimension of learned functions: estimators, models and asymptotic theory"};
  app.require_subcommand(1);

  std::string run_config;
  std::string run_out;
  int run_jobs = 1;
  auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
  run->add_option("config", run_config, "Config file (key = value lines)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory (default: config 'out' or out/<kind>)");
  run->add_option("--jobs", run_jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string md_ckpt;
  std::string md_sampler = "binary";
  std::size_t md_samples = 10000;
  std::uint64_t md_seed = 0;
  std::string md_data;
  std::string md_profile;
  std::string md_summary;
  int md_threads = 1;
  auto* md = app.add_subcommand("md", "Monte Carlo mean dimension of a saved random feature model");
  md->add_option("checkpoint", md_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  md->add_option("--sampler", md_sampler, "binary|gaussian|uniform|empirical")
      ->check(CLI::IsMember({"binary", "gaussian", "uniform", "empirical"}));
  md->add_option("--samples", md_samples, "Background samples");
  md->add_option("--seed", md_seed, "Seed");
  md->add_option("--data", md_data, "CSV rows for the empirical sampler");
  md->add_option("--profile", md_profile, "Write per-input influences (CSV)");
  md->add_option("--summary", md_summary, "Write a JSON summary");
  md->add_option("--threads", md_threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string th_loss = "mse";
  double th_alpha_t = 3.0;
  double th_lambda = 1e-4;
  std::string th_grid = "log(-1, 1, 21)";
  std::string th_act = "tanh";
  double th_delta = 0.0;
  std::string th_out;
  auto* theory = app.add_subcommand("theory", "Asymptotic learning curve against 1/alpha = N/P");
  theory->add_option("--loss", th_loss, "mse|ce")->check(CLI::IsMember({"mse", "ce"}));
  theory->add_option("--alpha-t", th_alpha_t, "P/D");
  theory->add_option("--lambda", th_lambda, "Ridge strength");
  theory->add_option("--grid", th_grid, "1/alpha values: a,b,c or log(lo,hi,n) or lin(lo,hi,n)");
  theory->add_option("--activation", th_act, "tanh|sign|leaky-relu:<slope>|linear");
  theory->add_option("--delta", th_delta, "Variance of label noise before the sign");
  theory->add_option("--out", th_out, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_config, run_out, run_jobs);
    if (*md) return cmd_md(md_ckpt, md_sampler, md_samples, md_seed, md_data, md_profile, md_summary, md_threads);
    if (*theory) return cmd_theory(th_loss, th_alpha_t, th_lambda, th_grid, th_act, th_delta, th_out);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
