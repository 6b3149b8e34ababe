// Command-line front end for the decentralized optimization lab.
//
//   declab run      --config exp.cfg [overrides]        run an experiment
//   declab sweep    --config exp.cfg --axis A --values ...
//   declab spectra  --matrix w.txt [--topology t.txt] [--gamma g]
//   declab bound    --rho R --n N --L L --K K [constants...]
//   declab validate --config exp.cfg | --matrix w.txt --topology t.txt
//
// Exit codes: 0 success, 1 usage error, 2 validation or runtime failure.

#include <CLI11.hpp>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "declab/engine.hpp"

namespace {

using namespace declab;

struct CommonOpts {
  std::string config_path;
  std::string output;
  std::vector<uint64_t> seeds;
  int64_t iterations = -1;
  int threads = -1;
};

ExperimentConfig load_config(const CommonOpts& o) {
  ExperimentConfig cfg = ExperimentConfig::parse_file(o.config_path);
  if (!o.output.empty()) cfg.output = o.output;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.iterations >= 0) cfg.iterations = o.iterations;
  if (o.threads >= 0) cfg.threads = o.threads;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("-c,--config", o.config_path, "experiment config file")->required();
  cmd->add_option("-o,--output", o.output, "override [run] output directory");
  cmd->add_option("--seeds", o.seeds, "override [run] seeds")->delimiter(',');
  cmd->add_option("--iterations", o.iterations, "override [run] iterations");
  cmd->add_option("--threads", o.threads, "override [run] threads");
}

int cmd_run(const CommonOpts& o) {
  const ExperimentConfig cfg = load_config(o);
  const RunSummary s = run_experiment(cfg);
  std::printf("wrote %s\n", s.summary_path.c_str());
  std::printf("seeds=%zu diverged=%" PRId64 "\n", s.per_seed.size(), s.diverged_count);
  std::printf("mean_final_running_R=%.10g std=%.10g\n", s.mean_final_r, s.std_final_r);
  std::printf("mean_final_loss=%.10g mean_final_consensus_err=%.10g\n", s.mean_final_loss,
              s.mean_final_consensus);
  if (s.mean_iterations_to_epsilon > 0)
    std::printf("mean_iterations_to_epsilon=%.10g\n", s.mean_iterations_to_epsilon);
  return 0;
}

int cmd_sweep(const CommonOpts& o, const std::string& axis_name,
              const std::vector<std::string>& values, bool scale_gamma) {
  const ExperimentConfig cfg = load_config(o);
  const SweepAxis axis = sweep_axis_from_string(axis_name);
  const SweepResult r = run_sweep(cfg, axis, values, scale_gamma);
  std::printf("wrote %s\n", r.csv_path.c_str());
  for (const auto& pt : r.points) {
    std::printf("%s=%s mean_final_R=%.10g mean_min_R=%.10g diverged=%" PRId64,
                to_string(axis).c_str(), pt.value.c_str(), pt.summary.mean_final_r,
                pt.summary.mean_min_r, pt.summary.diverged_count);
    if (axis == SweepAxis::nodes && pt.summary.mean_iterations_to_epsilon > 0)
      std::printf(" iterations_to_eps=%.10g speedup=%.10g",
                  pt.summary.mean_iterations_to_epsilon, pt.speedup);
    std::printf("\n");
  }
  if (r.rate_exponent_ok) std::printf("rate_exponent=%.10g\n", r.rate_exponent);
  return 0;
}

// Loads a mixing matrix, optionally validating support against a topology
// file; without one, every off-diagonal entry is permitted.
MixingMatrix load_mixing_cli(const std::string& matrix_path, const std::string& topology_path) {
  const Eigen::MatrixXd w = load_matrix(matrix_path);
  if (!topology_path.empty()) return MixingMatrix::from_matrix(w, load_topology(topology_path));
  return MixingMatrix::from_matrix(w, make_complete(int(w.rows())));
}

int cmd_spectra(const std::string& matrix_path, const std::string& topology_path,
                double gamma) {
  const MixingMatrix w = load_mixing_cli(matrix_path, topology_path);
  std::printf("n=%d\nrho=%.10g\n", w.size(), w.rho());
  Eigen::EigenSolver<Eigen::MatrixXd> es(w.weights());
  std::printf("mixing_eigenvalues=");
  for (int i = 0; i < w.size(); ++i) {
    const auto ev = es.eigenvalues()[i];
    if (i) std::printf(",");
    if (std::abs(ev.imag()) < 1e-12)
      std::printf("%.10g", ev.real());
    else
      std::printf("%.10g%+.10gi", ev.real(), ev.imag());
  }
  std::printf("\n");
  if (gamma >= 0.0) {
    const CompanionSpectrum cs = d2_companion(w, gamma);
    std::printf("companion_gamma=%.10g\ncompanion_spectral_radius=%.10g\n", gamma,
                cs.spectral_radius);
    std::printf("two_term_recursion=%s\n",
                cs.spectral_radius <= 1.0 + 1e-9 ? "stable" : "divergent");
  }
  return 0;
}

struct BoundOpts {
  double rho = 0.0;
  int n = 1;
  double eta = 1.0;
  double smoothness = 1.0;
  double lambda = 0.0;
  double sigma_s_sq = 0.0;
  double d_sq = 0.0;
  double x1_consensus_sq = 0.0;
  double y1_consensus_sq = 0.0;
  int64_t horizon = 1000;
  double gamma0 = -1.0;
  bool tuned = false;
  double dim_a = -1.0;
  double dim_p = 0.5;
};

int cmd_bound(const BoundOpts& o) {
  BoundConstants c;
  c.rho = o.rho;
  c.n = o.n;
  c.eta = o.eta;
  c.smoothness = o.smoothness;
  c.lambda = o.lambda;
  const double nl = double(o.n) * o.lambda;
  c.smoothness_tilde = o.smoothness * std::sqrt(1.0 + nl * nl);
  c.sigma_s_sq = o.sigma_s_sq;
  c.d_sq = o.d_sq;
  c.x1_consensus_sq = o.x1_consensus_sq;
  c.y1_consensus_sq = o.y1_consensus_sq;

  const double cap = stepsize_cap(c.rho, c.eta, c.smoothness, c.n, c.lambda);
  std::printf("stepsize_cap=%.10g\n", cap);
  bool any = false;
  if (o.gamma0 > 0.0) {
    c.gamma1 = o.gamma0;
    std::printf("constant gamma0=%.10g K=%" PRId64 ": bound=%.10g theta=%.10g%s\n", o.gamma0,
                o.horizon, bound_constant_step(c, o.gamma0, o.horizon),
                consensus_contraction(c.rho, o.gamma0, c.eta, c.smoothness_tilde),
                o.gamma0 <= cap * (1.0 + 1e-12) ? "" : " (outside hypothesis)");
    any = true;
  }
  if (o.tuned) {
    const TunedBound t = bound_tuned_step(c, o.horizon);
    std::printf("tuned K=%" PRId64 ": gamma=%.10g bound=%.10g min_horizon=%.10g "
                "horizon_ok=%s\n",
                o.horizon, t.gamma, t.value, t.min_horizon, t.horizon_ok ? "true" : "false");
    any = true;
  }
  if (o.dim_a > 0.0) {
    c.gamma1 = o.dim_a;
    std::printf("diminishing a=%.10g p=%.10g k=%" PRId64 ": bound=%.10g\n", o.dim_a, o.dim_p,
                o.horizon, bound_diminishing_step(c, o.dim_a, o.dim_p, o.horizon));
    any = true;
  }
  if (!any)
    throw std::invalid_argument("bound: pass --gamma0, --tuned, or --a to pick a regime");
  return 0;
}

int cmd_validate(const CommonOpts& o, const std::string& matrix_path,
                 const std::string& topology_path) {
  if (!matrix_path.empty()) {
    const MixingMatrix w = load_mixing_cli(matrix_path, topology_path);
    std::printf("matrix ok: %s (n=%d, rho=%.10g)\n", matrix_path.c_str(), w.size(), w.rho());
    return 0;
  }
  const ExperimentConfig cfg = load_config(o);
  const BuiltExperiment built = build_experiment(cfg);
  std::printf("config ok: %s\n", o.config_path.c_str());
  std::printf("nodes=%d samples=%d dim=%d loss=%s algorithm=%s\n", built.problem.nodes(),
              built.problem.total_samples(), built.problem.dim(),
              to_string(cfg.loss).c_str(), to_string(cfg.algorithm).c_str());
  std::printf("rho=%.10g smoothness=%.10g sigma_s_sq=%.10g stepsize_cap=%.10g\n",
              built.mixing.rho(), built.constants.smoothness, built.constants.sigma_s_sq,
              built.stepsize_cap_value);
  std::printf("reference=%s\n", built.reference ? (built.reference->numeric ? "numeric"
                                                                            : "closed-form")
                                                : "unavailable");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized stochastic optimization lab"};
  app.require_subcommand(1);

  CommonOpts run_o, sweep_o, validate_o;
  std::string axis;
  std::vector<std::string> values;
  bool scale_gamma = false;
  std::string spectra_matrix, spectra_topology, validate_matrix, validate_topology;
  double spectra_gamma = -1.0;
  BoundOpts bound_o;

  add_common(app.add_subcommand("run", "run an experiment"), run_o);

  CLI::App* sweep = app.add_subcommand("sweep", "run a family of experiments along one axis");
  add_common(sweep, sweep_o);
  sweep->add_option("--axis", axis, "iterations | nodes | gamma | topology")->required();
  sweep->add_option("--values", values, "axis values")->required()->delimiter(',');
  sweep->add_flag("--scale-gamma-with-n", scale_gamma,
                  "nodes axis: scale the stepsize by n / base n");

  CLI::App* spectra = app.add_subcommand("spectra", "mixing and companion spectra");
  spectra->add_option("--matrix", spectra_matrix, "mixing matrix file")->required();
  spectra->add_option("--topology", spectra_topology, "edge-list file constraining support");
  spectra->add_option("--gamma", spectra_gamma, "two-term recursion stepsize");

  CLI::App* bound = app.add_subcommand("bound", "closed-form rate bounds from constants");
  bound->add_option("--rho", bound_o.rho, "mixing contraction factor")->required();
  bound->add_option("--n", bound_o.n, "node count")->required();
  bound->add_option("--L", bound_o.smoothness, "smoothness constant")->required();
  bound->add_option("--eta", bound_o.eta, "sampling fraction (default 1)");
  bound->add_option("--lambda", bound_o.lambda, "relative variance slope (default 0)");
  bound->add_option("--sigma-s-sq", bound_o.sigma_s_sq, "total sampling variance");
  bound->add_option("--d-sq", bound_o.d_sq, "n L (f(xbar_1) - f*)");
  bound->add_option("--x1-consensus-sq", bound_o.x1_consensus_sq, "initial X consensus error");
  bound->add_option("--y1-consensus-sq", bound_o.y1_consensus_sq, "initial Y consensus error");
  bound->add_option("--K", bound_o.horizon, "iterate count (default 1000)");
  bound->add_option("--gamma0", bound_o.gamma0, "evaluate the constant-stepsize bound");
  bound->add_flag("--tuned", bound_o.tuned, "evaluate the horizon-tuned bound");
  bound->add_option("--a", bound_o.dim_a, "evaluate the diminishing bound with gamma_k = a/k^p");
  bound->add_option("--p", bound_o.dim_p, "diminishing exponent (default 0.5)");

  CLI::App* validate = app.add_subcommand("validate", "check a config or a matrix/topology pair");
  validate->add_option("-c,--config", validate_o.config_path, "experiment config file");
  validate->add_option("--matrix", validate_matrix, "mixing matrix file");
  validate->add_option("--topology", validate_topology, "edge-list file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("run")) return cmd_run(run_o);
    if (app.got_subcommand("sweep")) return cmd_sweep(sweep_o, axis, values, scale_gamma);
    if (app.got_subcommand("spectra"))
      return cmd_spectra(spectra_matrix, spectra_topology, spectra_gamma);
    if (app.got_subcommand("bound")) return cmd_bound(bound_o);
    if (app.got_subcommand("validate")) {
      if (validate_matrix.empty() && validate_o.config_path.empty()) {
        std::fprintf(stderr, "validate: pass --config or --matrix\n");
        return 1;
      }
      return cmd_validate(validate_o, validate_matrix, validate_topology);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
