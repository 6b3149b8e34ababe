#include "declab/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace declab {
namespace {

namespace fs = std::filesystem;

std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

LocalDataset build_global_dataset(const ExperimentConfig& cfg) {
  if (cfg.source == "csv") return load_dataset_csv(cfg.csv_path, cfg.loss);
  if (cfg.loss == LossKind::least_squares)
    return generate_least_squares(cfg.samples, cfg.dim, cfg.target_low, cfg.target_high,
                                  cfg.data_seed);
  return generate_logistic_blobs(cfg.samples, cfg.dim, cfg.blob_separation, cfg.blob_scale,
                                 cfg.data_seed);
}

Topology build_graph(const ExperimentConfig& cfg) {
  if (cfg.graph == GraphKind::explicit_edges) return load_topology(cfg.topology_file);
  return build_topology(cfg.graph, cfg.n, cfg.k_regular, cfg.graph_seed);
}

MixingMatrix build_mixing(const ExperimentConfig& cfg, const Topology& t) {
  if (cfg.mixing == "metropolis") return MixingMatrix::metropolis(t);
  if (cfg.mixing == "optimal3") return MixingMatrix::optimal_path3();
  return MixingMatrix::from_matrix(load_matrix(cfg.mixing_file), t);
}

Eigen::MatrixXd build_x0(const ExperimentConfig& cfg, int rows, int dim, uint64_t seed) {
  if (cfg.x0_mode == "constant") return Eigen::MatrixXd::Constant(rows, dim, cfg.x0_value);
  Eigen::MatrixXd x0(rows, dim);
  for (int i = 0; i < rows; ++i) {
    RandomStream rs(seed, uint32_t(i), 0, StreamTag::init);
    for (int d = 0; d < dim; ++d) x0(i, d) = cfg.x0_scale * rs.gaussian();
  }
  return x0;
}

struct SeedOutput {
  SeedResult result;
  std::string trace;
};

SeedOutput run_one_seed(const ExperimentConfig& cfg, const BuiltExperiment& built, uint64_t seed,
                        const RunHooks* hooks) {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem& p = built.problem;
  const bool centralized = cfg.algorithm == AlgorithmKind::centralized_sgd;
  const StepSchedule sched = cfg.make_schedule();
  const BatchPolicy batch =
      centralized ? BatchPolicy::proportional(1.0) : cfg.make_batch_policy();
  const RunRng rng{seed};

  const Eigen::MatrixXd x0 = build_x0(cfg, centralized ? 1 : p.nodes(), p.dim(), seed);
  AlgoState st = init_state(p, x0, built.mixing, cfg.algorithm, batch, rng,
                            cfg.divergence_threshold);

  std::optional<double> f_star;
  if (built.reference) f_star = built.reference->f_star;
  RunningMetrics rm(p.nodes(), built.constants.smoothness, f_star);
  StepsizeSums sums;

  // Constants for the rate bound, captured at the first iterate.
  const bool tracking_run = cfg.algorithm == AlgorithmKind::dsgt ||
                            cfg.algorithm == AlgorithmKind::dsgt_eliminated;
  BoundConstants bc;
  bool bound_possible = tracking_run && built.constants_ok && built.reference &&
                        std::isfinite(built.constants.sigma_s_sq) &&
                        built.mixing.rho() < 1.0 && cfg.batch_mode == "proportional";
  if (bound_possible) {
    const Eigen::VectorXd xbar1 = st.X.colwise().mean().transpose();
    const Eigen::VectorXd ybar1 = st.Y.colwise().mean().transpose();
    bc.rho = built.mixing.rho();
    bc.eta = centralized ? 1.0 : cfg.eta;
    bc.n = p.nodes();
    bc.smoothness = built.constants.smoothness;
    bc.smoothness_tilde = built.constants.smoothness_tilde;
    bc.lambda = built.constants.lambda;
    bc.sigma_s_sq = built.constants.sigma_s_sq;
    bc.gamma1 = sched.at(1);
    bc.x1_consensus_sq = (st.X.rowwise() - xbar1.transpose()).squaredNorm();
    bc.y1_consensus_sq = (st.Y.rowwise() - ybar1.transpose()).squaredNorm();
    bc.d_sq = double(p.nodes()) * built.constants.smoothness *
              std::max(0.0, p.loss(xbar1) - built.reference->f_star);
  }

  SeedOutput out;
  out.result.seed = seed;
  std::ostringstream trace;
  trace << "iter,gamma,loss,grad_norm_sq,consensus_err,tracking_residual,running_R,gap\n";
  const auto add_row = [&](const MetricsRecord& r) {
    trace << r.k << ',' << g17(r.gamma) << ',' << g17(r.loss) << ',' << g17(r.grad_norm_sq)
          << ',' << g17(r.consensus_err) << ',' << g17(r.tracking_residual) << ','
          << g17(r.running_r) << ',' << g17(r.gap) << '\n';
  };
  const auto observe = [&](const MetricsRecord& r) {
    out.result.max_tracking_residual =
        std::max(out.result.max_tracking_residual, r.tracking_residual);
    if (cfg.epsilon > 0.0 && out.result.iterations_to_epsilon < 0 &&
        rm.grad_running_avg() <= cfg.epsilon)
      out.result.iterations_to_epsilon = r.k;
    if (hooks && hooks->on_record) hooks->on_record(seed, st, r);
  };

  MetricsRecord rec = rm.update(p, st, sched.at(st.k));
  sums.push(rec.gamma);
  observe(rec);
  add_row(rec);

  for (int64_t t = 1; t <= cfg.iterations; ++t) {
    const double gamma_t = sched.at(st.k);
    algorithm_step(cfg.algorithm, st, built.mixing, gamma_t, p, batch, cfg.batch, rng,
                   cfg.divergence_threshold);
    out.result.steps_run = t;
    rec = rm.update(p, st, sched.at(st.k));
    sums.push(rec.gamma);
    observe(rec);
    if (st.diverged) {
      add_row(rec);
      break;
    }
    if (t % cfg.stride == 0) add_row(rec);
  }

  out.result.diverged = st.diverged;
  out.result.diverged_at = st.diverged_at;
  out.result.final_running_r = rm.running_r();
  out.result.min_running_r = rm.min_running_r();
  out.result.final_running_rc = rm.running_rc();
  out.result.final_consensus = rec.consensus_err;
  out.result.final_loss = rec.loss;
  out.result.final_gap = rec.gap;
  out.result.final_grad_norm_sq = rec.grad_norm_sq;
  if (bound_possible) {
    const BoundBreakdown bd = tracking_rate_bound(bc, sums);
    out.result.bound.available = true;
    out.result.bound.value = bd.total;
    out.result.bound.network_ratio = bd.network_ratio;
    out.result.bound.within_cap = bd.within_cap;
    out.result.bound.holds =
        !st.diverged && out.result.final_running_r <= bd.total * (1.0 + 1e-12);
  }
  out.result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.trace = trace.str();
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size()));
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

int resolve_threads(const ExperimentConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("DECLAB_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

BuiltExperiment build_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const bool centralized = cfg.algorithm == AlgorithmKind::centralized_sgd;
  const LocalDataset global = build_global_dataset(cfg);

  std::vector<LocalDataset> locals;
  if (centralized) {
    locals.push_back(global);
  } else {
    locals = partition_dataset(global, cfg.n, cfg.proportions, cfg.data_seed);
  }
  Problem problem(cfg.loss, std::move(locals));

  Topology graph = centralized ? Topology(1, {}) : build_graph(cfg);
  if (!centralized && graph.size() != cfg.n)
    throw std::invalid_argument("config: topology file node count does not match topology.n");
  MixingMatrix mixing =
      centralized ? MixingMatrix::metropolis(Topology(1, {})) : build_mixing(cfg, graph);

  BuiltExperiment built{std::move(problem), std::move(mixing), {}, false, std::nullopt, 0.0};

  if (centralized && (cfg.batch < 1 || cfg.batch > built.problem.local(0).size()))
    throw std::invalid_argument("config: centralized batch must lie in [1, N]");

  // Probe points for the variance oracle and the reference solve.
  std::vector<Eigen::VectorXd> probes;
  probes.push_back(cfg.x0_mode == "constant"
                       ? Eigen::VectorXd::Constant(built.problem.dim(), cfg.x0_value)
                       : Eigen::VectorXd::Zero(built.problem.dim()));
  try {
    built.reference = centralized_reference(built.problem, probes);
  } catch (const std::exception&) {
    built.reference = std::nullopt;  // logistic solve out of budget
  }
  if (built.reference) probes.push_back(built.reference->x_star);

  const double eta_eff =
      centralized ? double(cfg.batch) / double(built.problem.total_samples()) : cfg.eta;
  try {
    built.constants = problem_constants(built.problem, eta_eff, probes, true);
    built.constants_ok = std::isfinite(built.constants.sigma_s_sq);
  } catch (const std::exception&) {
    built.constants = problem_constants(built.problem, eta_eff, probes, false);
    built.constants_ok = false;
  }
  built.stepsize_cap_value =
      built.mixing.rho() < 1.0
          ? stepsize_cap(built.mixing.rho(), eta_eff, built.constants.smoothness,
                         built.problem.nodes(), built.constants.lambda)
          : std::numeric_limits<double>::quiet_NaN();
  return built;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const RunHooks* hooks) {
  const BuiltExperiment built = build_experiment(cfg);
  const StepSchedule sched = cfg.make_schedule();
  if (std::isfinite(built.stepsize_cap_value) && sched.at(1) > built.stepsize_cap_value)
    std::fprintf(stderr,
                 "warning: first stepsize %.6g exceeds the analyzed cap %.6g; "
                 "running anyway\n",
                 sched.at(1), built.stepsize_cap_value);

  fs::create_directories(cfg.output);
  {
    std::ofstream cfg_out(fs::path(cfg.output) / "config.cfg", std::ios::binary);
    cfg_out << cfg.serialize();
  }

  RunSummary summary;
  summary.config = cfg;
  summary.per_seed.resize(cfg.seeds.size());

  const bool hooked = hooks && hooks->on_record;
  const int threads =
      hooked ? 1 : std::min<int>(resolve_threads(cfg), int(cfg.seeds.size()));
  const auto worker = [&](int w) {
    for (size_t i = size_t(w); i < cfg.seeds.size(); i += size_t(threads)) {
      SeedOutput out = run_one_seed(cfg, built, cfg.seeds[i], hooks);
      out.result.trace_path = "trace_seed" + std::to_string(cfg.seeds[i]) + ".csv";
      std::ofstream tf(fs::path(cfg.output) / out.result.trace_path, std::ios::binary);
      tf << out.trace;
      summary.per_seed[i] = std::move(out.result);
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(size_t(threads));
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }

  std::vector<double> finals, mins, losses, consensus, eps_iters;
  for (const auto& r : summary.per_seed) {
    if (r.diverged) {
      ++summary.diverged_count;
      continue;
    }
    finals.push_back(r.final_running_r);
    mins.push_back(r.min_running_r);
    losses.push_back(r.final_loss);
    consensus.push_back(r.final_consensus);
    if (r.iterations_to_epsilon > 0) eps_iters.push_back(double(r.iterations_to_epsilon));
  }
  summary.mean_final_r = mean_of(finals);
  summary.std_final_r = std_of(finals);
  summary.mean_min_r = mean_of(mins);
  summary.std_min_r = std_of(mins);
  summary.mean_final_loss = mean_of(losses);
  summary.mean_final_consensus = mean_of(consensus);
  summary.mean_iterations_to_epsilon = eps_iters.empty() ? -1.0 : mean_of(eps_iters);

  std::ostringstream os;
  os << "# run summary\n";
  os << "algorithm = " << to_string(cfg.algorithm) << "\n";
  os << "loss = " << to_string(cfg.loss) << "\n";
  os << "nodes = " << built.problem.nodes() << "\n";
  os << "total_samples = " << built.problem.total_samples() << "\n";
  os << "rho = " << g17(built.mixing.rho()) << "\n";
  os << "smoothness = " << g17(built.constants.smoothness) << "\n";
  os << "sigma_s_sq = " << g17(built.constants.sigma_s_sq) << "\n";
  os << "stepsize_cap = " << g17(built.stepsize_cap_value) << "\n";
  os << "f_star = " << (built.reference ? g17(built.reference->f_star) : "n/a") << "\n";
  os << "iterations = " << cfg.iterations << "\n";
  os << "diverged_count = " << summary.diverged_count << "\n";
  os << "mean_final_running_R = " << g17(summary.mean_final_r) << "\n";
  os << "std_final_running_R = " << g17(summary.std_final_r) << "\n";
  os << "mean_min_running_R = " << g17(summary.mean_min_r) << "\n";
  os << "std_min_running_R = " << g17(summary.std_min_r) << "\n";
  os << "mean_final_loss = " << g17(summary.mean_final_loss) << "\n";
  os << "mean_final_consensus_err = " << g17(summary.mean_final_consensus) << "\n";
  os << "mean_iterations_to_epsilon = " << g17(summary.mean_iterations_to_epsilon) << "\n";
  for (const auto& r : summary.per_seed) {
    os << "\n[seed " << r.seed << "]\n";
    os << "diverged = " << bool_str(r.diverged) << "\n";
    os << "diverged_at = " << r.diverged_at << "\n";
    os << "steps_run = " << r.steps_run << "\n";
    os << "final_running_R = " << g17(r.final_running_r) << "\n";
    os << "min_running_R = " << g17(r.min_running_r) << "\n";
    os << "final_running_Rc = " << g17(r.final_running_rc) << "\n";
    os << "final_consensus_err = " << g17(r.final_consensus) << "\n";
    os << "final_loss = " << g17(r.final_loss) << "\n";
    os << "final_gap = " << g17(r.final_gap) << "\n";
    os << "final_grad_norm_sq = " << g17(r.final_grad_norm_sq) << "\n";
    os << "max_tracking_residual = " << g17(r.max_tracking_residual) << "\n";
    os << "iterations_to_epsilon = " << r.iterations_to_epsilon << "\n";
    os << "bound_available = " << bool_str(r.bound.available) << "\n";
    if (r.bound.available) {
      os << "bound_value = " << g17(r.bound.value) << "\n";
      os << "bound_within_cap = " << bool_str(r.bound.within_cap) << "\n";
      os << "bound_holds = " << bool_str(r.bound.holds) << "\n";
      os << "bound_network_ratio = " << g17(r.bound.network_ratio) << "\n";
    }
    os << "trace = " << r.trace_path << "\n";
  }
  os << "\n[timing]\n";
  os << "# informational only; excluded from the reproducibility contract\n";
  double total = 0.0;
  for (const auto& r : summary.per_seed) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "seed_%llu_seconds = %.3f\n",
                  (unsigned long long)r.seed, r.wall_seconds);
    os << buf;
    total += r.wall_seconds;
  }
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, "total_seconds = %.3f\n", total);
    os << buf;
  }
  summary.summary_path = (fs::path(cfg.output) / "summary.txt").string();
  std::ofstream sf(summary.summary_path, std::ios::binary);
  sf << os.str();
  return summary;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "iterations" || s == "K") return SweepAxis::iterations;
  if (s == "nodes" || s == "n") return SweepAxis::nodes;
  if (s == "gamma") return SweepAxis::gamma;
  if (s == "topology") return SweepAxis::topology;
  throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::iterations: return "iterations";
    case SweepAxis::nodes: return "nodes";
    case SweepAxis::gamma: return "gamma";
    case SweepAxis::topology: return "topology";
  }
  return "?";
}

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<std::string>& values, bool scale_gamma_with_n) {
  if (values.empty()) throw std::invalid_argument("run_sweep: need at least one axis value");
  SweepResult result;
  result.axis = axis;
  fs::create_directories(base.output);

  for (const auto& value : values) {
    ExperimentConfig cfg = base;
    cfg.output = (fs::path(base.output) / (to_string(axis) + "_" + value)).string();
    switch (axis) {
      case SweepAxis::iterations: {
        cfg.iterations = std::stoll(value);
        break;
      }
      case SweepAxis::nodes: {
        const int n = std::stoi(value);
        if (!base.proportions.empty())
          throw std::invalid_argument("run_sweep: nodes axis requires equal partitions");
        if (base.mixing != "metropolis")
          throw std::invalid_argument("run_sweep: nodes axis requires metropolis mixing");
        if (base.graph == GraphKind::explicit_edges)
          throw std::invalid_argument("run_sweep: nodes axis cannot rescale explicit topologies");
        cfg.n = n;
        if (scale_gamma_with_n) {
          const double factor = double(n) / double(base.n);
          cfg.gamma0 = base.gamma0 * factor;
          cfg.dim_a = base.dim_a * factor;
        }
        break;
      }
      case SweepAxis::gamma: {
        const double g = std::stod(value);
        if (base.schedule == "constant")
          cfg.gamma0 = g;
        else
          cfg.dim_a = g;
        break;
      }
      case SweepAxis::topology: {
        cfg.graph = graph_kind_from_string(value);
        if (cfg.graph == GraphKind::explicit_edges)
          throw std::invalid_argument("run_sweep: topology axis values must be generator kinds");
        break;
      }
    }
    SweepPoint point;
    point.value = value;
    point.summary = run_experiment(cfg);
    result.points.push_back(std::move(point));
  }

  if (axis == SweepAxis::nodes) {
    const double k1 = result.points.front().summary.mean_iterations_to_epsilon;
    for (auto& pt : result.points) {
      const double kn = pt.summary.mean_iterations_to_epsilon;
      pt.speedup = (k1 > 0 && kn > 0) ? k1 / kn : std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (axis == SweepAxis::iterations) {
    std::vector<double> ks, vs;
    for (const auto& pt : result.points) {
      const double v = pt.summary.mean_min_r;
      if (std::isfinite(v) && v > 0) {
        ks.push_back(double(pt.summary.config.iterations));
        vs.push_back(v);
      }
    }
    if (ks.size() >= 3) {
      result.rate_exponent = rate_fit(ks, vs);
      result.rate_exponent_ok = true;
    }
  }

  result.csv_path = (fs::path(base.output) / "sweep.csv").string();
  std::ofstream csv(result.csv_path, std::ios::binary);
  csv << "axis,value,mean_final_R,std_final_R,mean_min_R,mean_final_loss,"
         "mean_final_consensus_err,diverged_count,mean_iterations_to_epsilon,speedup\n";
  for (const auto& pt : result.points) {
    const auto& s = pt.summary;
    csv << to_string(axis) << ',' << pt.value << ',' << g17(s.mean_final_r) << ','
        << g17(s.std_final_r) << ',' << g17(s.mean_min_r) << ',' << g17(s.mean_final_loss)
        << ',' << g17(s.mean_final_consensus) << ',' << s.diverged_count << ','
        << g17(s.mean_iterations_to_epsilon) << ',' << g17(pt.speedup) << '\n';
  }
  std::ofstream ss(fs::path(base.output) / "sweep_summary.txt", std::ios::binary);
  ss << "axis = " << to_string(axis) << "\n";
  ss << "points = " << result.points.size() << "\n";
  if (result.rate_exponent_ok) ss << "rate_exponent = " << g17(result.rate_exponent) << "\n";
  return result;
}

}  // namespace declab
