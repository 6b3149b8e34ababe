// End-to-end checks for the experiment engine: config parsing, artifact
// layout, reproducibility across thread counts, per-node stream isolation,
// bound reporting, sweeps, and CLI exit codes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "declab/engine.hpp"

using namespace declab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "declab_test_engine" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += (c == '\n');
  return n;
}

// Three single-target nodes: pooled minimizer 1, per-node targets {0, 1, 2}.
fs::path write_targets_csv(const fs::path& dir) {
  const fs::path p = dir / "targets.csv";
  write_file(p, "target\n0\n1\n2\n");
  return p;
}

// Small stochastic least-squares run: 3-node ring, 4 samples per node.
ExperimentConfig ls_base(const fs::path& out) {
  ExperimentConfig c;
  c.samples = 12;
  c.dim = 1;
  c.data_seed = 4;
  c.graph = GraphKind::ring;
  c.n = 3;
  c.gamma0 = 0.05;
  c.eta = 0.5;
  c.iterations = 30;
  c.seeds = {1, 2};
  c.output = out.string();
  return c;
}

// Path-3 with the hand-built mixing matrix and one target per node.
ExperimentConfig fixture_cfg(const fs::path& out) {
  ExperimentConfig c;
  c.source = "csv";
  c.csv_path = write_targets_csv(out).string();
  c.graph = GraphKind::path;
  c.n = 3;
  c.mixing = "optimal3";
  c.gamma0 = 0.1;
  c.eta = 1.0;
  c.iterations = 600;
  c.seeds = {1};
  c.output = out.string();
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DECLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

constexpr const char* kTraceHeader =
    "iter,gamma,loss,grad_norm_sq,consensus_err,tracking_residual,running_R,gap";

}  // namespace

TEST_CASE("config: serialize and parse round trip") {
  const ExperimentConfig defaults;
  CHECK(ExperimentConfig::parse_string(defaults.serialize()) == defaults);
  CHECK(defaults.serialize().find("csv") == std::string::npos);
  CHECK(defaults.serialize().find("proportions") == std::string::npos);

  ExperimentConfig c;
  c.loss = LossKind::logistic;
  c.dim = 2;
  c.samples = 24;
  c.data_seed = 7;
  c.proportions = {0.5, 0.25, 0.25};
  c.blob_separation = 2.0;
  c.blob_scale = 1.5;
  c.graph = GraphKind::k_regular_random;
  c.n = 3;
  c.k_regular = 2;
  c.graph_seed = 9;
  c.algorithm = AlgorithmKind::dpsgd;
  c.batch_mode = "equal";
  c.equal_batch = 2;
  c.schedule = "diminishing";
  c.dim_a = 0.2;
  c.dim_p = 0.75;
  c.gamma0 = 0.3;
  c.eta = 0.5;
  c.iterations = 17;
  c.seeds = {3, 9};
  c.output = "outdir";
  c.stride = 2;
  c.divergence_threshold = 1e7;
  c.x0_mode = "gaussian";
  c.x0_value = 0.25;
  c.x0_scale = 0.5;
  c.epsilon = 1e-3;
  c.threads = 2;
  CHECK(ExperimentConfig::parse_string(c.serialize()) == c);
  CHECK(c.serialize().find("proportions") != std::string::npos);

  ExperimentConfig files;
  files.source = "csv";
  files.csv_path = "data.csv";
  files.graph = GraphKind::explicit_edges;
  files.topology_file = "topo.txt";
  files.n = 2;
  files.mixing = "file";
  files.mixing_file = "w.txt";
  CHECK(ExperimentConfig::parse_string(files.serialize()) == files);

  const ExperimentConfig parsed = ExperimentConfig::parse_string(
      "# full text form\n"
      "[problem]\n"
      "kind = least_squares\n"
      "samples = 6\n"
      "[topology]\n"
      "kind = ring\n"
      "n = 3\n"
      "[algorithm]\n"
      "kind = dsgt\n"
      "[run]\n"
      "iterations = 5\n"
      "seeds = 1, 2,3\n"
      "eta = 0.5\n");
  CHECK(parsed.loss == LossKind::least_squares);
  CHECK(parsed.samples == 6);
  CHECK(parsed.graph == GraphKind::ring);
  CHECK(parsed.n == 3);
  CHECK(parsed.seeds == std::vector<uint64_t>{1, 2, 3});
  CHECK(parsed.eta == 0.5);
  CHECK(parsed.dim == 1);  // untouched default
}

TEST_CASE("config: parse diagnostics name the line, key, and section") {
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("x = 1\n"),
                       "config error at line 1: key 'x' appears before any [section]",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[problem]\nbogus = 2\n"),
                       "config error at line 2: unknown key 'bogus' in section [problem]",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[nope]\n"),
                       "config error at line 1: unknown section [nope]",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[problem\n"),
                       "config error at line 1: unterminated section header",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[problem]\nkind\n"),
                       "config error at line 2: expected 'key = value', got 'kind'",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse_string("[problem]\nkind = least_squares\n"
                                                      "[topology]\nkind = complete\n"
                                                      "[algorithm]\nkind = dsgt\n"
                                                      "[run]\niterations = 5\n"),
                       "config error: missing required key 'run.seeds'",
                       std::invalid_argument);
}

TEST_CASE("config: validation rejects inconsistent field combinations") {
  const ExperimentConfig good;
  CHECK_NOTHROW(good.validate());

  const auto expect = [](void (*mutate)(ExperimentConfig&), const char* message) {
    ExperimentConfig c;
    mutate(c);
    CHECK_THROWS_WITH_AS(c.validate(), message, std::invalid_argument);
  };
  expect([](ExperimentConfig& c) { c.n = 0; }, "config: topology n must be >= 1");
  expect([](ExperimentConfig& c) { c.source = "csv"; },
         "config: source = csv requires problem.csv");
  expect([](ExperimentConfig& c) { c.samples = 0; },
         "config: synthetic problems need samples >= 1 and dim >= 1");
  expect([](ExperimentConfig& c) { c.graph = GraphKind::explicit_edges; },
         "config: explicit topology requires topology.file");
  expect([](ExperimentConfig& c) { c.mixing = "file"; },
         "config: mixing kind file requires mixing.file");
  expect([](ExperimentConfig& c) { c.mixing = "optimal3"; c.n = 2; },
         "config: the optimal3 mixing fixture requires n = 3");
  expect([](ExperimentConfig& c) { c.proportions = {0.5, 0.5}; c.n = 3; },
         "config: proportions length must equal topology n");
  expect([](ExperimentConfig& c) { c.algorithm = AlgorithmKind::centralized_sgd; },
         "config: centralized_sgd requires algorithm.batch >= 1");
  expect([](ExperimentConfig& c) { c.batch_mode = "equal"; c.equal_batch = 0; },
         "config: equal batch mode requires equal_batch >= 1");
  expect([](ExperimentConfig& c) { c.eta = 0.0; }, "config: eta must lie in (0, 1]");
  expect([](ExperimentConfig& c) { c.eta = 1.5; }, "config: eta must lie in (0, 1]");
  expect([](ExperimentConfig& c) { c.iterations = -1; }, "config: iterations must be >= 0");
  expect([](ExperimentConfig& c) { c.stride = 0; }, "config: stride must be >= 1");
  expect([](ExperimentConfig& c) { c.seeds.clear(); }, "config: seeds must not be empty");
  expect([](ExperimentConfig& c) { c.divergence_threshold = 0.0; },
         "config: divergence_threshold must be positive");
  expect([](ExperimentConfig& c) { c.epsilon = -1.0; }, "config: epsilon must be >= 0");
  expect([](ExperimentConfig& c) { c.threads = -1; }, "config: threads must be >= 0");
  expect([](ExperimentConfig& c) { c.algorithm = AlgorithmKind::d2; c.schedule = "diminishing"; },
         "config: the two-term recursions (dsgt_eliminated, d2) require a constant schedule");
  expect(
      [](ExperimentConfig& c) {
        c.algorithm = AlgorithmKind::dsgt_eliminated;
        c.schedule = "diminishing";
      },
      "config: the two-term recursions (dsgt_eliminated, d2) require a constant schedule");

  ExperimentConfig zero_steps;
  zero_steps.iterations = 0;
  CHECK_NOTHROW(zero_steps.validate());
}

TEST_CASE("engine: a run writes config, traces, and a summary") {
  const fs::path dir = fresh_dir("artifacts");
  ExperimentConfig cfg = ls_base(dir);
  const RunSummary s = run_experiment(cfg);

  CHECK(s.summary_path == (dir / "summary.txt").string());
  CHECK(fs::exists(dir / "config.cfg"));
  CHECK(fs::exists(dir / "trace_seed1.csv"));
  CHECK(fs::exists(dir / "trace_seed2.csv"));
  CHECK(ExperimentConfig::parse_string(read_file(dir / "config.cfg")) == cfg);

  REQUIRE(s.per_seed.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    const SeedResult& r = s.per_seed[i];
    CHECK(r.seed == cfg.seeds[i]);
    CHECK_FALSE(r.diverged);
    CHECK(r.steps_run == 30);
    CHECK(std::isfinite(r.final_loss));
    CHECK(r.final_consensus >= 0.0);
    CHECK(r.trace_path == "trace_seed" + std::to_string(r.seed) + ".csv");
    CHECK(fs::exists(dir / r.trace_path));
  }
  CHECK(s.diverged_count == 0);
  CHECK(std::isfinite(s.mean_final_r));

  // Header plus the initial iterate plus one row per step at stride 1.
  const std::string trace = read_file(dir / "trace_seed1.csv");
  CHECK(trace.substr(0, trace.find('\n')) == kTraceHeader);
  CHECK(count_lines(trace) == 1 + 1 + 30);

  const std::string summary = read_file(dir / "summary.txt");
  CHECK(summary.find("[seed 1]") != std::string::npos);
  CHECK(summary.find("[seed 2]") != std::string::npos);
  CHECK(summary.find("[timing]") != std::string::npos);
  CHECK(summary.find("informational only") != std::string::npos);

  const fs::path strided = fresh_dir("artifacts_strided");
  ExperimentConfig cs = ls_base(strided);
  cs.stride = 7;
  run_experiment(cs);
  CHECK(count_lines(read_file(strided / "trace_seed1.csv")) == 1 + 1 + 30 / 7);

  const fs::path zero = fresh_dir("artifacts_zero");
  ExperimentConfig cz = ls_base(zero);
  cz.iterations = 0;
  const RunSummary sz = run_experiment(cz);
  CHECK(sz.per_seed[0].steps_run == 0);
  CHECK(count_lines(read_file(zero / "trace_seed1.csv")) == 2);
}

TEST_CASE("engine: trace bytes are identical across thread counts") {
  const fs::path a = fresh_dir("threads_a");
  const fs::path b = fresh_dir("threads_b");
  const fs::path c = fresh_dir("threads_c");
  ExperimentConfig cfg = ls_base(a);
  cfg.iterations = 60;
  cfg.seeds = {1, 2, 3, 4};
  cfg.threads = 1;
  run_experiment(cfg);
  cfg.output = b.string();
  cfg.threads = 8;
  run_experiment(cfg);
  cfg.output = c.string();
  cfg.threads = 1;
  run_experiment(cfg);

  for (uint64_t seed : cfg.seeds) {
    const std::string name = "trace_seed" + std::to_string(seed) + ".csv";
    const std::string ta = read_file(a / name);
    CHECK(ta == read_file(b / name));
    CHECK(ta == read_file(c / name));
  }
  // Summaries agree on everything above the wall-clock section.
  const auto payload = [](const std::string& text) {
    return text.substr(0, text.find("[timing]"));
  };
  const std::string sa = payload(read_file(a / "summary.txt"));
  CHECK(sa == payload(read_file(b / "summary.txt")));
  CHECK(sa == payload(read_file(c / "summary.txt")));
}

TEST_CASE("engine: per-node minibatch streams match a hand SGD loop") {
  const fs::path dir = fresh_dir("streams");
  const fs::path identity = dir / "identity.txt";
  write_file(identity, "2\n1 0\n0 1\n");

  ExperimentConfig cfg;
  cfg.samples = 8;
  cfg.dim = 1;
  cfg.data_seed = 2;
  cfg.target_low = 0.0;
  cfg.target_high = 2.0;
  cfg.graph = GraphKind::complete;
  cfg.n = 2;
  cfg.mixing = "file";
  cfg.mixing_file = identity.string();
  cfg.algorithm = AlgorithmKind::dpsgd;
  cfg.gamma0 = 0.1;
  cfg.eta = 0.5;
  cfg.iterations = 25;
  cfg.seeds = {11};
  cfg.x0_value = 0.3;
  cfg.output = dir.string();

  std::vector<std::vector<double>> captured(2);
  std::vector<int> ks;
  RunHooks hooks;
  hooks.on_record = [&](uint64_t, const AlgoState& st, const MetricsRecord& rec) {
    captured[0].push_back(st.X(0, 0));
    captured[1].push_back(st.X(1, 0));
    ks.push_back(rec.k);
  };
  run_experiment(cfg, &hooks);

  REQUIRE(ks.size() == 26);
  for (int m = 0; m < 26; ++m) CHECK(ks[size_t(m)] == m + 1);

  // With an identity mixing matrix each node runs plain SGD on its own shard,
  // drawing batches from the stream keyed by (seed, node, iteration).
  const Problem& p = build_experiment(cfg).problem;
  for (int i = 0; i < 2; ++i) {
    const int local_n = p.local(i).size();
    const int b = minibatch_size(local_n, cfg.eta);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, cfg.x0_value);
    CHECK(captured[size_t(i)][0] == x(0));
    for (int m = 1; m <= 25; ++m) {
      RandomStream rs(cfg.seeds[0], uint32_t(i), uint32_t(m), StreamTag::minibatch);
      const std::vector<int> xi = sample_indices(local_n, b, rs);
      x -= cfg.gamma0 * p.stochastic_gradient(i, x, xi);
      CHECK(captured[size_t(i)][size_t(m)] == x(0));
    }
  }
}

TEST_CASE("engine: unstable two-term recursion is recorded as diverged") {
  const fs::path dir = fresh_dir("diverged");
  ExperimentConfig cfg = fixture_cfg(dir);
  cfg.algorithm = AlgorithmKind::d2;
  cfg.gamma0 = 0.25;
  cfg.x0_mode = "gaussian";
  cfg.x0_scale = 1.0;
  cfg.iterations = 500;
  cfg.seeds = {1, 2, 3};

  const RunSummary s = run_experiment(cfg);
  CHECK(s.diverged_count == 3);
  for (const SeedResult& r : s.per_seed) {
    CHECK(r.diverged);
    CHECK(r.diverged_at >= 1);
    CHECK(r.steps_run <= 500);
    CHECK_FALSE(r.bound.available);  // no tracking variable in this recursion
  }
  CHECK(std::isnan(s.mean_final_r));
  CHECK(read_file(dir / "summary.txt").find("diverged = true") != std::string::npos);
}

TEST_CASE("engine: tracking run reports a bound that dominates the measured rate") {
  const fs::path dir = fresh_dir("bound");
  ExperimentConfig cfg = fixture_cfg(dir);
  cfg.seeds = {1, 2};

  const BuiltExperiment built = build_experiment(cfg);
  CHECK(built.constants_ok);
  REQUIRE(built.reference.has_value());
  CHECK(built.reference->f_star == doctest::Approx(1.0));
  CHECK(built.constants.sigma_s_sq == 0.0);  // full batches at eta = 1
  CHECK(built.stepsize_cap_value == doctest::Approx(1.0 / 9.0));

  const RunSummary s = run_experiment(cfg);
  for (const SeedResult& r : s.per_seed) {
    CHECK_FALSE(r.diverged);
    CHECK(r.steps_run == 600);
    CHECK(r.max_tracking_residual <= 1e-10);
    CHECK(r.final_consensus < 1e-16);
    REQUIRE(r.bound.available);
    CHECK(r.bound.within_cap);
    CHECK(r.bound.value > 0.0);
    CHECK(r.bound.holds);
    CHECK(r.bound.network_ratio >= 0.0);
  }
  CHECK(read_file(dir / "summary.txt").find("bound_holds = true") != std::string::npos);

  // Above the analyzed stepsize range the bound is still reported but flagged.
  const fs::path over = fresh_dir("bound_over_cap");
  ExperimentConfig co = fixture_cfg(over);
  co.gamma0 = 0.2;
  co.iterations = 200;
  const RunSummary so = run_experiment(co);
  REQUIRE(so.per_seed[0].bound.available);
  CHECK_FALSE(so.per_seed[0].bound.within_cap);
}

TEST_CASE("engine: epsilon scan reports the first iterate meeting the target") {
  const fs::path dir = fresh_dir("epsilon");
  ExperimentConfig cfg = fixture_cfg(dir);
  cfg.gamma0 = 0.05;
  cfg.iterations = 400;

  const auto iterations_to = [&](double eps, const char* name) {
    ExperimentConfig c = cfg;
    c.epsilon = eps;
    c.output = (dir / name).string();
    return run_experiment(c).per_seed[0].iterations_to_epsilon;
  };
  CHECK(iterations_to(0.0, "off") == -1);
  CHECK(iterations_to(1e9, "huge") == 1);
  const int64_t coarse = iterations_to(2.0, "coarse");
  const int64_t fine = iterations_to(1.0, "fine");
  CHECK(coarse >= 1);
  CHECK(fine >= coarse);
  CHECK(fine <= 401);
}

TEST_CASE("engine: centralized full-batch unit step lands on the pooled optimum") {
  const fs::path dir = fresh_dir("centralized");
  ExperimentConfig cfg;
  cfg.samples = 6;
  cfg.dim = 1;
  cfg.data_seed = 5;
  cfg.algorithm = AlgorithmKind::centralized_sgd;
  cfg.batch = 6;
  cfg.gamma0 = 1.0;
  cfg.iterations = 1;
  cfg.seeds = {5};
  cfg.output = dir.string();

  const RunSummary s = run_experiment(cfg);
  const SeedResult& r = s.per_seed[0];
  CHECK_FALSE(r.diverged);
  CHECK(r.final_gap <= 1e-20);
  CHECK(r.final_grad_norm_sq <= 1e-20);
  CHECK(r.final_consensus == 0.0);
  CHECK(r.max_tracking_residual == 0.0);

  ExperimentConfig bad = cfg;
  bad.batch = 7;
  CHECK_THROWS_WITH_AS(build_experiment(bad), "config: centralized batch must lie in [1, N]",
                       std::invalid_argument);
}

TEST_CASE("engine: build failures carry actionable messages") {
  const fs::path dir = fresh_dir("build_failures");

  ExperimentConfig missing_csv;
  missing_csv.source = "csv";
  missing_csv.csv_path = (dir / "absent.csv").string();
  CHECK_THROWS_AS(build_experiment(missing_csv), std::runtime_error);

  ExperimentConfig missing_mixing = ls_base(dir);
  missing_mixing.mixing = "file";
  missing_mixing.mixing_file = (dir / "absent.txt").string();
  CHECK_THROWS_AS(build_experiment(missing_mixing), std::runtime_error);

  const fs::path two_node_graph = dir / "pair.txt";
  write_file(two_node_graph, "2\n1 2\n");
  ExperimentConfig mismatch = ls_base(dir);
  mismatch.graph = GraphKind::explicit_edges;
  mismatch.topology_file = two_node_graph.string();
  CHECK_THROWS_WITH_AS(build_experiment(mismatch),
                       "config: topology file node count does not match topology.n",
                       std::invalid_argument);
}

TEST_CASE("engine: sweeps derive one run per axis value") {
  CHECK(sweep_axis_from_string("K") == SweepAxis::iterations);
  CHECK(sweep_axis_from_string("n") == SweepAxis::nodes);
  CHECK(sweep_axis_from_string("gamma") == SweepAxis::gamma);
  CHECK(sweep_axis_from_string("topology") == SweepAxis::topology);
  CHECK_THROWS_WITH_AS(sweep_axis_from_string("foo"), "unknown sweep axis 'foo'",
                       std::invalid_argument);

  // Horizon axis: the averaged stationarity measure decays with K, so the
  // fitted log-log slope must come out negative.
  const fs::path kdir = fresh_dir("sweep_iterations");
  ExperimentConfig base = ls_base(kdir);
  base.n = 2;
  base.graph = GraphKind::ring;
  base.eta = 1.0;
  base.seeds = {1, 2};
  const SweepResult ks = run_sweep(base, SweepAxis::iterations, {"200", "400", "800"});
  REQUIRE(ks.points.size() == 3);
  CHECK(ks.points[2].summary.config.iterations == 800);
  CHECK(fs::exists(kdir / "iterations_200"));
  CHECK(fs::exists(ks.csv_path));
  CHECK(fs::exists(kdir / "sweep_summary.txt"));
  REQUIRE(ks.rate_exponent_ok);
  CHECK(ks.rate_exponent < -0.3);
  const std::string csv = read_file(ks.csv_path);
  CHECK(csv.find("axis,value,mean_final_R") == 0);
  CHECK(count_lines(csv) == 4);

  const fs::path gdir = fresh_dir("sweep_gamma");
  ExperimentConfig gbase = ls_base(gdir);
  gbase.iterations = 50;
  const SweepResult gs = run_sweep(gbase, SweepAxis::gamma, {"0.02", "0.05"});
  REQUIRE(gs.points.size() == 2);
  CHECK(gs.points[0].summary.config.gamma0 == 0.02);
  CHECK(gs.points[1].summary.config.gamma0 == 0.05);
  CHECK_FALSE(gs.rate_exponent_ok);

  const fs::path tdir = fresh_dir("sweep_topology");
  ExperimentConfig tbase = ls_base(tdir);
  tbase.n = 4;
  tbase.iterations = 50;
  const SweepResult ts = run_sweep(tbase, SweepAxis::topology, {"ring", "complete"});
  REQUIRE(ts.points.size() == 2);
  CHECK(ts.points[0].summary.config.graph == GraphKind::ring);
  CHECK(ts.points[1].summary.config.graph == GraphKind::complete);
  CHECK_THROWS_WITH_AS(run_sweep(tbase, SweepAxis::topology, {"explicit"}),
                       "run_sweep: topology axis values must be generator kinds",
                       std::invalid_argument);

  // Node axis: stepsize rescaling keeps the per-node workload comparable, so
  // the iterations-to-target speedup stays near one.
  const fs::path ndir = fresh_dir("sweep_nodes");
  ExperimentConfig nbase = ls_base(ndir);
  nbase.eta = 1.0;
  nbase.n = 2;
  nbase.iterations = 300;
  nbase.epsilon = 0.5;
  nbase.seeds = {1};
  const SweepResult ns = run_sweep(nbase, SweepAxis::nodes, {"2", "4"}, true);
  REQUIRE(ns.points.size() == 2);
  CHECK(ns.points[0].summary.config.gamma0 == doctest::Approx(0.05));
  CHECK(ns.points[1].summary.config.gamma0 == doctest::Approx(0.10));
  CHECK(ns.points[0].speedup == doctest::Approx(1.0));
  CHECK(ns.points[1].speedup > 0.0);

  ExperimentConfig with_props = nbase;
  with_props.proportions = {0.5, 0.5};
  CHECK_THROWS_WITH_AS(run_sweep(with_props, SweepAxis::nodes, {"2"}),
                       "run_sweep: nodes axis requires equal partitions", std::invalid_argument);
  ExperimentConfig with_file = nbase;
  with_file.mixing = "file";
  with_file.mixing_file = "w.txt";
  CHECK_THROWS_WITH_AS(run_sweep(with_file, SweepAxis::nodes, {"2"}),
                       "run_sweep: nodes axis requires metropolis mixing", std::invalid_argument);
  ExperimentConfig with_explicit = nbase;
  with_explicit.graph = GraphKind::explicit_edges;
  with_explicit.topology_file = "topo.txt";
  CHECK_THROWS_WITH_AS(run_sweep(with_explicit, SweepAxis::nodes, {"2"}),
                       "run_sweep: nodes axis cannot rescale explicit topologies",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(run_sweep(nbase, SweepAxis::gamma, {}),
                       "run_sweep: need at least one axis value", std::invalid_argument);
}

TEST_CASE("engine: thread resolution prefers config, then environment") {
  ExperimentConfig cfg;
  cfg.threads = 3;
  CHECK(resolve_threads(cfg) == 3);

  cfg.threads = 0;
  REQUIRE(setenv("DECLAB_THREADS", "5", 1) == 0);
  CHECK(resolve_threads(cfg) == 5);
  REQUIRE(setenv("DECLAB_THREADS", "junk", 1) == 0);
  CHECK(resolve_threads(cfg) >= 1);
  REQUIRE(unsetenv("DECLAB_THREADS") == 0);
  CHECK(resolve_threads(cfg) >= 1);
}

TEST_CASE("cli: exit codes distinguish usage, config, and internal errors") {
  const fs::path dir = fresh_dir("cli");
  const fs::path cfg_path = dir / "run.cfg";
  write_file(cfg_path,
             "[problem]\nkind = least_squares\nsamples = 6\ndim = 1\n"
             "[topology]\nkind = complete\nn = 2\n"
             "[algorithm]\nkind = dsgt\n"
             "[schedule]\nkind = constant\ngamma0 = 0.05\n"
             "[run]\neta = 1\niterations = 20\nseeds = 1\noutput = " +
                 (dir / "out").string() + "\n");
  const fs::path bad_path = dir / "bad.cfg";
  write_file(bad_path, "[problem]\nbogus = 1\n");
  const fs::path identity = dir / "identity.txt";
  write_file(identity, "2\n1 0\n0 1\n");

  CHECK(run_cli("run -c " + cfg_path.string() + " -o " + (dir / "cli_out").string()) == 0);
  CHECK(fs::exists(dir / "cli_out" / "summary.txt"));
  CHECK(run_cli("validate -c " + cfg_path.string()) == 0);
  CHECK(run_cli("validate --matrix " + identity.string()) == 0);
  CHECK(run_cli("bound --rho 0.5 --n 3 --L 1 --gamma0 0.05 --sigma-s-sq 0.5 --d-sq 1") == 0);
  CHECK(run_cli("spectra --matrix " + identity.string() + " --gamma 0.25") == 0);

  CHECK(run_cli("") == 1);                                    // no subcommand
  CHECK(run_cli("frobnicate") == 1);                          // unknown subcommand
  CHECK(run_cli("run") == 1);                                 // missing required option
  CHECK(run_cli("validate -c " + bad_path.string()) == 2);    // config error
  CHECK(run_cli("validate -c " + (dir / "absent.cfg").string()) == 2);
  CHECK(run_cli("bound --rho 0.5 --n 3 --L 1") == 2);         // no regime selected
}
