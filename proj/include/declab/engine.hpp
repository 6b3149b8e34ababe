#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "declab/config.hpp"
#include "declab/metrics.hpp"

namespace declab {

// Everything derived from a config that is shared by all seeds of a run.
struct BuiltExperiment {
  Problem problem;      // pooled single-node problem for centralized runs
  MixingMatrix mixing;  // trivial 1x1 matrix for centralized runs
  ProblemConstants constants;
  bool constants_ok = false;  // sigma oracle may be out of budget
  std::optional<CentralizedReference> reference;
  double stepsize_cap_value = 0.0;
};
BuiltExperiment build_experiment(const ExperimentConfig& cfg);

struct BoundReport {
  bool available = false;
  double value = 0.0;
  double network_ratio = 0.0;
  bool within_cap = true;
  bool holds = false;
};

struct SeedResult {
  uint64_t seed = 0;
  bool diverged = false;
  int diverged_at = -1;
  int64_t steps_run = 0;
  double final_running_r = 0.0;
  double min_running_r = 0.0;
  double final_running_rc = 0.0;
  double final_consensus = 0.0;
  double final_loss = 0.0;
  double final_gap = 0.0;
  double final_grad_norm_sq = 0.0;
  double max_tracking_residual = 0.0;
  int64_t iterations_to_epsilon = -1;
  BoundReport bound;
  double wall_seconds = 0.0;  // informational; not part of the reproducible payload
  std::string trace_path;
};

struct RunSummary {
  ExperimentConfig config;
  std::vector<SeedResult> per_seed;
  int64_t diverged_count = 0;
  double mean_final_r = 0.0, std_final_r = 0.0;
  double mean_min_r = 0.0, std_min_r = 0.0;
  double mean_final_loss = 0.0;
  double mean_final_consensus = 0.0;
  double mean_iterations_to_epsilon = -1.0;  // over seeds that reached epsilon
  std::string summary_path;
};

struct RunHooks {
  // Invoked after every iterate of every seed (ignores the trace stride).
  // Hooked runs execute seeds sequentially on the calling thread.
  std::function<void(uint64_t seed, const AlgoState& st, const MetricsRecord& rec)> on_record;
};

// Runs every seed, writes config.cfg, per-seed trace CSVs, and summary.txt
// under cfg.output. Trace bytes depend only on (config, seed).
RunSummary run_experiment(const ExperimentConfig& cfg, const RunHooks* hooks = nullptr);

enum class SweepAxis { iterations, nodes, gamma, topology };
SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis a);

struct SweepPoint {
  std::string value;
  RunSummary summary;
  double speedup = 0.0;  // nodes axis: iterations-to-eps of first point / this point
};

struct SweepResult {
  SweepAxis axis = SweepAxis::iterations;
  std::vector<SweepPoint> points;
  double rate_exponent = 0.0;  // iterations axis: log-log slope of mean min R
  bool rate_exponent_ok = false;
  std::string csv_path;
};

// Derives one config per axis value from `base` and runs each. With
// scale_gamma_with_n, nodes-axis points scale the stepsize by n/base.n.
SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<std::string>& values, bool scale_gamma_with_n = false);

// Thread-count resolution: explicit config value, else DECLAB_THREADS, else
// hardware concurrency.
int resolve_threads(const ExperimentConfig& cfg);

}  // namespace declab
