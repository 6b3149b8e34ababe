#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "declab/algorithms.hpp"
#include "declab/problem.hpp"
#include "declab/topology.hpp"

namespace declab {

// Line-oriented "key = value" file with [section] headers and # comments.
// Unknown keys fail fast with the offending key and line number; defaults are
// applied at parse time so serialize() always writes the effective values,
// and parse(serialize(cfg)) == cfg.
struct ExperimentConfig {
  // [problem]
  LossKind loss = LossKind::least_squares;
  std::string source = "synthetic";  // synthetic | csv
  std::string csv_path;
  int dim = 1;
  int samples = 16;
  uint64_t data_seed = 1;
  std::vector<double> proportions;  // empty = equal split
  double target_low = 0.0;          // least-squares synthetic targets
  double target_high = 1.0;
  double blob_separation = 1.0;  // logistic synthetic blobs
  double blob_scale = 1.0;

  // [topology]
  GraphKind graph = GraphKind::complete;
  int n = 1;
  int k_regular = 0;
  uint64_t graph_seed = 1;
  std::string topology_file;  // explicit edge list (1-based)

  // [mixing]
  std::string mixing = "metropolis";  // metropolis | file | optimal3
  std::string mixing_file;

  // [algorithm]
  AlgorithmKind algorithm = AlgorithmKind::dsgt;
  int batch = 0;                          // centralized sample count M
  std::string batch_mode = "proportional";  // proportional | equal
  int equal_batch = 1;

  // [schedule]
  std::string schedule = "constant";  // constant | diminishing
  double gamma0 = 0.1;
  double dim_a = 0.1;
  double dim_p = 0.5;

  // [run]
  double eta = 1.0;
  int64_t iterations = 100;
  std::vector<uint64_t> seeds = {1};
  std::string output = "out";
  int64_t stride = 1;
  double divergence_threshold = 1e6;
  std::string x0_mode = "constant";  // constant | gaussian
  double x0_value = 0.0;
  double x0_scale = 1.0;
  double epsilon = 0.0;  // 0 disables the iterations-to-epsilon scan
  int threads = 0;       // 0 = env/auto

  static ExperimentConfig parse_string(const std::string& text);
  static ExperimentConfig parse_file(const std::string& path);
  std::string serialize() const;
  // Cross-field checks (file existence is checked when the experiment builds).
  void validate() const;
  StepSchedule make_schedule() const;
  BatchPolicy make_batch_policy() const;

  bool operator==(const ExperimentConfig&) const = default;
};

}  // namespace declab
