#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "declab/rng.hpp"

namespace declab {

enum class LossKind { least_squares, logistic };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

// One node's private samples. For least squares each row is a target vector;
// for logistic each row is a feature vector with a 0/1 label alongside.
class LocalDataset {
 public:
  explicit LocalDataset(Eigen::MatrixXd rows, Eigen::VectorXd labels = Eigen::VectorXd());

  int size() const { return int(rows_.rows()); }
  int dim() const { return int(rows_.cols()); }
  const Eigen::MatrixXd& rows() const { return rows_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  bool has_labels() const { return labels_.size() > 0; }

 private:
  Eigen::MatrixXd rows_;
  Eigen::VectorXd labels_;
};

// Finite-sum objective split across nodes. Local objectives are plain sums
// over samples (no 1/N_i normalization), and the global objective is the sum
// of the local ones.
class Problem {
 public:
  Problem(LossKind kind, std::vector<LocalDataset> locals);

  LossKind kind() const { return kind_; }
  int nodes() const { return int(locals_.size()); }
  int dim() const { return dim_; }
  int total_samples() const { return total_; }
  const LocalDataset& local(int i) const { return locals_.at(size_t(i)); }

  double sample_loss(int i, int u, const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample_gradient(int i, int u, const Eigen::VectorXd& x) const;
  double local_loss(int i, const Eigen::VectorXd& x) const;
  Eigen::VectorXd full_gradient(int i, const Eigen::VectorXd& x) const;
  double loss(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  // Sum of per-sample gradients over the index set `xi` (may repeat a node's
  // index only if the caller sampled with repetition; ours never do).
  Eigen::VectorXd stochastic_gradient(int i, const Eigen::VectorXd& x,
                                      const std::vector<int>& xi) const;

  // All samples merged into a single node, preserving node-then-sample order.
  Problem pooled() const;

 private:
  LossKind kind_;
  std::vector<LocalDataset> locals_;
  int dim_ = 0;
  int total_ = 0;
};

// Mini-batch size under proportional sampling; validates 1 <= b <= N_i.
int minibatch_size(int local_size, double eta);
// Draw round(eta*N_i) indices uniformly without replacement.
std::vector<int> sample_minibatch(const LocalDataset& ds, double eta, RandomStream& rs);

// Exact second central moment of the mini-batch gradient sum about its mean
// (b/N) * full_gradient. Coincides with the deviation-from-eta*grad variance
// whenever eta*N_i is integral. Least squares uses the closed form (the
// deviation never involves x); logistic enumerates all C(N, b) batches and
// requires C(N, b) <= 1e6.
double node_minibatch_variance(const Problem& p, int i, int b, const Eigen::VectorXd& x);

struct NodeVariances {
  std::vector<double> per_node;  // sigma_i^2
  double total = 0.0;            // sigma_s^2 = sum_i sigma_i^2
};
NodeVariances minibatch_variance_oracle(const Problem& p, double eta, const Eigen::VectorXd& x);

struct ProblemConstants {
  std::vector<double> smoothness_i;  // L_i per node
  double smoothness = 0.0;           // L = max_i L_i
  double smoothness_tilde = 0.0;     // L * sqrt(1 + n^2 lambda^2)
  double per_sample_curvature = 0.0; // c_l: max per-sample gradient Lipschitz bound
  double eta = 1.0;
  double lambda = 0.0;               // relative variance slope (zero for both losses)
  std::vector<double> sigma_i_sq;
  double sigma_s_sq = 0.0;           // max over probe points
};
// With compute_sigma = false the variance oracle is skipped and sigma_s_sq
// is NaN (used when the enumeration budget would be exceeded).
ProblemConstants problem_constants(const Problem& p, double eta,
                                   const std::vector<Eigen::VectorXd>& probe_points,
                                   bool compute_sigma = true);

struct CentralizedReference {
  Eigen::VectorXd x_star;
  double f_star = 0.0;
  double smoothness = 0.0;  // curvature bound for the pooled objective
  double sigma_sq = 0.0;    // per-draw sampler variance bound, max over probes
  bool numeric = false;     // true when x_star came from an iterative solve
};
// Least squares solves in closed form; logistic runs full-gradient descent to
// ||grad|| <= 1e-10 within `budget` iterations and throws if that fails.
CentralizedReference centralized_reference(const Problem& p,
                                           const std::vector<Eigen::VectorXd>& probe_points,
                                           int64_t budget = 2'000'000);
// ||centered per-sample gradient rows at x||_F^2 / N for the pooled dataset.
double centralized_gradient_variance(const Problem& p, const Eigen::VectorXd& x);

// Deterministic shuffle by `seed`, then contiguous split with cumulative
// rounding of the proportions. Throws if any part rounds to zero samples.
std::vector<LocalDataset> partition_dataset(const LocalDataset& global, int n,
                                            const std::vector<double>& proportions,
                                            uint64_t seed);

LocalDataset generate_least_squares(int n_samples, int dim, double lo, double hi, uint64_t seed);
LocalDataset generate_logistic_blobs(int n_samples, int dim, double separation, double scale,
                                     uint64_t seed);

// CSV with a header row. Least squares: target_0,...,target_{m-1}.
// Logistic: y,v_0,...,v_{d-1} with y in {0,1}.
LocalDataset load_dataset_csv(const std::string& path, LossKind kind);
void save_dataset_csv(const LocalDataset& ds, LossKind kind, const std::string& path);

}  // namespace declab
