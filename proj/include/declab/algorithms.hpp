#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "declab/problem.hpp"
#include "declab/topology.hpp"

namespace declab {

enum class AlgorithmKind { dsgt, dsgt_eliminated, dpsgd, d2, centralized_sgd };

AlgorithmKind algorithm_kind_from_string(const std::string& s);
std::string to_string(AlgorithmKind k);

struct StepSchedule {
  enum class Kind { constant, diminishing };
  Kind kind = Kind::constant;
  double gamma0 = 0.0;  // constant value
  double a = 0.0;       // diminishing scale
  double p = 0.0;       // diminishing exponent, in [1/2, 1]

  static StepSchedule constant(double gamma0);
  static StepSchedule diminishing(double a, double p);
  double at(int k) const;  // k >= 1
  bool is_constant() const { return kind == Kind::constant; }
};

// Largest constant stepsize covered by the tracking-rate analysis:
// (1-rho)^2 / (eta L (1+rho)^2 max{sqrt(1+n^2 lambda^2), 24 n^2 lambda^2}).
double stepsize_cap(double rho, double eta, double smoothness, int n, double lambda);
// Horizon-tuned constant stepsize D / (sqrt(K) L sigma_s).
double tuned_constant_stepsize(double big_d, double smoothness, double sigma_s, int64_t K);

// How per-node mini-batch sizes are chosen each iteration.
struct BatchPolicy {
  enum class Mode { proportional, equal };
  Mode mode = Mode::proportional;
  double eta = 1.0;    // proportional: b_i = round(eta * N_i)
  int equal_size = 1;  // equal: b_i = equal_size for every node

  static BatchPolicy proportional(double eta);
  static BatchPolicy equal(int size);
  int batch_for(int local_size) const;
};

// Addresses the per-(node, iteration) random streams of one run.
struct RunRng {
  uint64_t master_seed = 0;
  RandomStream stream(int node, int iteration, StreamTag tag) const {
    return RandomStream(master_seed, uint32_t(node), uint32_t(iteration), tag);
  }
};

// Row i of X/Y/S belongs to node i. k counts iterates starting at 1.
// X_prev/S_prev carry the one-step history used by the two-term recursions.
struct AlgoState {
  Eigen::MatrixXd X, Y, S, X_prev, S_prev;
  int k = 0;
  bool diverged = false;
  int diverged_at = -1;
  double x0_norm = 0.0;
  bool has_history = false;

  bool tracking_available() const { return Y.size() > 0; }
};

// Relative gradient-tracking residual ||mean(Y) - mean(S)|| / (1 + ||S||_F);
// zero for states without a tracking variable.
double tracking_residual(const AlgoState& st);

// Gradient-tracking init: X_1 = W x0, S_1 = batch gradients at X_1, Y_1 = S_1.
// The two-term variants start from X_1 = x0 and bootstrap on their first step.
// Centralized runs use a 1-row state and ignore W.
AlgoState init_state(const Problem& p, const Eigen::MatrixXd& x0, const MixingMatrix& w,
                     AlgorithmKind kind, const BatchPolicy& batch, const RunRng& rng,
                     double divergence_threshold = 1e6);

void dsgt_step(AlgoState& st, const MixingMatrix& w, double gamma, const Problem& p,
               const BatchPolicy& batch, const RunRng& rng, double divergence_threshold = 1e6);
// Y-free rewriting X_{k+1} = 2 W X_k - W^2 X_{k-1} - gamma W (S_k - S_{k-1});
// valid for constant gamma only (enforced by the runner).
void dsgt_step_eliminated(AlgoState& st, const MixingMatrix& w, double gamma, const Problem& p,
                          const BatchPolicy& batch, const RunRng& rng,
                          double divergence_threshold = 1e6);
void dpsgd_step(AlgoState& st, const MixingMatrix& w, double gamma, const Problem& p,
                const BatchPolicy& batch, const RunRng& rng, double divergence_threshold = 1e6);
// X_{k+1} = 2 W X_k - W X_{k-1} - gamma W (S_k - S_{k-1}); first call runs a
// one-step bootstrap X_2 = W X_1 - gamma S_1.
void d2_step(AlgoState& st, const MixingMatrix& w, double gamma, const Problem& p,
             const BatchPolicy& batch, const RunRng& rng, double divergence_threshold = 1e6);
// Mini-batch SGD on the pooled problem: x' = x - (gamma/M) sum of M sampled
// per-sample gradients. `p` must be single-node.
void centralized_sgd_step(AlgoState& st, double gamma, const Problem& p, int batch_m,
                          const RunRng& rng, double divergence_threshold = 1e6);

// Dispatch helper used by the engine. `batch_m` applies to centralized runs.
void algorithm_step(AlgorithmKind kind, AlgoState& st, const MixingMatrix& w, double gamma,
                    const Problem& p, const BatchPolicy& batch, int batch_m, const RunRng& rng,
                    double divergence_threshold);

// Companion linearization of the two-term recursion on the full-gradient
// quadratic: H = [[(2-gamma) W, -(1-gamma) W], [I, 0]]. The iteration can
// converge only if no eigenvalue lies strictly outside the unit circle.
struct CompanionSpectrum {
  Eigen::MatrixXd h;
  Eigen::VectorXcd eigenvalues;
  double spectral_radius = 0.0;
};
CompanionSpectrum d2_companion(const MixingMatrix& w, double gamma);

}  // namespace declab
