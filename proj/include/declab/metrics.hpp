#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "declab/algorithms.hpp"
#include "declab/problem.hpp"

namespace declab {

// Snapshot of iterate k. consensus_err is ||X - 1 xbar^T||_F^2; grad_norm_sq,
// loss, and gap are evaluated at the node average xbar. gap and running_rc are
// NaN when no reference optimum is available.
struct MetricsRecord {
  int k = 0;
  double gamma = 0.0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double consensus_err = 0.0;
  double tracking_residual = 0.0;
  double running_r = 0.0;
  double running_rc = 0.0;
  double gap = 0.0;
  bool finite = true;
};

// Stepsize-weighted running averages over the trajectory:
//   R(k)   = sum_t gamma_t (||grad f(xbar_t)||^2 + n L^2 ||X_t - 1 xbar_t||_F^2) / sum_t gamma_t
//   Rc(k)  = sum_t gamma_t (f(xbar_t) - f* + (L/2) ||X_t - 1 xbar_t||_F^2) / sum_t gamma_t
// Every iterate must be pushed exactly once, in order.
class RunningMetrics {
 public:
  RunningMetrics(int n, double smoothness, std::optional<double> f_star);

  MetricsRecord update(const Problem& p, const AlgoState& st, double gamma_k);

  double running_r() const { return sum_gamma_ > 0 ? sum_weighted_ / sum_gamma_ : 0.0; }
  double min_running_r() const { return min_r_; }
  double running_rc() const;
  // Weighted running average of ||grad f(xbar_t)||^2 alone.
  double grad_running_avg() const { return sum_gamma_ > 0 ? sum_grad_ / sum_gamma_ : 0.0; }

 private:
  int n_;
  double smoothness_;
  std::optional<double> f_star_;
  double sum_gamma_ = 0.0;
  double sum_weighted_ = 0.0;
  double sum_weighted_c_ = 0.0;
  double sum_grad_ = 0.0;
  double min_r_ = 0.0;
  bool any_ = false;
};

// Inputs of the closed-form rate bounds. x1/y1 consensus terms are the
// realized (or exactly computed) initial deviations; d_sq = n L (f(xbar_1) - f*).
struct BoundConstants {
  double rho = 0.0;
  double eta = 1.0;
  int n = 1;
  double smoothness = 0.0;        // L
  double smoothness_tilde = 0.0;  // L sqrt(1 + n^2 lambda^2)
  double lambda = 0.0;
  double sigma_s_sq = 0.0;
  double gamma1 = 0.0;
  double x1_consensus_sq = 0.0;
  double y1_consensus_sq = 0.0;
  double d_sq = 0.0;

  // Initial-condition constant; depends on the first stepsize.
  double c_init(double gamma_1) const;
  double c_init() const { return c_init(gamma1); }
  // Consensus recursion constants.
  double c1() const;
  double c2() const;
  double c3() const;
  double c0_of_k(int64_t k, double gamma) const;
  double c_tilde0(double gamma_1) const;
};

// One-step contraction factor of the consensus recursion; < 1 whenever
// gamma is at most the stepsize cap, and always <= (sqrt(rho)+rho)/(1+rho).
double consensus_contraction(double rho, double gamma, double eta, double smoothness_tilde);

// Prefix sums of gamma_t, gamma_t^2, gamma_t^3 over t = 1..k.
struct StepsizeSums {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  double gamma1 = 0.0;
  int64_t count = 0;
  void push(double gamma);
};
StepsizeSums accumulate_stepsizes(const StepSchedule& sched, int64_t k);

struct BoundBreakdown {
  double term_d = 0.0;      // 12 D^2 / (eta L)
  double term_sigma = 0.0;  // 9 L sigma_s^2 / eta * sum gamma^2
  double term_rho = 0.0;    // 96 rho^2 (1+sqrt(rho))^2 n L Ltilde sigma_s^2 / (1-rho)^3 * sum gamma^3
  double term_c = 0.0;      // 12 n L gamma_1 C
  double total = 0.0;       // (sum of terms) / sum gamma
  double network_ratio = 0.0;  // n Ltilde rho^2 sum gamma^3 / ((1-rho)^3 sum gamma^2)
  bool within_cap = true;
};
// Upper bound on R(k) for the gradient-tracking method under stepsizes
// gamma_t <= cap. When gamma1 exceeds the cap the value is still computed and
// within_cap is set false.
BoundBreakdown tracking_rate_bound(const BoundConstants& c, const StepsizeSums& sums);

// Constant-stepsize specialization evaluated at horizon K.
double bound_constant_step(const BoundConstants& c, double gamma0, int64_t K);

struct TunedBound {
  double value = 0.0;
  double gamma = 0.0;
  double min_horizon = 0.0;
  bool horizon_ok = true;
};
// Horizon-tuned constant stepsize D/(sqrt(K) L sigma_s); requires sigma_s > 0.
TunedBound bound_tuned_step(const BoundConstants& c, int64_t K);

// Diminishing stepsizes gamma_t = a / t^p with p in [1/2, 1]; k >= 2.
double diminishing_sq_sum_bound(double a, double p, double k);  // c2
double diminishing_cube_sum_bound(double a, double p);          // c3
double bound_diminishing_step(const BoundConstants& c, double a, double p, int64_t k);

// Convex-case bound on Rc(k); e1_sq = ||xbar_1 - x*||^2.
double convex_rate_bound(const BoundConstants& c, const StepsizeSums& sums, double e1_sq);

// Least-squares slope of log(value) against log(horizon); needs >= 3 points,
// all positive.
double rate_fit(const std::vector<double>& horizons, const std::vector<double>& values);

}  // namespace declab
