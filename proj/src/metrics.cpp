#include "declab/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace declab {

RunningMetrics::RunningMetrics(int n, double smoothness, std::optional<double> f_star)
    : n_(n), smoothness_(smoothness), f_star_(f_star) {
  if (n < 1) throw std::invalid_argument("RunningMetrics: need n >= 1");
}

MetricsRecord RunningMetrics::update(const Problem& p, const AlgoState& st, double gamma_k) {
  MetricsRecord r;
  r.k = st.k;
  r.gamma = gamma_k;
  const Eigen::VectorXd xbar = st.X.colwise().mean().transpose();
  r.consensus_err = (st.X.rowwise() - xbar.transpose()).squaredNorm();
  r.grad_norm_sq = p.gradient(xbar).squaredNorm();
  r.loss = p.loss(xbar);
  r.tracking_residual = tracking_residual(st);
  r.gap = f_star_ ? r.loss - *f_star_ : std::numeric_limits<double>::quiet_NaN();

  sum_gamma_ += gamma_k;
  sum_grad_ += gamma_k * r.grad_norm_sq;
  sum_weighted_ +=
      gamma_k * (r.grad_norm_sq + double(n_) * smoothness_ * smoothness_ * r.consensus_err);
  if (f_star_)
    sum_weighted_c_ += gamma_k * ((r.loss - *f_star_) + 0.5 * smoothness_ * r.consensus_err);
  r.running_r = running_r();
  r.running_rc = running_rc();
  min_r_ = any_ ? std::min(min_r_, r.running_r) : r.running_r;
  any_ = true;
  r.finite = std::isfinite(r.loss) && std::isfinite(r.grad_norm_sq) &&
             std::isfinite(r.consensus_err) && std::isfinite(r.running_r);
  return r;
}

double RunningMetrics::running_rc() const {
  if (!f_star_ || sum_gamma_ <= 0) return std::numeric_limits<double>::quiet_NaN();
  return sum_weighted_c_ / sum_gamma_;
}

double consensus_contraction(double rho, double gamma, double eta, double smoothness_tilde) {
  if (!(rho >= 0.0 && rho < 1.0))
    throw std::invalid_argument("consensus_contraction: need rho in [0, 1)");
  const double g = rho * gamma * eta * smoothness_tilde;
  const double one_m = 1.0 - rho * rho;
  return 2.0 * rho * rho / (1.0 + rho * rho) + 2.0 * g * g / one_m +
         2.0 * g * std::sqrt(g * g + 2.0 * (1.0 + rho) * (1.0 + rho)) / one_m;
}

double BoundConstants::c_init(double gamma_1) const {
  const double sr = std::sqrt(rho);
  if (rho == 0.0) return 0.0;
  const double first = 2.0 * sr * smoothness_tilde / (1.0 - sr) * x1_consensus_sq;
  const double second = 2.0 * smoothness_tilde * rho * rho * (1.0 + rho) * gamma_1 * gamma_1 /
                        std::pow(1.0 - sr, 3) * y1_consensus_sq;
  return first + second;
}

double BoundConstants::c1() const {
  const double one_m = 1.0 - rho * rho;
  const double el = eta * smoothness_tilde;
  return 4.0 * double(n) * rho * rho * el * el / (one_m * one_m);
}

double BoundConstants::c2() const { return 8.0 * rho * rho * sigma_s_sq / (1.0 - rho * rho); }

double BoundConstants::c3() const {
  const double nl = eta * lambda;
  return 12.0 * double(n) * rho * rho * nl * nl / (1.0 - rho * rho);
}

double BoundConstants::c0_of_k(int64_t k, double gamma) const {
  const double theta = consensus_contraction(rho, gamma, eta, smoothness_tilde);
  if (theta <= 0.0) return 0.0;
  return std::pow(theta, double(k)) *
         (x1_consensus_sq +
          2.0 * rho * rho * gamma * gamma * double(k) / ((1.0 - rho * rho) * theta) *
              y1_consensus_sq);
}

double BoundConstants::c_tilde0(double gamma_1) const {
  const double theta = consensus_contraction(rho, gamma_1, eta, smoothness_tilde);
  if (theta >= 1.0)
    throw std::invalid_argument("BoundConstants::c_tilde0: contraction factor must be < 1");
  return gamma_1 * theta / (1.0 - theta) * x1_consensus_sq +
         2.0 * rho * rho * std::pow(gamma_1, 3) /
             ((1.0 - rho * rho) * (1.0 - theta) * (1.0 - theta)) * y1_consensus_sq;
}

void StepsizeSums::push(double gamma) {
  if (count == 0) gamma1 = gamma;
  s1 += gamma;
  s2 += gamma * gamma;
  s3 += gamma * gamma * gamma;
  ++count;
}

StepsizeSums accumulate_stepsizes(const StepSchedule& sched, int64_t k) {
  StepsizeSums sums;
  for (int64_t t = 1; t <= k; ++t) sums.push(sched.at(int(t)));
  return sums;
}

BoundBreakdown tracking_rate_bound(const BoundConstants& c, const StepsizeSums& sums) {
  if (!(c.rho >= 0.0 && c.rho < 1.0))
    throw std::invalid_argument("tracking_rate_bound: need rho in [0, 1)");
  if (sums.count < 1) throw std::invalid_argument("tracking_rate_bound: empty stepsize sums");
  const double sr = std::sqrt(c.rho);
  BoundBreakdown b;
  b.term_d = 12.0 * c.d_sq / (c.eta * c.smoothness);
  b.term_sigma = 9.0 * c.smoothness * c.sigma_s_sq / c.eta * sums.s2;
  b.term_rho = 96.0 * c.rho * c.rho * (1.0 + sr) * (1.0 + sr) * double(c.n) * c.smoothness *
               c.smoothness_tilde * c.sigma_s_sq / std::pow(1.0 - c.rho, 3) * sums.s3;
  b.term_c = 12.0 * double(c.n) * c.smoothness * sums.gamma1 * c.c_init(sums.gamma1);
  b.total = (b.term_d + b.term_sigma + b.term_rho + b.term_c) / sums.s1;
  b.network_ratio = sums.s2 > 0 ? double(c.n) * c.smoothness_tilde * c.rho * c.rho * sums.s3 /
                                      (std::pow(1.0 - c.rho, 3) * sums.s2)
                                : 0.0;
  const double cap = stepsize_cap(c.rho, c.eta, c.smoothness, c.n, c.lambda);
  b.within_cap = sums.gamma1 <= cap * (1.0 + 1e-12);
  return b;
}

double bound_constant_step(const BoundConstants& c, double gamma0, int64_t K) {
  if (!(gamma0 > 0.0) || K < 1)
    throw std::invalid_argument("bound_constant_step: need gamma0 > 0 and K >= 1");
  const double sr = std::sqrt(c.rho);
  return 12.0 * c.d_sq / (double(K) * c.eta * c.smoothness * gamma0) +
         9.0 * c.smoothness * c.sigma_s_sq * gamma0 / c.eta +
         96.0 * c.rho * c.rho * (1.0 + sr) * (1.0 + sr) * double(c.n) * c.smoothness *
             c.smoothness_tilde * c.sigma_s_sq * gamma0 * gamma0 / std::pow(1.0 - c.rho, 3) +
         12.0 * double(c.n) * c.smoothness * c.c_init(gamma0) / double(K);
}

TunedBound bound_tuned_step(const BoundConstants& c, int64_t K) {
  if (!(c.sigma_s_sq > 0.0))
    throw std::invalid_argument("bound_tuned_step: requires sigma_s > 0");
  if (K < 1) throw std::invalid_argument("bound_tuned_step: need K >= 1");
  const double sigma_s = std::sqrt(c.sigma_s_sq);
  const double big_d = std::sqrt(c.d_sq);
  TunedBound t;
  t.gamma = tuned_constant_stepsize(big_d, c.smoothness, sigma_s, K);
  t.value = 30.0 * big_d * sigma_s / (c.eta * std::sqrt(double(K))) +
            12.0 * double(c.n) * c.smoothness * c.c_init(t.gamma) / double(K);
  const double sr = std::sqrt(c.rho);
  const double nl = double(c.n) * c.lambda;
  const double inner = std::max((11.0 * c.rho * c.rho * double(c.n) + 1.0) *
                                    std::sqrt(1.0 + nl * nl) / (1.0 - c.rho),
                                24.0 * nl * nl);
  const double root = c.eta * big_d * (1.0 + sr) * (1.0 + sr) /
                      (sigma_s * (1.0 - c.rho) * (1.0 - c.rho)) * inner;
  t.min_horizon = root * root;
  t.horizon_ok = double(K) >= t.min_horizon;
  return t;
}

double diminishing_sq_sum_bound(double a, double p, double k) {
  if (!(p >= 0.5 && p <= 1.0))
    throw std::invalid_argument("diminishing_sq_sum_bound: p must lie in [0.5, 1]");
  if (p == 0.5) return a * a * (std::log(k) + 1.0);
  return 2.0 * a * a * p / (2.0 * p - 1.0);
}

double diminishing_cube_sum_bound(double a, double p) {
  if (!(p >= 0.5 && p <= 1.0))
    throw std::invalid_argument("diminishing_cube_sum_bound: p must lie in [0.5, 1]");
  return 3.0 * std::pow(a, 3) * p / (3.0 * p - 1.0);
}

double bound_diminishing_step(const BoundConstants& c, double a, double p, int64_t k) {
  if (k < 2) throw std::invalid_argument("bound_diminishing_step: need k >= 2");
  if (!(a > 0.0)) throw std::invalid_argument("bound_diminishing_step: need a > 0");
  const double prefactor =
      p == 1.0 ? 1.0 / (a * std::log(double(k)))
               : (1.0 - p) / (a * (std::pow(double(k), 1.0 - p) - 1.0));
  const double sr = std::sqrt(c.rho);
  const double bracket =
      12.0 * c.d_sq / (c.eta * c.smoothness) +
      9.0 * c.smoothness * c.sigma_s_sq * diminishing_sq_sum_bound(a, p, k) / c.eta +
      96.0 * c.rho * c.rho * (1.0 + sr) * (1.0 + sr) * double(c.n) * c.smoothness *
          c.smoothness_tilde * c.sigma_s_sq * diminishing_cube_sum_bound(a, p) /
          std::pow(1.0 - c.rho, 3) +
      12.0 * double(c.n) * c.smoothness * a * c.c_init(a);
  return prefactor * bracket;
}

double convex_rate_bound(const BoundConstants& c, const StepsizeSums& sums, double e1_sq) {
  if (sums.count < 1) throw std::invalid_argument("convex_rate_bound: empty stepsize sums");
  const double sr = std::sqrt(c.rho);
  const double sum = 3.0 * double(c.n) * e1_sq / c.eta +
                     5.0 * c.sigma_s_sq / (c.eta * double(c.n)) * sums.s2 +
                     48.0 * c.rho * c.rho * (1.0 + sr) * (1.0 + sr) * c.smoothness_tilde *
                         c.sigma_s_sq / std::pow(1.0 - c.rho, 3) * sums.s3 +
                     6.0 * sums.gamma1 * c.c_init(sums.gamma1);
  return sum / sums.s1;
}

double rate_fit(const std::vector<double>& horizons, const std::vector<double>& values) {
  if (horizons.size() != values.size() || horizons.size() < 3)
    throw std::invalid_argument("rate_fit: need matching arrays with at least 3 points");
  const size_t m = horizons.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(m), ly(m);
  for (size_t i = 0; i < m; ++i) {
    if (!(horizons[i] > 0.0) || !(values[i] > 0.0))
      throw std::invalid_argument("rate_fit: horizons and values must be positive");
    lx[i] = std::log(horizons[i]);
    ly[i] = std::log(values[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= double(m);
  my /= double(m);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < m; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  if (den == 0.0) throw std::invalid_argument("rate_fit: horizons must not be all equal");
  return num / den;
}

}  // namespace declab
