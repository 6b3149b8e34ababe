#include "declab/algorithms.hpp"

#include <cmath>
#include <stdexcept>

namespace declab {

AlgorithmKind algorithm_kind_from_string(const std::string& s) {
  if (s == "dsgt") return AlgorithmKind::dsgt;
  if (s == "dsgt_eliminated") return AlgorithmKind::dsgt_eliminated;
  if (s == "dpsgd") return AlgorithmKind::dpsgd;
  if (s == "d2") return AlgorithmKind::d2;
  if (s == "centralized_sgd") return AlgorithmKind::centralized_sgd;
  throw std::invalid_argument("unknown algorithm kind '" + s + "'");
}

std::string to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::dsgt: return "dsgt";
    case AlgorithmKind::dsgt_eliminated: return "dsgt_eliminated";
    case AlgorithmKind::dpsgd: return "dpsgd";
    case AlgorithmKind::d2: return "d2";
    case AlgorithmKind::centralized_sgd: return "centralized_sgd";
  }
  return "?";
}

StepSchedule StepSchedule::constant(double gamma0) {
  if (!(gamma0 > 0.0)) throw std::invalid_argument("StepSchedule: gamma0 must be positive");
  StepSchedule s;
  s.kind = Kind::constant;
  s.gamma0 = gamma0;
  return s;
}

StepSchedule StepSchedule::diminishing(double a, double p) {
  if (!(a > 0.0)) throw std::invalid_argument("StepSchedule: a must be positive");
  if (!(p >= 0.5 && p <= 1.0))
    throw std::invalid_argument("StepSchedule: exponent p must lie in [0.5, 1]");
  StepSchedule s;
  s.kind = Kind::diminishing;
  s.a = a;
  s.p = p;
  return s;
}

double StepSchedule::at(int k) const {
  if (k < 1) throw std::invalid_argument("StepSchedule::at: iterations count from 1");
  if (kind == Kind::constant) return gamma0;
  return a / std::pow(double(k), p);
}

double stepsize_cap(double rho, double eta, double smoothness, int n, double lambda) {
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("stepsize_cap: need rho in [0, 1)");
  const double nl = double(n) * lambda;
  const double denom_scale = std::max(std::sqrt(1.0 + nl * nl), 24.0 * nl * nl);
  return (1.0 - rho) * (1.0 - rho) /
         (eta * smoothness * (1.0 + rho) * (1.0 + rho) * denom_scale);
}

double tuned_constant_stepsize(double big_d, double smoothness, double sigma_s, int64_t K) {
  if (!(sigma_s > 0.0))
    throw std::invalid_argument("tuned_constant_stepsize: requires sigma_s > 0");
  if (K < 1) throw std::invalid_argument("tuned_constant_stepsize: need K >= 1");
  return big_d / (std::sqrt(double(K)) * smoothness * sigma_s);
}

BatchPolicy BatchPolicy::proportional(double eta) {
  if (!(eta > 0.0) || eta > 1.0)
    throw std::invalid_argument("BatchPolicy: eta must lie in (0, 1]");
  BatchPolicy b;
  b.mode = Mode::proportional;
  b.eta = eta;
  return b;
}

BatchPolicy BatchPolicy::equal(int size) {
  if (size < 1) throw std::invalid_argument("BatchPolicy: equal batch size must be >= 1");
  BatchPolicy b;
  b.mode = Mode::equal;
  b.equal_size = size;
  return b;
}

int BatchPolicy::batch_for(int local_size) const {
  if (mode == Mode::proportional) return minibatch_size(local_size, eta);
  if (equal_size > local_size)
    throw std::invalid_argument("BatchPolicy: equal batch size exceeds a local dataset");
  return equal_size;
}

double tracking_residual(const AlgoState& st) {
  if (!st.tracking_available()) return 0.0;
  const Eigen::RowVectorXd ybar = st.Y.colwise().mean();
  const Eigen::RowVectorXd sbar = st.S.colwise().mean();
  return (ybar - sbar).norm() / (1.0 + st.S.norm());
}

namespace {

Eigen::MatrixXd batch_gradients(const Problem& p, const Eigen::MatrixXd& x,
                                const BatchPolicy& batch, const RunRng& rng, int iteration) {
  Eigen::MatrixXd s(p.nodes(), p.dim());
  for (int i = 0; i < p.nodes(); ++i) {
    RandomStream rs = rng.stream(i, iteration, StreamTag::minibatch);
    const std::vector<int> xi =
        sample_indices(p.local(i).size(), batch.batch_for(p.local(i).size()), rs);
    s.row(i) = p.stochastic_gradient(i, x.row(i).transpose(), xi).transpose();
  }
  return s;
}

void check_divergence(AlgoState& st, double threshold) {
  if (st.diverged) return;
  const double norm = st.X.norm();
  if (!std::isfinite(norm) || norm > threshold * (1.0 + st.x0_norm)) {
    st.diverged = true;
    st.diverged_at = st.k;
  }
}

void require_mixing_size(const MixingMatrix& w, const Problem& p) {
  if (w.size() != p.nodes())
    throw std::invalid_argument("mixing matrix size does not match the node count");
}

}  // namespace

AlgoState init_state(const Problem& p, const Eigen::MatrixXd& x0, const MixingMatrix& w,
                     AlgorithmKind kind, const BatchPolicy& batch, const RunRng& rng,
                     double divergence_threshold) {
  const int rows = kind == AlgorithmKind::centralized_sgd ? 1 : p.nodes();
  if (int(x0.rows()) != rows || int(x0.cols()) != p.dim())
    throw std::invalid_argument("init_state: x0 has the wrong shape");
  if (kind != AlgorithmKind::centralized_sgd) require_mixing_size(w, p);
  AlgoState st;
  st.k = 1;
  st.x0_norm = x0.norm();
  switch (kind) {
    case AlgorithmKind::dsgt:
    case AlgorithmKind::dsgt_eliminated:
      st.X = w.weights() * x0;
      st.S = batch_gradients(p, st.X, batch, rng, 1);
      st.Y = st.S;
      break;
    case AlgorithmKind::dpsgd:
    case AlgorithmKind::d2:
    case AlgorithmKind::centralized_sgd:
      st.X = x0;
      break;
  }
  check_divergence(st, divergence_threshold);
  return st;
}

void dsgt_step(AlgoState& st, const MixingMatrix& w, double gamma, const Problem& p,
               const BatchPolicy& batch, const RunRng& rng, double divergence_threshold) {
  require_mixing_size(w, p);
  const Eigen::MatrixXd x_next = w.weights() * (st.X - gamma * st.Y);
  const Eigen::MatrixXd s_next = batch_gradients(p, x_next, batch, rng, st.k + 1);
  st.Y = w.weights() * st.Y + s_next - st.S;
  st.X = x_next;
  st.S = s_next;
  ++st.k;
  check_divergence(st, divergence_threshold);
}

void dsgt_step_eliminated(AlgoState& st, const MixingMatrix& w, double gamma, const Problem& p,
                          const BatchPolicy& batch, const RunRng& rng,
                          double divergence_threshold) {
  require_mixing_size(w, p);
  Eigen::MatrixXd x_next;
  if (!st.has_history) {
    // First step matches the tracking form exactly (Y_1 = S_1).
    x_next = w.weights() * (st.X - gamma * st.S);
    st.has_history = true;
  } else {
    x_next = 2.0 * (w.weights() * st.X) - w.weights() * (w.weights() * st.X_prev) -
             gamma * (w.weights() * (st.S - st.S_prev));
  }
  st.X_prev = st.X;
  st.S_prev = st.S;
  st.X = x_next;
  st.S = batch_gradients(p, st.X, batch, rng, st.k + 1);
  ++st.k;
  check_divergence(st, divergence_threshold);
}

void dpsgd_step(AlgoState& st, const MixingMatrix& w, double gamma, const Problem& p,
                const BatchPolicy& batch, const RunRng& rng, double divergence_threshold) {
  require_mixing_size(w, p);
  st.S = batch_gradients(p, st.X, batch, rng, st.k);
  st.X = w.weights() * st.X - gamma * st.S;
  ++st.k;
  check_divergence(st, divergence_threshold);
}

void d2_step(AlgoState& st, const MixingMatrix& w, double gamma, const Problem& p,
             const BatchPolicy& batch, const RunRng& rng, double divergence_threshold) {
  require_mixing_size(w, p);
  const Eigen::MatrixXd s_now = batch_gradients(p, st.X, batch, rng, st.k);
  Eigen::MatrixXd x_next;
  if (!st.has_history) {
    x_next = w.weights() * st.X - gamma * s_now;
    st.has_history = true;
  } else {
    x_next = 2.0 * (w.weights() * st.X) - w.weights() * st.X_prev -
             gamma * (w.weights() * (s_now - st.S_prev));
  }
  st.X_prev = st.X;
  st.S_prev = s_now;
  st.S = s_now;
  st.X = x_next;
  ++st.k;
  check_divergence(st, divergence_threshold);
}

void centralized_sgd_step(AlgoState& st, double gamma, const Problem& p, int batch_m,
                          const RunRng& rng, double divergence_threshold) {
  if (p.nodes() != 1)
    throw std::invalid_argument("centralized_sgd_step: expects the pooled single-node problem");
  const int n = p.local(0).size();
  if (batch_m < 1 || batch_m > n)
    throw std::invalid_argument("centralized_sgd_step: batch size outside [1, N]");
  RandomStream rs = rng.stream(0, st.k, StreamTag::centralized);
  const std::vector<int> xi = sample_indices(n, batch_m, rs);
  const Eigen::VectorXd g = p.stochastic_gradient(0, st.X.row(0).transpose(), xi);
  st.X.row(0) -= (gamma / double(batch_m)) * g.transpose();
  ++st.k;
  check_divergence(st, divergence_threshold);
}

void algorithm_step(AlgorithmKind kind, AlgoState& st, const MixingMatrix& w, double gamma,
                    const Problem& p, const BatchPolicy& batch, int batch_m, const RunRng& rng,
                    double divergence_threshold) {
  switch (kind) {
    case AlgorithmKind::dsgt:
      dsgt_step(st, w, gamma, p, batch, rng, divergence_threshold);
      return;
    case AlgorithmKind::dsgt_eliminated:
      dsgt_step_eliminated(st, w, gamma, p, batch, rng, divergence_threshold);
      return;
    case AlgorithmKind::dpsgd:
      dpsgd_step(st, w, gamma, p, batch, rng, divergence_threshold);
      return;
    case AlgorithmKind::d2:
      d2_step(st, w, gamma, p, batch, rng, divergence_threshold);
      return;
    case AlgorithmKind::centralized_sgd:
      centralized_sgd_step(st, gamma, p, batch_m, rng, divergence_threshold);
      return;
  }
  throw std::invalid_argument("algorithm_step: unknown kind");
}

CompanionSpectrum d2_companion(const MixingMatrix& w, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("d2_companion: gamma must lie in [0, 1]");
  const int n = w.size();
  CompanionSpectrum out;
  out.h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  out.h.topLeftCorner(n, n) = (2.0 - gamma) * w.weights();
  out.h.topRightCorner(n, n) = -(1.0 - gamma) * w.weights();
  out.h.bottomLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  Eigen::EigenSolver<Eigen::MatrixXd> es(out.h, false);
  if (es.info() != Eigen::Success) throw std::runtime_error("d2_companion: eigensolver failed");
  out.eigenvalues = es.eigenvalues();
  out.spectral_radius = out.eigenvalues.cwiseAbs().maxCoeff();
  return out;
}

}  // namespace declab
