#include "declab/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace declab {
namespace {

// ln(1 + e^z) without overflow for large |z|.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double binomial_count(int n, int b) {
  double c = 1.0;
  for (int j = 1; j <= b; ++j) {
    c *= double(n - b + j) / double(j);
    if (c > 1e15) return c;  // far past any enumeration budget
  }
  return c;
}

template <class F>
void for_each_combination(int n, int b, F&& f) {
  std::vector<int> idx(static_cast<size_t>(b));
  std::iota(idx.begin(), idx.end(), 0);
  for (;;) {
    f(idx);
    int j = b - 1;
    while (j >= 0 && idx[size_t(j)] == n - b + j) --j;
    if (j < 0) return;
    ++idx[size_t(j)];
    for (int t = j + 1; t < b; ++t) idx[size_t(t)] = idx[size_t(t - 1)] + 1;
  }
}

}  // namespace

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "least_squares") return LossKind::least_squares;
  if (s == "logistic") return LossKind::logistic;
  throw std::invalid_argument("unknown loss kind '" + s + "'");
}

std::string to_string(LossKind k) {
  return k == LossKind::least_squares ? "least_squares" : "logistic";
}

LocalDataset::LocalDataset(Eigen::MatrixXd rows, Eigen::VectorXd labels)
    : rows_(std::move(rows)), labels_(std::move(labels)) {
  if (rows_.rows() < 1) throw std::invalid_argument("LocalDataset: need at least one sample");
  if (labels_.size() > 0 && labels_.size() != rows_.rows())
    throw std::invalid_argument("LocalDataset: label count does not match sample count");
}

Problem::Problem(LossKind kind, std::vector<LocalDataset> locals)
    : kind_(kind), locals_(std::move(locals)) {
  if (locals_.empty()) throw std::invalid_argument("Problem: need at least one node");
  dim_ = locals_.front().dim();
  for (const auto& ds : locals_) {
    if (ds.dim() != dim_) throw std::invalid_argument("Problem: inconsistent sample dimension");
    if (kind_ == LossKind::logistic) {
      if (!ds.has_labels())
        throw std::invalid_argument("Problem: logistic loss requires labels");
      for (int u = 0; u < ds.size(); ++u) {
        const double y = ds.labels()(u);
        if (y != 0.0 && y != 1.0)
          throw std::invalid_argument("Problem: logistic labels must be 0 or 1");
      }
    } else if (ds.has_labels()) {
      throw std::invalid_argument("Problem: least squares datasets carry no labels");
    }
    total_ += ds.size();
  }
}

double Problem::sample_loss(int i, int u, const Eigen::VectorXd& x) const {
  const auto& ds = local(i);
  if (kind_ == LossKind::least_squares)
    return 0.5 * (x - ds.rows().row(u).transpose()).squaredNorm();
  const double z = ds.rows().row(u).dot(x);
  return softplus(z) - ds.labels()(u) * z;
}

Eigen::VectorXd Problem::sample_gradient(int i, int u, const Eigen::VectorXd& x) const {
  const auto& ds = local(i);
  if (kind_ == LossKind::least_squares) return x - ds.rows().row(u).transpose();
  const double z = ds.rows().row(u).dot(x);
  return (sigmoid(z) - ds.labels()(u)) * ds.rows().row(u).transpose();
}

double Problem::local_loss(int i, const Eigen::VectorXd& x) const {
  double s = 0.0;
  for (int u = 0; u < local(i).size(); ++u) s += sample_loss(i, u, x);
  return s;
}

Eigen::VectorXd Problem::full_gradient(int i, const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (int u = 0; u < local(i).size(); ++u) g += sample_gradient(i, u, x);
  return g;
}

double Problem::loss(const Eigen::VectorXd& x) const {
  double s = 0.0;
  for (int i = 0; i < nodes(); ++i) s += local_loss(i, x);
  return s;
}

Eigen::VectorXd Problem::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < nodes(); ++i) g += full_gradient(i, x);
  return g;
}

Eigen::VectorXd Problem::stochastic_gradient(int i, const Eigen::VectorXd& x,
                                             const std::vector<int>& xi) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (int u : xi) g += sample_gradient(i, u, x);
  return g;
}

Problem Problem::pooled() const {
  Eigen::MatrixXd rows(total_, dim_);
  Eigen::VectorXd labels;
  if (kind_ == LossKind::logistic) labels.resize(total_);
  int at = 0;
  for (const auto& ds : locals_) {
    rows.middleRows(at, ds.size()) = ds.rows();
    if (kind_ == LossKind::logistic) labels.segment(at, ds.size()) = ds.labels();
    at += ds.size();
  }
  std::vector<LocalDataset> one;
  one.emplace_back(std::move(rows), std::move(labels));
  return Problem(kind_, std::move(one));
}

int minibatch_size(int local_size, double eta) {
  if (!(eta > 0.0) || eta > 1.0)
    throw std::invalid_argument("minibatch_size: eta must lie in (0, 1]");
  const int b = int(std::llround(eta * local_size));
  if (b < 1 || b > local_size) {
    std::ostringstream os;
    os << "minibatch_size: round(eta*N) = " << b << " outside [1, " << local_size << "]";
    throw std::invalid_argument(os.str());
  }
  return b;
}

std::vector<int> sample_minibatch(const LocalDataset& ds, double eta, RandomStream& rs) {
  return sample_indices(ds.size(), minibatch_size(ds.size(), eta), rs);
}

double node_minibatch_variance(const Problem& p, int i, int b, const Eigen::VectorXd& x) {
  const auto& ds = p.local(i);
  const int n = ds.size();
  if (b < 1 || b > n)
    throw std::invalid_argument("node_minibatch_variance: batch size outside [1, N]");
  if (p.kind() == LossKind::least_squares) {
    // Deviation of the batch gradient sum from its mean is
    // (b/N) sum_u a_u - sum_{u in batch} a_u: x-free, classic
    // without-replacement sum variance.
    if (n == 1) return 0.0;
    const Eigen::RowVectorXd mean = ds.rows().colwise().mean();
    double spread = 0.0;
    for (int u = 0; u < n; ++u) spread += (ds.rows().row(u) - mean).squaredNorm();
    return double(b) * double(n - b) / (double(n) * double(n - 1)) * spread;
  }
  const double count = binomial_count(n, b);
  if (count > 1e6)
    throw std::invalid_argument("node_minibatch_variance: C(N, b) exceeds the enumeration budget");
  Eigen::MatrixXd grads(n, p.dim());
  for (int u = 0; u < n; ++u) grads.row(u) = p.sample_gradient(i, u, x).transpose();
  const Eigen::RowVectorXd mean_sum = (double(b) / n) * grads.colwise().sum();
  double acc = 0.0;
  int64_t batches = 0;
  for_each_combination(n, b, [&](const std::vector<int>& idx) {
    Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(p.dim());
    for (int u : idx) s += grads.row(u);
    acc += (s - mean_sum).squaredNorm();
    ++batches;
  });
  return acc / double(batches);
}

NodeVariances minibatch_variance_oracle(const Problem& p, double eta, const Eigen::VectorXd& x) {
  NodeVariances out;
  out.per_node.resize(size_t(p.nodes()));
  for (int i = 0; i < p.nodes(); ++i) {
    const int b = minibatch_size(p.local(i).size(), eta);
    out.per_node[size_t(i)] = node_minibatch_variance(p, i, b, x);
    out.total += out.per_node[size_t(i)];
  }
  return out;
}

ProblemConstants problem_constants(const Problem& p, double eta,
                                   const std::vector<Eigen::VectorXd>& probe_points,
                                   bool compute_sigma) {
  ProblemConstants c;
  c.eta = eta;
  c.lambda = 0.0;  // both built-in losses have batch noise independent of the gradient scale
  c.smoothness_i.resize(size_t(p.nodes()));
  for (int i = 0; i < p.nodes(); ++i) {
    const auto& ds = p.local(i);
    double li = 0.0;
    if (p.kind() == LossKind::least_squares) {
      li = double(ds.size());
      c.per_sample_curvature = 1.0;
    } else {
      for (int u = 0; u < ds.size(); ++u) {
        const double q = ds.rows().row(u).squaredNorm() / 4.0;
        li += q;
        c.per_sample_curvature = std::max(c.per_sample_curvature, q);
      }
    }
    c.smoothness_i[size_t(i)] = li;
    c.smoothness = std::max(c.smoothness, li);
  }
  const double n = double(p.nodes());
  c.smoothness_tilde = c.smoothness * std::sqrt(1.0 + n * n * c.lambda * c.lambda);
  c.sigma_i_sq.assign(size_t(p.nodes()), 0.0);
  if (!compute_sigma) {
    c.sigma_s_sq = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  std::vector<Eigen::VectorXd> probes = probe_points;
  if (probes.empty()) probes.push_back(Eigen::VectorXd::Zero(p.dim()));
  for (const auto& x : probes) {
    const NodeVariances v = minibatch_variance_oracle(p, eta, x);
    for (int i = 0; i < p.nodes(); ++i)
      c.sigma_i_sq[size_t(i)] = std::max(c.sigma_i_sq[size_t(i)], v.per_node[size_t(i)]);
  }
  c.sigma_s_sq = std::accumulate(c.sigma_i_sq.begin(), c.sigma_i_sq.end(), 0.0);
  return c;
}

double centralized_gradient_variance(const Problem& p, const Eigen::VectorXd& x) {
  const Problem pool = p.nodes() == 1 ? p : p.pooled();
  const int n = pool.local(0).size();
  Eigen::MatrixXd grads(n, pool.dim());
  for (int u = 0; u < n; ++u) grads.row(u) = pool.sample_gradient(0, u, x).transpose();
  const Eigen::RowVectorXd mean = grads.colwise().mean();
  grads.rowwise() -= mean;
  return grads.squaredNorm() / double(n);
}

CentralizedReference centralized_reference(const Problem& p,
                                           const std::vector<Eigen::VectorXd>& probe_points,
                                           int64_t budget) {
  CentralizedReference ref;
  const Problem pool = p.nodes() == 1 ? p : p.pooled();
  const ProblemConstants c = problem_constants(pool, 1.0, {});
  ref.smoothness = c.smoothness;
  if (p.kind() == LossKind::least_squares) {
    ref.x_star = pool.local(0).rows().colwise().mean().transpose();
    ref.numeric = false;
  } else {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p.dim());
    const double step = 1.0 / ref.smoothness;
    bool converged = false;
    for (int64_t it = 0; it < budget; ++it) {
      const Eigen::VectorXd g = pool.gradient(x);
      if (g.norm() <= 1e-10) {
        converged = true;
        break;
      }
      x -= step * g;
    }
    if (!converged && pool.gradient(x).norm() > 1e-10)
      throw std::runtime_error(
          "centralized_reference: gradient descent did not reach tolerance within budget");
    ref.x_star = x;
    ref.numeric = true;
  }
  ref.f_star = pool.loss(ref.x_star);
  std::vector<Eigen::VectorXd> probes = probe_points;
  probes.push_back(ref.x_star);
  for (const auto& x : probes)
    ref.sigma_sq = std::max(ref.sigma_sq, centralized_gradient_variance(p, x));
  return ref;
}

std::vector<LocalDataset> partition_dataset(const LocalDataset& global, int n,
                                            const std::vector<double>& proportions,
                                            uint64_t seed) {
  if (n < 1) throw std::invalid_argument("partition_dataset: need n >= 1");
  std::vector<double> props = proportions;
  if (props.empty()) props.assign(size_t(n), 1.0 / n);
  if (int(props.size()) != n)
    throw std::invalid_argument("partition_dataset: proportion count does not match n");
  double sum = 0.0;
  for (double p : props) {
    if (p < 0.0) throw std::invalid_argument("partition_dataset: negative proportion");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("partition_dataset: proportions must sum to 1");

  const int total = global.size();
  RandomStream rs(seed, 0, 0, StreamTag::partition);
  std::vector<int> perm(static_cast<size_t>(total));
  std::iota(perm.begin(), perm.end(), 0);
  for (size_t j = perm.size(); j > 1; --j) std::swap(perm[j - 1], perm[rs.below(j)]);

  std::vector<LocalDataset> parts;
  parts.reserve(size_t(n));
  double cum = 0.0;
  int prev = 0;
  for (int i = 0; i < n; ++i) {
    cum += props[size_t(i)];
    const int edge = i + 1 == n ? total : int(std::llround(cum * total));
    const int size = edge - prev;
    if (size < 1) {
      std::ostringstream os;
      os << "partition_dataset: node " << i + 1 << " would receive zero samples";
      throw std::invalid_argument(os.str());
    }
    Eigen::MatrixXd rows(size, global.dim());
    Eigen::VectorXd labels;
    if (global.has_labels()) labels.resize(size);
    for (int r = 0; r < size; ++r) {
      rows.row(r) = global.rows().row(perm[size_t(prev + r)]);
      if (global.has_labels()) labels(r) = global.labels()(perm[size_t(prev + r)]);
    }
    parts.emplace_back(std::move(rows), std::move(labels));
    prev = edge;
  }
  return parts;
}

LocalDataset generate_least_squares(int n_samples, int dim, double lo, double hi, uint64_t seed) {
  if (n_samples < 1 || dim < 1)
    throw std::invalid_argument("generate_least_squares: need n_samples >= 1 and dim >= 1");
  if (!(lo <= hi)) throw std::invalid_argument("generate_least_squares: need lo <= hi");
  RandomStream rs(seed, 0, 0, StreamTag::synth);
  Eigen::MatrixXd rows(n_samples, dim);
  for (int u = 0; u < n_samples; ++u)
    for (int d = 0; d < dim; ++d) rows(u, d) = lo + (hi - lo) * rs.uniform01();
  return LocalDataset(std::move(rows));
}

LocalDataset generate_logistic_blobs(int n_samples, int dim, double separation, double scale,
                                     uint64_t seed) {
  if (n_samples < 1 || dim < 1)
    throw std::invalid_argument("generate_logistic_blobs: need n_samples >= 1 and dim >= 1");
  RandomStream rs(seed, 0, 0, StreamTag::synth);
  Eigen::MatrixXd rows(n_samples, dim);
  Eigen::VectorXd labels(n_samples);
  for (int u = 0; u < n_samples; ++u) {
    const double y = double(rs.below(2));
    labels(u) = y;
    for (int d = 0; d < dim; ++d) rows(u, d) = scale * rs.gaussian();
    rows(u, 0) += (y > 0.5 ? 0.5 : -0.5) * separation;
  }
  return LocalDataset(std::move(rows), std::move(labels));
}

LocalDataset load_dataset_csv(const std::string& path, LossKind kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_dataset_csv: missing header in '" + path + "'");
  std::vector<std::vector<double>> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace((unsigned char)cell[used])) ++used;
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        std::ostringstream os;
        os << "load_dataset_csv: bad number '" << cell << "' at line " << line_no;
        throw std::runtime_error(os.str());
      }
    }
    if (!values.empty() && row.size() != values.front().size()) {
      std::ostringstream os;
      os << "load_dataset_csv: inconsistent column count at line " << line_no;
      throw std::runtime_error(os.str());
    }
    values.push_back(std::move(row));
  }
  if (values.empty()) throw std::runtime_error("load_dataset_csv: no data rows in '" + path + "'");
  const int cols = int(values.front().size());
  const bool labeled = kind == LossKind::logistic;
  const int dim = labeled ? cols - 1 : cols;
  if (dim < 1) throw std::runtime_error("load_dataset_csv: too few columns");
  Eigen::MatrixXd rows(int(values.size()), dim);
  Eigen::VectorXd labels;
  if (labeled) labels.resize(int(values.size()));
  for (int u = 0; u < int(values.size()); ++u) {
    const auto& row = values[size_t(u)];
    if (labeled) labels(u) = row[0];
    for (int d = 0; d < dim; ++d) rows(u, d) = row[size_t(d + (labeled ? 1 : 0))];
  }
  return LocalDataset(std::move(rows), std::move(labels));
}

void save_dataset_csv(const LocalDataset& ds, LossKind kind, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset_csv: cannot open '" + path + "'");
  char buf[32];
  if (kind == LossKind::logistic) {
    out << "y";
    for (int d = 0; d < ds.dim(); ++d) out << ",v_" << d;
    out << "\n";
  } else {
    for (int d = 0; d < ds.dim(); ++d) out << (d ? "," : "") << "target_" << d;
    out << "\n";
  }
  for (int u = 0; u < ds.size(); ++u) {
    if (kind == LossKind::logistic) out << (ds.labels()(u) > 0.5 ? "1," : "0,");
    for (int d = 0; d < ds.dim(); ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.rows()(u, d));
      out << (d ? "," : "") << buf;
    }
    out << "\n";
  }
}

}  // namespace declab
