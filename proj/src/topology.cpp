#include "declab/topology.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include "declab/rng.hpp"

namespace declab {

GraphKind graph_kind_from_string(const std::string& s) {
  if (s == "ring") return GraphKind::ring;
  if (s == "path") return GraphKind::path;
  if (s == "complete") return GraphKind::complete;
  if (s == "star") return GraphKind::star;
  if (s == "k_regular_random") return GraphKind::k_regular_random;
  if (s == "explicit") return GraphKind::explicit_edges;
  throw std::invalid_argument("unknown graph kind '" + s + "'");
}

std::string to_string(GraphKind k) {
  switch (k) {
    case GraphKind::ring: return "ring";
    case GraphKind::path: return "path";
    case GraphKind::complete: return "complete";
    case GraphKind::star: return "star";
    case GraphKind::k_regular_random: return "k_regular_random";
    case GraphKind::explicit_edges: return "explicit";
  }
  return "?";
}

Topology::Topology(int n, std::vector<std::pair<int, int>> edges) : n_(n) {
  if (n < 1) throw std::invalid_argument("Topology: need n >= 1");
  std::set<std::pair<int, int>> normalized;
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw std::invalid_argument("Topology: edge endpoint out of range");
    if (i == j) throw std::invalid_argument("Topology: self-loop rejected");
    normalized.emplace(std::min(i, j), std::max(i, j));
  }
  edges_.assign(normalized.begin(), normalized.end());
  adj_.resize(size_t(n));
  for (auto [i, j] : edges_) {
    adj_[size_t(i)].push_back(j);
    adj_[size_t(j)].push_back(i);
  }
}

bool Topology::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges_.begin(), edges_.end(), std::make_pair(i, j));
}

Topology make_ring(int n) {
  std::vector<std::pair<int, int>> e;
  if (n == 2) e.push_back({0, 1});
  if (n >= 3)
    for (int i = 0; i < n; ++i) e.push_back({i, (i + 1) % n});
  return Topology(n, std::move(e));
}

Topology make_path(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return Topology(n, std::move(e));
}

Topology make_complete(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.push_back({i, j});
  return Topology(n, std::move(e));
}

Topology make_star(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < n; ++i) e.push_back({0, i});
  return Topology(n, std::move(e));
}

Topology make_k_regular(int n, int k, uint64_t seed) {
  if (k < 0 || k >= n) throw std::invalid_argument("make_k_regular: need 0 <= k < n");
  if ((int64_t(n) * k) % 2 != 0)
    throw std::invalid_argument("make_k_regular: n*k must be even");
  if (k == 0) return Topology(n, {});
  // Stub matching. Conflicting stubs are reshuffled and repaired pass by
  // pass; a full restart only happens when a pass makes no progress.
  for (uint32_t attempt = 0; attempt < 1000; ++attempt) {
    RandomStream rs(seed, attempt, 0, StreamTag::generic);
    std::vector<int> stubs;
    stubs.reserve(size_t(n) * size_t(k));
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < k; ++c) stubs.push_back(i);
    std::set<std::pair<int, int>> pairs;
    bool progress = true;
    while (!stubs.empty() && progress) {
      progress = false;
      for (size_t j = stubs.size(); j > 1; --j)
        std::swap(stubs[j - 1], stubs[rs.below(j)]);
      std::vector<int> leftover;
      for (size_t j = 0; j + 1 < stubs.size(); j += 2) {
        int a = stubs[j], b = stubs[j + 1];
        if (a > b) std::swap(a, b);
        if (a == b || !pairs.emplace(a, b).second) {
          leftover.push_back(stubs[j]);
          leftover.push_back(stubs[j + 1]);
        } else {
          progress = true;
        }
      }
      stubs = std::move(leftover);
    }
    if (stubs.empty())
      return Topology(n, std::vector<std::pair<int, int>>(pairs.begin(), pairs.end()));
  }
  throw std::runtime_error("make_k_regular: failed to realize a simple graph");
}

Topology build_topology(GraphKind kind, int n, int k, uint64_t seed,
                        const std::vector<std::pair<int, int>>* edges) {
  switch (kind) {
    case GraphKind::ring: return make_ring(n);
    case GraphKind::path: return make_path(n);
    case GraphKind::complete: return make_complete(n);
    case GraphKind::star: return make_star(n);
    case GraphKind::k_regular_random: return make_k_regular(n, k, seed);
    case GraphKind::explicit_edges:
      if (!edges) throw std::invalid_argument("build_topology: explicit kind needs edges");
      return Topology(n, *edges);
  }
  throw std::invalid_argument("build_topology: unknown kind");
}

bool is_connected(const Topology& t) {
  const int n = t.size();
  std::vector<char> seen(size_t(n), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : t.neighbors(u))
      if (!seen[size_t(v)]) {
        seen[size_t(v)] = 1;
        ++reached;
        q.push(v);
      }
  }
  return reached == n;
}

Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_topology: cannot open '" + path + "'");
  int n = 0;
  if (!(in >> n)) throw std::runtime_error("load_topology: missing node count in '" + path + "'");
  std::vector<std::pair<int, int>> edges;
  int a, b;
  while (in >> a >> b) edges.push_back({a - 1, b - 1});
  if (!in.eof())
    throw std::runtime_error("load_topology: malformed edge line in '" + path + "'");
  return Topology(n, std::move(edges));
}

void save_topology(const Topology& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_topology: cannot open '" + path + "'");
  out << t.size() << "\n";
  for (auto [i, j] : t.edges()) out << i + 1 << " " << j + 1 << "\n";
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_matrix: cannot open '" + path + "'");
  int n = 0;
  if (!(in >> n) || n < 1)
    throw std::runtime_error("load_matrix: missing or invalid dimension in '" + path + "'");
  Eigen::MatrixXd w(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!(in >> w(i, j)))
        throw std::runtime_error("load_matrix: too few entries in '" + path + "'");
  return w;
}

void save_matrix(const Eigen::MatrixXd& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_matrix: cannot open '" + path + "'");
  out << w.rows() << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", w(i, j));
      out << (j ? " " : "") << buf;
    }
    out << "\n";
  }
}

namespace {

void check_doubly_stochastic(const Eigen::MatrixXd& w, double tol) {
  if (w.rows() != w.cols()) throw std::invalid_argument("mixing matrix must be square");
  const int n = int(w.rows());
  for (int i = 0; i < n; ++i) {
    const double rs = w.row(i).sum();
    if (std::abs(rs - 1.0) > tol) {
      std::ostringstream os;
      os << "mixing matrix row " << i + 1 << " sums to " << rs << " (expected 1)";
      throw std::invalid_argument(os.str());
    }
  }
  for (int j = 0; j < n; ++j) {
    const double cs = w.col(j).sum();
    if (std::abs(cs - 1.0) > tol) {
      std::ostringstream os;
      os << "mixing matrix column " << j + 1 << " sums to " << cs << " (expected 1)";
      throw std::invalid_argument(os.str());
    }
  }
}

}  // namespace

double spectral_gap(const Eigen::MatrixXd& w, double tol) {
  check_doubly_stochastic(w, tol);
  const int n = int(w.rows());
  const Eigen::MatrixXd a = w - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  // ||A||_2 = sqrt(lambda_max(A^T A)); A^T A is symmetric PSD.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.transpose() * a);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_gap: eigensolver failed");
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

MixingMatrix MixingMatrix::metropolis(const Topology& t) {
  if (!is_connected(t))
    throw std::invalid_argument("metropolis: graph must be connected");
  const int n = t.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (auto [i, j] : t.edges()) {
    const double v = 1.0 / (1.0 + std::max(t.degree(i), t.degree(j)));
    w(i, j) = v;
    w(j, i) = v;
  }
  for (int i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  const double rho = spectral_gap(w, 1e-12);
  return MixingMatrix(std::move(w), rho);
}

MixingMatrix MixingMatrix::from_matrix(const Eigen::MatrixXd& w, const Topology& t) {
  if (int(w.rows()) != t.size() || int(w.cols()) != t.size())
    throw std::invalid_argument("from_matrix: matrix dimension does not match graph size");
  check_doubly_stochastic(w, 1e-9);
  const int n = t.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && std::abs(w(i, j)) > 1e-12 && !t.has_edge(i, j)) {
        std::ostringstream os;
        os << "mixing matrix entry (" << i + 1 << "," << j + 1 << ") is nonzero off the graph support";
        throw std::invalid_argument(os.str());
      }
  const double rho = spectral_gap(w, 1e-9);
  if (rho > 1.0 + 1e-9) {
    std::ostringstream os;
    os << "mixing matrix does not contract toward consensus: rho = " << rho << " > 1";
    throw std::invalid_argument(os.str());
  }
  return MixingMatrix(w, std::min(rho, 1.0));
}

MixingMatrix MixingMatrix::optimal_path3() {
  Eigen::MatrixXd w(3, 3);
  w << 0.5, 0.5, 0.0,
       0.5, 0.0, 0.5,
       0.0, 0.5, 0.5;
  return from_matrix(w, make_path(3));
}

}  // namespace declab
