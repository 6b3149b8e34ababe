#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace declab {

enum class GraphKind { ring, path, complete, star, k_regular_random, explicit_edges };

GraphKind graph_kind_from_string(const std::string& s);
std::string to_string(GraphKind k);

// Undirected simple graph on nodes 0..n-1. Edges are stored normalized
// (i < j), sorted, and deduplicated; self-loops are rejected.
class Topology {
 public:
  Topology(int n, std::vector<std::pair<int, int>> edges);

  int size() const { return n_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const { return adj_.at(size_t(i)); }
  int degree(int i) const { return int(adj_.at(size_t(i)).size()); }
  bool has_edge(int i, int j) const;

 private:
  int n_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adj_;
};

Topology make_ring(int n);
Topology make_path(int n);
Topology make_complete(int n);
Topology make_star(int n);
// Simple k-regular graph via stub matching; deterministic in `seed`.
Topology make_k_regular(int n, int k, uint64_t seed);

// Dispatcher used by the config layer. `k`/`seed` apply to k_regular_random;
// `edges` applies to explicit_edges (0-based endpoints).
Topology build_topology(GraphKind kind, int n, int k = 0, uint64_t seed = 0,
                        const std::vector<std::pair<int, int>>* edges = nullptr);

bool is_connected(const Topology& t);

// Plain-text format: first line "n", then one "i j" edge per line (1-based).
Topology load_topology(const std::string& path);
void save_topology(const Topology& t, const std::string& path);

// Plain-text matrix: first line "n", then n rows of n whitespace-separated reals.
Eigen::MatrixXd load_matrix(const std::string& path);
void save_matrix(const Eigen::MatrixXd& w, const std::string& path);

// Deviation-from-consensus operator norm: ||W - (1/n) 1 1^T||_2.
// Validates double stochasticity of `w` within `tol` first.
double spectral_gap(const Eigen::MatrixXd& w, double tol = 1e-9);

// Doubly stochastic gossip matrix tied to a graph. Entries may be negative
// for loaded matrices; rho() is the deviation-from-consensus contraction norm.
class MixingMatrix {
 public:
  // Metropolis rule: w_ij = 1/(1 + max(deg_i, deg_j)) on edges, diagonal
  // chosen so rows sum to one. Requires a connected graph.
  static MixingMatrix metropolis(const Topology& t);
  // Validates dimensions, double stochasticity (tol 1e-9), graph support,
  // and rho <= 1 + 1e-9.
  static MixingMatrix from_matrix(const Eigen::MatrixXd& w, const Topology& t);
  // Built-in 3-node fixture on the path graph 1-2-3 with spectrum {1, 1/2, -1/2}.
  static MixingMatrix optimal_path3();

  int size() const { return int(w_.rows()); }
  const Eigen::MatrixXd& weights() const { return w_; }
  double rho() const { return rho_; }

 private:
  MixingMatrix(Eigen::MatrixXd w, double rho) : w_(std::move(w)), rho_(rho) {}
  Eigen::MatrixXd w_;
  double rho_;
};

}  // namespace declab
