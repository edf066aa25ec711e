#pragma once

#include <string>
#include <utility>
#include <vector>

#include "consensus_kit/common.hpp"

namespace consensus_kit::graph {

/// Unordered vertex pair, 1-indexed.
struct Edge {
  int u = 0;
  int v = 0;
  bool operator==(const Edge&) const = default;
};

/// Validated undirected simple graph. Immutable after construction.
class Topology {
 public:
  /// Throws ValidationError listing every self-loop, duplicate and
  /// out-of-range endpoint.
  static Topology build(int n_vertices, std::vector<Edge> edges);

  int vertex_count() const { return n_vertices_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  bool connected() const { return connected_; }

  /// Degree minus adjacency, built directly from the edge list.
  Matrix laplacian() const;

 private:
  Topology(int n, std::vector<Edge> edges, bool connected)
      : n_vertices_(n), edges_(std::move(edges)), connected_(connected) {}

  int n_vertices_;
  std::vector<Edge> edges_;
  bool connected_;
};

struct SpectrumSummary {
  Vector eigenvalues;  // ascending
  double lambda2 = 0.0;
  double lambdaN = 0.0;
  double c = 0.0;
};

/// c = 1 - ((lN - l2) / (lN + l2))^2.
double eigen_ratio_c(double lambda2, double lambdaN);

/// Throws NotConnected for disconnected graphs.
SpectrumSummary laplacian_spectrum(const Topology& t);

/// Per-edge orientation override. Default orientation puts the initial node
/// at the smaller vertex index; listed edges (0-based input indices) flip.
struct OrientationRule {
  std::vector<int> reversed_edges;
};

enum class TreeRule {
  BreadthFirst,  // BFS from vertex 1, neighbours visited in input edge order
  FirstFit,      // greedy in input edge order (union-find)
};

/// Incidence factorisation E = [E_tau, E_c] with E_c = E_tau T.
///
/// All matrices are expressed in the permuted column order (tree edges first,
/// then cycle edges, each group in input order). `edge_order[k]` is the input
/// index of column k; `initial`/`terminal` give the oriented endpoints of
/// input edge i.
struct EdgeDecomposition {
  int n_vertices = 0;
  int tree_size = 0;  // n - 1
  Matrix E;
  Matrix E_tau;
  Matrix E_c;
  Matrix T;
  Matrix M;    // E_tau' E
  Matrix R;    // [I, T]
  Matrix L_e;  // E' E
  std::vector<int> edge_order;
  std::vector<int> initial;
  std::vector<int> terminal;

  int edge_count() const { return static_cast<int>(edge_order.size()); }

  /// Reorder a per-input-edge vector into decomposition column order.
  Vector permute_edges(const Vector& by_input_index) const;
};

EdgeDecomposition edge_decomposition(const Topology& t,
                                     const OrientationRule& orientation = {},
                                     TreeRule tree_rule = TreeRule::BreadthFirst);

/// Comma-separated rows, 17 significant digits.
std::string to_csv(const Matrix& m);

}  // namespace consensus_kit::graph
