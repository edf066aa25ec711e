#include "consensus_kit/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

namespace consensus_kit::graph {

Topology Topology::build(int n_vertices, std::vector<Edge> edges) {
  if (n_vertices < 1) {
    throw ValidationError("topology needs at least one vertex");
  }
  if (edges.empty() && n_vertices > 1) {
    throw ValidationError("topology has no edges");
  }

  std::vector<std::string> problems;
  std::set<std::pair<int, int>> seen;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    const std::string tag =
        "edge " + std::to_string(k + 1) + " (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")";
    if (e.u < 1 || e.u > n_vertices || e.v < 1 || e.v > n_vertices) {
      problems.push_back(tag + ": vertex out of range [1," + std::to_string(n_vertices) + "]");
      continue;
    }
    if (e.u == e.v) {
      problems.push_back(tag + ": self-loop");
      continue;
    }
    auto key = std::minmax(e.u, e.v);
    if (!seen.insert({key.first, key.second}).second) {
      problems.push_back(tag + ": duplicate edge");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid topology:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }

  // Connectivity by BFS from vertex 1.
  std::vector<std::vector<int>> adj(n_vertices + 1);
  for (const auto& e : edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  std::vector<bool> visited(n_vertices + 1, false);
  std::queue<int> frontier;
  frontier.push(1);
  visited[1] = true;
  int reached = 1;
  while (!frontier.empty()) {
    int v = frontier.front();
    frontier.pop();
    for (int w : adj[v]) {
      if (!visited[w]) {
        visited[w] = true;
        ++reached;
        frontier.push(w);
      }
    }
  }
  return Topology(n_vertices, std::move(edges), reached == n_vertices);
}

Matrix Topology::laplacian() const {
  Matrix L = Matrix::Zero(n_vertices_, n_vertices_);
  for (const auto& e : edges_) {
    const int i = e.u - 1;
    const int j = e.v - 1;
    L(i, i) += 1.0;
    L(j, j) += 1.0;
    L(i, j) -= 1.0;
    L(j, i) -= 1.0;
  }
  return L;
}

double eigen_ratio_c(double lambda2, double lambdaN) {
  const double r = (lambdaN - lambda2) / (lambdaN + lambda2);
  return 1.0 - r * r;
}

SpectrumSummary laplacian_spectrum(const Topology& t) {
  if (!t.connected()) {
    throw NotConnected("laplacian_spectrum: graph is not connected (lambda2 = 0)");
  }
  const int n = t.vertex_count();
  if (n < 2) {
    throw ValidationError("laplacian_spectrum: need at least two agents");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(t.laplacian(), Eigen::EigenvaluesOnly);
  SpectrumSummary s;
  s.eigenvalues = es.eigenvalues();  // ascending already
  const double zero_tol = 1e-9 * n;
  if (std::abs(s.eigenvalues(0)) > zero_tol) {
    throw std::logic_error("laplacian_spectrum: smallest eigenvalue is not zero");
  }
  s.eigenvalues(0) = 0.0;
  s.lambda2 = s.eigenvalues(1);
  s.lambdaN = s.eigenvalues(n - 1);
  if (s.lambda2 <= zero_tol) {
    throw NotConnected("laplacian_spectrum: lambda2 vanishes");
  }
  s.c = eigen_ratio_c(s.lambda2, s.lambdaN);
  return s;
}

Vector EdgeDecomposition::permute_edges(const Vector& by_input_index) const {
  if (by_input_index.size() != edge_count()) {
    throw DimensionMismatch("permute_edges: expected " + std::to_string(edge_count()) + " entries");
  }
  Vector out(edge_count());
  for (int k = 0; k < edge_count(); ++k) out(k) = by_input_index(edge_order[k]);
  return out;
}

namespace {

std::vector<int> bfs_tree(const Topology& t) {
  const int n = t.vertex_count();
  std::vector<std::vector<std::pair<int, int>>> adj(n + 1);  // (neighbour, edge index)
  for (int k = 0; k < t.edge_count(); ++k) {
    const auto& e = t.edges()[k];
    adj[e.u].push_back({e.v, k});
    adj[e.v].push_back({e.u, k});
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end(), [](auto x, auto y) { return x.second < y.second; });
  }
  std::vector<int> tree;
  std::vector<bool> visited(n + 1, false);
  std::queue<int> frontier;
  frontier.push(1);
  visited[1] = true;
  while (!frontier.empty()) {
    int v = frontier.front();
    frontier.pop();
    for (auto [w, k] : adj[v]) {
      if (!visited[w]) {
        visited[w] = true;
        tree.push_back(k);
        frontier.push(w);
      }
    }
  }
  return tree;
}

std::vector<int> first_fit_tree(const Topology& t) {
  std::vector<int> parent(t.vertex_count() + 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<int> tree;
  for (int k = 0; k < t.edge_count(); ++k) {
    int a = find(t.edges()[k].u);
    int b = find(t.edges()[k].v);
    if (a != b) {
      parent[a] = b;
      tree.push_back(k);
    }
  }
  return tree;
}

}  // namespace

EdgeDecomposition edge_decomposition(const Topology& t, const OrientationRule& orientation,
                                     TreeRule tree_rule) {
  if (!t.connected()) {
    throw NotConnected("edge_decomposition: graph is not connected");
  }
  const int n = t.vertex_count();
  const int l = t.edge_count();
  if (n < 2) throw ValidationError("edge_decomposition: need at least two vertices");

  EdgeDecomposition d;
  d.n_vertices = n;
  d.tree_size = n - 1;
  d.initial.resize(l);
  d.terminal.resize(l);
  std::vector<bool> flip(l, false);
  for (int k : orientation.reversed_edges) {
    if (k < 0 || k >= l) {
      throw ValidationError("orientation override refers to edge " + std::to_string(k + 1) +
                            " of " + std::to_string(l));
    }
    flip[k] = !flip[k];
  }
  for (int k = 0; k < l; ++k) {
    auto [lo, hi] = std::minmax(t.edges()[k].u, t.edges()[k].v);
    d.initial[k] = flip[k] ? hi : lo;
    d.terminal[k] = flip[k] ? lo : hi;
  }

  std::vector<int> tree = tree_rule == TreeRule::BreadthFirst ? bfs_tree(t) : first_fit_tree(t);
  std::sort(tree.begin(), tree.end());
  std::vector<bool> in_tree(l, false);
  for (int k : tree) in_tree[k] = true;
  d.edge_order = tree;
  for (int k = 0; k < l; ++k) {
    if (!in_tree[k]) d.edge_order.push_back(k);
  }

  d.E = Matrix::Zero(n, l);
  for (int col = 0; col < l; ++col) {
    const int k = d.edge_order[col];
    d.E(d.initial[k] - 1, col) = 1.0;
    d.E(d.terminal[k] - 1, col) = -1.0;
  }
  const int cycles = l - (n - 1);
  d.E_tau = d.E.leftCols(n - 1);
  d.E_c = d.E.rightCols(cycles);

  if (cycles > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(d.E_tau);
    d.T = qr.solve(d.E_c);
    const double residual = (d.E_tau * d.T - d.E_c).norm();
    if (residual > 1e-8) {
      throw std::logic_error("edge_decomposition: E_tau T = E_c residual " + std::to_string(residual));
    }
  } else {
    d.T = Matrix::Zero(n - 1, 0);
  }
  d.M = d.E_tau.transpose() * d.E;
  d.R.resize(n - 1, l);
  d.R << Matrix::Identity(n - 1, n - 1), d.T;
  d.L_e = d.E.transpose() * d.E;
  return d;
}

std::string to_csv(const Matrix& m) {
  std::ostringstream os;
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) os << ',';
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace consensus_kit::graph
