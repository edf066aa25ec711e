#pragma once

// Shared instances and small reference computations for the test suites.
// The reference routines avoid the library's own assembly code on purpose.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "consensus_kit/channel.hpp"
#include "consensus_kit/graph.hpp"
#include "consensus_kit/mjls.hpp"
#include "consensus_kit/rng.hpp"

namespace fixtures {

namespace ck = consensus_kit;
using ck::Matrix;
using ck::Vector;

// Three-state agent used by both network experiments.
inline Matrix agent_A() {
  Matrix A(3, 3);
  A << 1.1830, -0.1421, -0.0399, 0.1764, 0.8641, -0.0394, 0.1419, -0.1098, 0.9689;
  return A;
}

inline Matrix agent_B() {
  Matrix B(3, 2);
  B << 0.1697, 0.3572, 0.5929, 0.5165, 0.1355, 0.9659;
  return B;
}

inline Matrix identical_K() {
  Matrix K(2, 3);
  K << 2.0646, -1.3157, -0.0939, -0.5767, 0.2947, -0.3324;
  return K;
}

inline Matrix nonidentical_K() {
  Matrix K(2, 3);
  K << 1.7394, -1.3873, 0.0771, -0.2133, 0.2212, -0.5269;
  return K;
}

inline Matrix nonidentical_Q() {
  Matrix Q(3, 3);
  Q << 0.3811, 0.1446, 0.4743, 0.2445, 0.5121, 0.2434, 0.5390, 0.0215, 0.4395;
  return Q;
}

inline ck::channel::EdgeChannel nonidentical_channel() {
  return ck::channel::EdgeChannel::make(4, {{1, 0, 1, 0}, {0, 1, 0, 1}, {1, 1, 1, 1}}, nonidentical_Q());
}

// Four agents: 1-2, 1-3, 1-4, 2-3.
inline ck::graph::Topology four_agents() {
  return ck::graph::Topology::build(4, {{1, 2}, {1, 3}, {1, 4}, {2, 3}});
}

inline ck::mjls::AgentModel agent_model() { return ck::mjls::AgentModel::make(agent_A(), agent_B()); }

inline ck::mjls::AgentModel scalar_model(double a, double b = 1.0) {
  return ck::mjls::AgentModel::make(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b));
}

inline ck::graph::SpectrumSummary spectrum_of(double l2, double lN) {
  ck::graph::SpectrumSummary s;
  s.eigenvalues = Vector(3);
  s.eigenvalues << 0.0, l2, lN;
  s.lambda2 = l2;
  s.lambdaN = lN;
  s.c = ck::graph::eigen_ratio_c(l2, lN);
  return s;
}

// Kronecker product written out index by index.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      for (int k = 0; k < b.rows(); ++k)
        for (int l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

inline double radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, false);
  double r = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) r = std::max(r, std::abs(es.eigenvalues()(i)));
  return r;
}

// Exact E||delta(t)||^2 for the vertex dynamics under a Markov (or i.i.d.)
// channel whose state s delivers every link with gain g[s]. Tracks the
// conditional second moments W_s(t) = E[delta delta' 1{state(t) = s}].
inline std::vector<double> exact_mse(const Matrix& A, const Matrix& B, const Matrix& K, const Matrix& L,
                                     const Matrix& transition, const std::vector<double>& gains,
                                     const Vector& initial_distribution, double lo, double hi, int horizon) {
  const int N = static_cast<int>(L.rows());
  const int n = static_cast<int>(A.rows());
  const int dim = N * n;
  const int o = static_cast<int>(gains.size());
  const Matrix BK = B * K;

  // x(0) has iid uniform entries: mean mu, variance v.
  const double mu = 0.5 * (lo + hi);
  const double v = (hi - lo) * (hi - lo) / 12.0;
  const Matrix second = Matrix::Constant(dim, dim, mu * mu) + v * Matrix::Identity(dim, dim);

  // delta = P x, and P commutes with every mode matrix (L 1 = 0), so the
  // centred second moment can be propagated on its own. That avoids
  // subtracting the growing average from the full second moment.
  const Matrix centre = Matrix::Identity(N, N) - Matrix::Constant(N, N, 1.0 / N);
  const Matrix P = kron(centre, Matrix::Identity(n, n));
  std::vector<Matrix> W(o);
  for (int s = 0; s < o; ++s) W[s] = initial_distribution(s) * (P * second * P.transpose());

  std::vector<double> out;
  auto record = [&] {
    Matrix total = Matrix::Zero(dim, dim);
    for (const auto& w : W) total += w;
    out.push_back(total.trace());
  };
  record();
  for (int t = 0; t < horizon; ++t) {
    std::vector<Matrix> next(o, Matrix::Zero(dim, dim));
    for (int s = 0; s < o; ++s) {
      // x(t+1) = (I (x) A + gain L (x) BK) x(t)
      Matrix F = kron(Matrix::Identity(N, N), A) + gains[s] * kron(L, BK);
      Matrix moved = F * W[s] * F.transpose();
      for (int r = 0; r < o; ++r) next[r] += transition(s, r) * moved;
    }
    W = std::move(next);
    record();
  }
  return out;
}

inline Matrix random_matrix(ck::Xoshiro256ss& rng, int rows, int cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

}  // namespace fixtures
