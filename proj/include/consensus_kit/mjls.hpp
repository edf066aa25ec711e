#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "consensus_kit/channel.hpp"
#include "consensus_kit/common.hpp"
#include "consensus_kit/graph.hpp"

namespace consensus_kit::mjls {

/// Homogeneous agent x(t+1) = A x(t) + B u(t).
class AgentModel {
 public:
  /// Throws ValidationError unless A is square, B has matching rows and full
  /// column rank, and (A, B) is controllable. Eigenvalues of A inside the unit
  /// disk are reported through warnings(), not rejected.
  static AgentModel make(Matrix A, Matrix B);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  int n() const { return static_cast<int>(A_.rows()); }
  int m() const { return static_cast<int>(B_.cols()); }
  double det_a() const { return det_a_; }
  double rho_a() const { return rho_a_; }
  const Eigen::VectorXcd& eigenvalues() const { return eig_; }
  /// Every eigenvalue of A on or outside the unit circle.
  bool all_modes_unstable() const { return all_unstable_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  AgentModel() = default;
  Matrix A_;
  Matrix B_;
  double det_a_ = 0.0;
  double rho_a_ = 0.0;
  Eigen::VectorXcd eig_;
  bool all_unstable_ = true;
  std::vector<std::string> warnings_;
};

/// Consensus gain K (m x n) of u_i = sum_j gamma_ij K (x_i - x_j).
class GainMatrix {
 public:
  GainMatrix() = default;
  explicit GainMatrix(Matrix K);
  const Matrix& matrix() const { return K_; }
  void check_shape(const AgentModel& model) const;

 private:
  Matrix K_;
};

struct StabilityVerdict {
  bool stable = false;
  std::vector<double> radii;
  int worst_index = -1;
  double worst_radius = 0.0;
};

StabilityVerdict make_verdict(std::vector<double> radii);

/// Rows above which operators are refused.
inline constexpr Eigen::Index kMaxOperatorRows = 40000;
/// Rows above which spectral_radius switches from dense QR to power iteration.
inline constexpr Eigen::Index kDenseEigenLimit = 1500;

/// Second-moment operator of a two-state identical-loss mode:
///   [[(1-q) A(x)A, p S(x)S], [q A(x)A, (1-p) S(x)S]],  S = A + lambda B K.
Matrix build_identical_operator(const AgentModel& model, const GainMatrix& K, double lambda,
                                const channel::TwoStateChannel& channel);

/// Same block structure for an arbitrary 2x2 row-stochastic matrix over
/// {lost, delivered}. Lets i.i.d. channels (rows equal) reuse the test.
Matrix build_identical_operator(const AgentModel& model, const GainMatrix& K, double lambda,
                                const Matrix& transition);

/// Reduced tree-edge mode matrix S_i = I (x) A + M Gamma_i R' (x) B K with
/// Gamma_i given in input edge order.
Matrix edge_mode_matrix(const AgentModel& model, const GainMatrix& K,
                        const graph::EdgeDecomposition& decomp, const Vector& pattern);

/// (Q' (x) I) diag(S_1 (x) S_1, ..., S_o (x) S_o); state order 1..o on both
/// factors. Throws SizeLimitExceeded above kMaxOperatorRows.
Matrix build_edge_operator(const AgentModel& model, const GainMatrix& K,
                           const graph::EdgeDecomposition& decomp,
                           const channel::EdgeChannel& channel);

/// Largest eigenvalue modulus. Dense Hessenberg/QR up to kDenseEigenLimit rows,
/// power iteration beyond (valid for cone-preserving second-moment operators;
/// relative tolerance 1e-10, cap 2e5 iterations).
double spectral_radius(const Matrix& m);

/// Power-iteration radius of the MJLS second-moment map
///   X_j <- sum_i Q(i, j) S_i X_i S_i'
/// without assembling the Kronecker operator.
double second_moment_radius(std::span<const Matrix> modes, const Matrix& transition,
                            double rel_tol = 1e-10, int max_iterations = 200000);

/// Mean-square stability of the identical-loss error dynamics for every
/// nonzero Laplacian eigenvalue lambda_2..lambda_N.
StabilityVerdict ms_stable_identical(const AgentModel& model, const GainMatrix& K,
                                     const graph::SpectrumSummary& spectrum,
                                     const channel::TwoStateChannel& channel);

StabilityVerdict ms_stable_identical(const AgentModel& model, const GainMatrix& K,
                                     const graph::SpectrumSummary& spectrum, const Matrix& transition);

/// Mean-square stability of the reduced tree-edge dynamics.
StabilityVerdict ms_stable_edge(const AgentModel& model, const GainMatrix& K,
                                const graph::EdgeDecomposition& decomp,
                                const channel::EdgeChannel& channel);

/// Verification of coupled Lyapunov inequalities for a fixed gain: smallest
/// eigenvalue over i, modes of
///   P_{i,1} - (1-q) A'P_{i,1}A - q S_i'P_{i,2}S_i,
///   P_{i,2} - p A'P_{i,1}A - (1-p) S_i'P_{i,2}S_i.
/// `P1`, `P2` hold one matrix per nonzero Laplacian eigenvalue (or a single
/// matrix reused for all of them).
double coupled_lyapunov_margin_identical(const AgentModel& model, const GainMatrix& K,
                                         const graph::SpectrumSummary& spectrum,
                                         const channel::TwoStateChannel& channel,
                                         std::span<const Matrix> P1, std::span<const Matrix> P2);

/// Smallest eigenvalue of P_i - sum_j p_ij S_j' P_j S_j over i.
double coupled_lyapunov_margin_edge(const AgentModel& model, const GainMatrix& K,
                                    const graph::EdgeDecomposition& decomp,
                                    const channel::EdgeChannel& channel, std::span<const Matrix> P);

}  // namespace consensus_kit::mjls
