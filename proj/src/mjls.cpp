#include "consensus_kit/mjls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace consensus_kit::mjls {

namespace {

int numerical_rank(const Matrix& m) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-10);
  return static_cast<int>(qr.rank());
}

double min_sym_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

AgentModel AgentModel::make(Matrix A, Matrix B) {
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw ValidationError("A must be a nonempty square matrix");
  }
  if (B.rows() != A.rows() || B.cols() == 0) {
    throw ValidationError("B must have " + std::to_string(A.rows()) + " rows and at least one column");
  }
  if (!A.allFinite() || !B.allFinite()) throw ValidationError("A and B must be finite");
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (numerical_rank(B) != m) throw ValidationError("B must have full column rank");

  Matrix ctrb(n, n * m);
  Matrix block = B;
  for (int k = 0; k < n; ++k) {
    ctrb.middleCols(k * m, m) = block;
    block = A * block;
  }
  if (numerical_rank(ctrb) != n) throw ValidationError("(A, B) is not controllable");

  AgentModel model;
  model.A_ = std::move(A);
  model.B_ = std::move(B);
  model.det_a_ = model.A_.determinant();
  Eigen::EigenSolver<Matrix> es(model.A_, false);
  model.eig_ = es.eigenvalues();
  model.rho_a_ = model.eig_.cwiseAbs().maxCoeff();
  model.all_unstable_ = model.eig_.cwiseAbs().minCoeff() >= 1.0 - 1e-12;
  if (!model.all_unstable_) {
    model.warnings_.push_back("A has eigenvalues strictly inside the unit circle; "
                              "closed-form criteria assume all modes are on or outside it");
  }
  return model;
}

GainMatrix::GainMatrix(Matrix K) : K_(std::move(K)) {
  if (!K_.allFinite()) throw ValidationError("gain matrix has non-finite entries");
}

void GainMatrix::check_shape(const AgentModel& model) const {
  if (K_.rows() != model.m() || K_.cols() != model.n()) {
    throw DimensionMismatch("gain must be " + std::to_string(model.m()) + "x" +
                            std::to_string(model.n()) + ", got " + std::to_string(K_.rows()) + "x" +
                            std::to_string(K_.cols()));
  }
}

StabilityVerdict make_verdict(std::vector<double> radii) {
  StabilityVerdict v;
  v.radii = std::move(radii);
  for (int i = 0; i < static_cast<int>(v.radii.size()); ++i) {
    if (v.worst_index < 0 || v.radii[i] > v.worst_radius) {
      v.worst_index = i;
      v.worst_radius = v.radii[i];
    }
  }
  v.stable = v.worst_index >= 0 && v.worst_radius < 1.0;
  return v;
}

Matrix build_identical_operator(const AgentModel& model, const GainMatrix& K, double lambda,
                                const Matrix& transition) {
  K.check_shape(model);
  if (transition.rows() != 2 || transition.cols() != 2) {
    throw DimensionMismatch("identical-loss operator needs a 2x2 transition matrix");
  }
  const Matrix& A = model.A();
  const Matrix S = A + lambda * model.B() * K.matrix();
  const Matrix AA = Eigen::kroneckerProduct(A, A).eval();
  const Matrix SS = Eigen::kroneckerProduct(S, S).eval();
  const Eigen::Index b = AA.rows();
  Matrix H(2 * b, 2 * b);
  // Block (j, i) = Q(i, j) * (mode i)(x)(mode i); mode 0 = lost, 1 = delivered.
  H.topLeftCorner(b, b) = transition(0, 0) * AA;
  H.topRightCorner(b, b) = transition(1, 0) * SS;
  H.bottomLeftCorner(b, b) = transition(0, 1) * AA;
  H.bottomRightCorner(b, b) = transition(1, 1) * SS;
  return H;
}

Matrix build_identical_operator(const AgentModel& model, const GainMatrix& K, double lambda,
                                const channel::TwoStateChannel& channel) {
  return build_identical_operator(model, K, lambda, channel.transition());
}

Matrix edge_mode_matrix(const AgentModel& model, const GainMatrix& K,
                        const graph::EdgeDecomposition& decomp, const Vector& pattern) {
  K.check_shape(model);
  if (pattern.size() != decomp.edge_count()) {
    throw DimensionMismatch("loss pattern has " + std::to_string(pattern.size()) +
                            " entries, decomposition has " + std::to_string(decomp.edge_count()) +
                            " edges");
  }
  const Vector gamma = decomp.permute_edges(pattern);
  const Matrix coupling = decomp.M * gamma.asDiagonal() * decomp.R.transpose();
  const int r = decomp.tree_size;
  return Eigen::kroneckerProduct(Matrix::Identity(r, r), model.A()).eval() +
         Eigen::kroneckerProduct(coupling, model.B() * K.matrix()).eval();
}

Matrix build_edge_operator(const AgentModel& model, const GainMatrix& K,
                           const graph::EdgeDecomposition& decomp,
                           const channel::EdgeChannel& channel) {
  if (channel.edge_count() != decomp.edge_count()) {
    throw DimensionMismatch("channel covers " + std::to_string(channel.edge_count()) +
                            " edges, graph has " + std::to_string(decomp.edge_count()));
  }
  const Eigen::Index d = static_cast<Eigen::Index>(decomp.tree_size) * model.n();
  const Eigen::Index b = d * d;
  const int o = channel.state_count();
  if (b * o > kMaxOperatorRows) {
    throw SizeLimitExceeded("edge operator would have " + std::to_string(b * o) +
                            " rows (limit " + std::to_string(kMaxOperatorRows) +
                            "); use a smaller graph or fewer channel states");
  }
  std::vector<Matrix> kron(o);
  for (int i = 0; i < o; ++i) {
    const Matrix S = edge_mode_matrix(model, K, decomp, channel.pattern(i));
    kron[i] = Eigen::kroneckerProduct(S, S).eval();
  }
  const Matrix& Q = channel.transition();
  Matrix op = Matrix::Zero(b * o, b * o);
  for (int j = 0; j < o; ++j) {
    for (int i = 0; i < o; ++i) {
      if (Q(i, j) != 0.0) op.block(j * b, i * b, b, b) = Q(i, j) * kron[i];
    }
  }
  return op;
}

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("spectral_radius: matrix is not square");
  if (m.rows() == 0) return 0.0;
  if (m.rows() <= kDenseEigenLimit) {
    Eigen::EigenSolver<Matrix> es(m, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectral_radius: QR iteration failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  // Power iteration with log-averaged growth over a window. The all-ones start
  // is the vectorisation of PSD blocks 11', so second-moment operators keep it
  // in their invariant cone.
  Vector v = Vector::Ones(m.rows()).normalized();
  double prev = -1.0;
  double log_sum = 0.0;
  int window = 0;
  for (int it = 0; it < 200000; ++it) {
    Vector w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    log_sum += std::log(norm);
    ++window;
    if (window == 64) {
      const double est = std::exp(log_sum / window);
      if (prev > 0.0 && std::abs(est - prev) <= 1e-10 * est) return est;
      prev = est;
      log_sum = 0.0;
      window = 0;
    }
  }
  return prev;
}

double second_moment_radius(std::span<const Matrix> modes, const Matrix& transition, double rel_tol,
                            int max_iterations) {
  const int o = static_cast<int>(modes.size());
  if (transition.rows() != o || transition.cols() != o) {
    throw DimensionMismatch("second_moment_radius: transition does not match mode count");
  }
  const Eigen::Index d = modes.empty() ? 0 : modes[0].rows();
  std::vector<Matrix> X(o, Matrix::Identity(d, d) / std::max<double>(1.0, o * d));
  std::vector<Matrix> Y(o);
  double prev = -1.0;
  double log_sum = 0.0;
  int window = 0;
  for (int it = 0; it < max_iterations; ++it) {
    for (int j = 0; j < o; ++j) Y[j] = Matrix::Zero(d, d);
    for (int i = 0; i < o; ++i) {
      const Matrix propagated = modes[i] * X[i] * modes[i].transpose();
      for (int j = 0; j < o; ++j) {
        if (transition(i, j) != 0.0) Y[j] += transition(i, j) * propagated;
      }
    }
    double mass = 0.0;
    for (const auto& y : Y) mass += y.trace();
    if (mass <= 0.0) return 0.0;
    for (int j = 0; j < o; ++j) X[j] = Y[j] / mass;
    log_sum += std::log(mass);
    ++window;
    if (window == 32) {
      const double est = std::exp(log_sum / window);
      if (prev > 0.0 && std::abs(est - prev) <= rel_tol * est) return est;
      prev = est;
      log_sum = 0.0;
      window = 0;
    }
  }
  return prev;
}

StabilityVerdict ms_stable_identical(const AgentModel& model, const GainMatrix& K,
                                     const graph::SpectrumSummary& spectrum, const Matrix& transition) {
  std::vector<double> radii;
  for (Eigen::Index i = 1; i < spectrum.eigenvalues.size(); ++i) {
    radii.push_back(
        spectral_radius(build_identical_operator(model, K, spectrum.eigenvalues(i), transition)));
  }
  return make_verdict(std::move(radii));
}

StabilityVerdict ms_stable_identical(const AgentModel& model, const GainMatrix& K,
                                     const graph::SpectrumSummary& spectrum,
                                     const channel::TwoStateChannel& channel) {
  return ms_stable_identical(model, K, spectrum, channel.transition());
}

StabilityVerdict ms_stable_edge(const AgentModel& model, const GainMatrix& K,
                                const graph::EdgeDecomposition& decomp,
                                const channel::EdgeChannel& channel) {
  const Matrix op = build_edge_operator(model, K, decomp, channel);
  return make_verdict({spectral_radius(op)});
}

double coupled_lyapunov_margin_identical(const AgentModel& model, const GainMatrix& K,
                                         const graph::SpectrumSummary& spectrum,
                                         const channel::TwoStateChannel& channel,
                                         std::span<const Matrix> P1, std::span<const Matrix> P2) {
  K.check_shape(model);
  const std::size_t modes = static_cast<std::size_t>(spectrum.eigenvalues.size()) - 1;
  auto pick = [&](std::span<const Matrix> P, std::size_t i) -> const Matrix& {
    if (P.size() == 1) return P[0];
    if (P.size() != modes) throw DimensionMismatch("need one Lyapunov matrix per nonzero eigenvalue");
    return P[i];
  };
  const double p = channel.failure_rate();
  const double q = channel.recovery_rate();
  const Matrix& A = model.A();
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < modes; ++i) {
    const Matrix& X1 = pick(P1, i);
    const Matrix& X2 = pick(P2, i);
    const Matrix S = A + spectrum.eigenvalues(static_cast<Eigen::Index>(i) + 1) * model.B() * K.matrix();
    const Matrix first = X1 - (1.0 - q) * A.transpose() * X1 * A - q * S.transpose() * X2 * S;
    const Matrix second = X2 - p * A.transpose() * X1 * A - (1.0 - p) * S.transpose() * X2 * S;
    margin = std::min({margin, min_sym_eigenvalue(first), min_sym_eigenvalue(second)});
  }
  return margin;
}

double coupled_lyapunov_margin_edge(const AgentModel& model, const GainMatrix& K,
                                    const graph::EdgeDecomposition& decomp,
                                    const channel::EdgeChannel& channel, std::span<const Matrix> P) {
  const int o = channel.state_count();
  if (static_cast<int>(P.size()) != o) throw DimensionMismatch("need one Lyapunov matrix per channel state");
  std::vector<Matrix> S(o);
  for (int j = 0; j < o; ++j) S[j] = edge_mode_matrix(model, K, decomp, channel.pattern(j));
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < o; ++i) {
    Matrix lhs = P[i];
    for (int j = 0; j < o; ++j) {
      lhs -= channel.transition()(i, j) * S[j].transpose() * P[j] * S[j];
    }
    margin = std::min(margin, min_sym_eigenvalue(lhs));
  }
  return margin;
}

}  // namespace consensus_kit::mjls
