#include "consensus_kit/riccati.hpp"

#include <cmath>

namespace consensus_kit::riccati {

namespace {

// A'PA - gamma A'PB (B'PB)^-1 B'PA, evaluated as
//   (1 - gamma) W'W + gamma V'V,  W = L'A,  V = (I - QQ')W,
// with P = LL' and Q an orthonormal basis of L'B. Forming (B'PB)^-1 directly
// loses everything once P grows along an unstable direction.
Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& P, double gamma) {
  Eigen::LLT<Matrix> chol(0.5 * (P + P.transpose()));
  if (chol.info() != Eigen::Success) throw SingularInnovation("P is not positive definite");
  const Matrix Lt = chol.matrixU();
  const Matrix C = Lt * B;
  Eigen::HouseholderQR<Matrix> qr(C);
  const Matrix R = qr.matrixQR().topRows(C.cols()).triangularView<Eigen::Upper>();
  const double scale = C.norm();
  for (Eigen::Index i = 0; i < R.rows(); ++i) {
    if (!(std::abs(R(i, i)) > 1e-13 * scale)) throw SingularInnovation("B'PB is numerically singular");
  }
  const Matrix Q = qr.householderQ() * Matrix::Identity(C.rows(), C.cols());
  const Matrix W = Lt * A;
  const Matrix V = W - Q * (Q.transpose() * W);
  Matrix out = (1.0 - gamma) * (W.transpose() * W) + gamma * (V.transpose() * V);
  return 0.5 * (out + out.transpose());
}

double symmetric_extreme(const Matrix& m, bool smallest) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return smallest ? es.eigenvalues()(0) : es.eigenvalues()(es.eigenvalues().size() - 1);
}

}  // namespace

double mare_residual(const mjls::AgentModel& model, const Matrix& P, double gamma) {
  return symmetric_extreme(P - riccati_map(model.A(), model.B(), P, gamma), true);
}

MareOutcome mare_solve(const mjls::AgentModel& model, double gamma, const MareOptions& options) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ValidationError("mare_solve: gamma must lie in [0, 1], got " + std::to_string(gamma));
  }
  const Matrix& A = model.A();
  const Matrix& B = model.B();
  const int n = model.n();
  const Matrix I = Matrix::Identity(n, n);

  MareOutcome out;
  Matrix P = I;
  auto accept = [&](const Matrix& candidate, int iterations, bool converged) {
    MareSolution s;
    s.P = candidate;
    s.gamma = gamma;
    s.residual = mare_residual(model, candidate, gamma);
    s.iterations = iterations;
    s.converged = converged;
    out.status = MareStatus::Solved;
    out.iterations = iterations;
    out.solution = std::move(s);
  };

  for (int k = 1; k <= options.max_iterations; ++k) {
    Matrix next;
    try {
      next = riccati_map(A, B, P, gamma) + I;
    } catch (const SingularInnovation&) {
      // B has full column rank, so this only happens once P has grown so far
      // along an unstable direction that L'B drowns in rounding: divergence.
      if (symmetric_extreme(P, false) < 1e8 * symmetric_extreme(P, true)) throw;
      out.status = MareStatus::Infeasible;
      out.iterations = k;
      out.reason = "iteration diverged (L'B lost precision)";
      return out;
    }
    const double trace = next.trace();
    if (!std::isfinite(trace) || trace > options.divergence_trace) {
      out.status = MareStatus::Infeasible;
      out.iterations = k;
      out.reason = "iteration diverged (trace " + std::to_string(trace) + ")";
      return out;
    }
    const double change = (next - P).norm() / next.norm();
    P = std::move(next);
    if (change < options.relative_tolerance) {
      accept(P, k, true);
      return out;
    }
    if (options.stop_at_certificate && k % 8 == 0) {
      const double r = mare_residual(model, P, gamma);
      if (r >= options.certificate_margin * symmetric_extreme(P, false)) {
        accept(P, k, false);
        return out;
      }
    }
  }
  // Iteration cap: keep the last iterate only if it is a strict solution.
  const double r = mare_residual(model, P, gamma);
  if (r >= options.certificate_margin * symmetric_extreme(P, false)) {
    accept(P, options.max_iterations, false);
    return out;
  }
  out.status = MareStatus::Infeasible;
  out.iterations = options.max_iterations;
  out.reason = "no strict solution within the iteration cap";
  return out;
}

std::string to_string(CriticalValueMethod method) {
  switch (method) {
    case CriticalValueMethod::RankOneClosedForm:
      return "rank-one closed form";
    case CriticalValueMethod::InvertibleClosedForm:
      return "invertible-B closed form";
    case CriticalValueMethod::Bisection:
      return "bisection";
  }
  return "unknown";
}

std::optional<CriticalValue> gamma_c_closed_form(const mjls::AgentModel& model) {
  const Eigen::VectorXd moduli = model.eigenvalues().cwiseAbs();
  CriticalValue cv;
  if (model.m() == 1) {
    // Only modes on or outside the unit circle contribute.
    double product = 1.0;
    for (Eigen::Index i = 0; i < moduli.size(); ++i) {
      if (moduli(i) >= 1.0) product *= moduli(i) * moduli(i);
    }
    cv.gamma_c = 1.0 - 1.0 / product;
    cv.method = CriticalValueMethod::RankOneClosedForm;
  } else if (model.m() == model.n()) {
    const double rho = std::max(1.0, moduli.maxCoeff());
    cv.gamma_c = 1.0 - 1.0 / (rho * rho);
    cv.method = CriticalValueMethod::InvertibleClosedForm;
  } else {
    return std::nullopt;
  }
  cv.lower = cv.upper = cv.gamma_c;
  return cv;
}

CriticalValue gamma_c_bisection(const mjls::AgentModel& model, double bracket_width) {
  MareOptions opts;
  opts.stop_at_certificate = true;
  auto feasible = [&](double g) { return mare_solve(model, g, opts).solved(); };

  double lo = 0.0;
  double hi = 1.0;
  if (!feasible(hi)) {
    throw std::logic_error("gamma_c_bisection: MARE infeasible at gamma = 1 for a controllable pair");
  }
  if (feasible(lo)) hi = lo;
  while (hi - lo > bracket_width) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  CriticalValue cv;
  cv.lower = lo;
  cv.upper = hi;
  cv.gamma_c = 0.5 * (lo + hi);
  cv.bracket_width = hi - lo;
  cv.method = CriticalValueMethod::Bisection;
  return cv;
}

CriticalValue gamma_c(const mjls::AgentModel& model, double bracket_width) {
  if (auto closed = gamma_c_closed_form(model)) return *closed;
  return gamma_c_bisection(model, bracket_width);
}

mjls::GainMatrix optimal_gain(const Matrix& P, const mjls::AgentModel& model, double kappa) {
  const Matrix& B = model.B();
  if (P.rows() != model.n() || P.cols() != model.n()) {
    throw DimensionMismatch("optimal_gain: P must be " + std::to_string(model.n()) + "x" +
                            std::to_string(model.n()));
  }
  const Matrix BPB = B.transpose() * P * B;
  Eigen::LLT<Matrix> llt(0.5 * (BPB + BPB.transpose()));
  if (llt.info() != Eigen::Success) throw SingularInnovation("optimal_gain: B'PB is singular");
  return mjls::GainMatrix(kappa * llt.solve(B.transpose() * P * model.A()));
}

}  // namespace consensus_kit::riccati
