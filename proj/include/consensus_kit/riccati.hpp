#pragma once

#include <optional>
#include <string>

#include "consensus_kit/common.hpp"
#include "consensus_kit/mjls.hpp"

namespace consensus_kit::riccati {

/// P > 0 with P > A'PA - gamma A'PB (B'PB)^-1 B'PA.
struct MareSolution {
  Matrix P;
  double gamma = 0.0;
  /// Smallest eigenvalue of P - A'PA + gamma A'PB (B'PB)^-1 B'PA.
  double residual = 0.0;
  int iterations = 0;
  /// False when the iteration stopped early on a verified strict solution.
  bool converged = false;
};

struct MareOptions {
  double relative_tolerance = 1e-10;
  double divergence_trace = 1e12;
  int max_iterations = 100000;
  /// Stop as soon as an iterate satisfies the strict inequality with
  /// residual >= certificate_margin * lambda_max(P). Used by bisection.
  bool stop_at_certificate = false;
  double certificate_margin = 1e-6;
};

enum class MareStatus { Solved, Infeasible };

struct MareOutcome {
  MareStatus status = MareStatus::Infeasible;
  std::optional<MareSolution> solution;
  int iterations = 0;
  std::string reason;

  bool solved() const { return status == MareStatus::Solved; }
};

/// Smallest eigenvalue of P - A'PA + gamma A'PB (B'PB)^-1 B'PA.
double mare_residual(const mjls::AgentModel& model, const Matrix& P, double gamma);

/// Fixed-point iteration P <- A'PA - gamma A'PB (B'PB)^-1 B'PA + I from P = I.
/// Requires 0 <= gamma <= 1 (0 only serves as a bisection bracket). Throws
/// SingularInnovation if L'B (P = LL') loses rank while P is well conditioned;
/// with P badly conditioned the same event counts as divergence.
MareOutcome mare_solve(const mjls::AgentModel& model, double gamma, const MareOptions& options = {});

enum class CriticalValueMethod { RankOneClosedForm, InvertibleClosedForm, Bisection };

std::string to_string(CriticalValueMethod method);

struct CriticalValue {
  double gamma_c = 0.0;
  CriticalValueMethod method = CriticalValueMethod::Bisection;
  /// Zero for closed forms.
  double bracket_width = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Closed form when B has one column or is square; bisection otherwise.
CriticalValue gamma_c(const mjls::AgentModel& model, double bracket_width = 1e-4);

/// Bisection on [0, 1] with mare_solve as the feasibility oracle, regardless
/// of B's shape.
CriticalValue gamma_c_bisection(const mjls::AgentModel& model, double bracket_width = 1e-4);

/// Closed form if one applies to (A, B).
std::optional<CriticalValue> gamma_c_closed_form(const mjls::AgentModel& model);

/// K = kappa (B'PB)^-1 B'PA.
mjls::GainMatrix optimal_gain(const Matrix& P, const mjls::AgentModel& model, double kappa);

}  // namespace consensus_kit::riccati
