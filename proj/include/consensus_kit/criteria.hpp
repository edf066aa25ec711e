#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "consensus_kit/channel.hpp"
#include "consensus_kit/graph.hpp"
#include "consensus_kit/lmi.hpp"
#include "consensus_kit/mjls.hpp"
#include "consensus_kit/riccati.hpp"

namespace consensus_kit::criteria {

enum class Decision {
  Consensusable,
  NotConsensusable,
  SufficientHolds,
  SufficientFails,
  NecessaryFails,
  Undecided,
};

/// Which decision procedure produced a verdict.
enum class Criterion {
  IidSingleInput,
  IidGeneralFading,
  MarkovIff,
  MarkovLmi,
  MarkovAnalytic,
  IidAnalytic,
  MarkovNecessary,
  ScalarIff,
  NonidenticalIff,
  NonidenticalKappa,
};

std::string to_string(Decision d);
std::string to_string(Criterion c);

struct Certificate {
  std::optional<Matrix> gain;
  std::vector<Matrix> lyapunov;  // P matrices, labelled in `scalars`/detail
  std::vector<double> radii;
  std::map<std::string, double> scalars;
  /// (kappa, gamma(kappa)) samples of the kappa line search.
  std::vector<std::pair<double, double>> kappa_curve;
};

struct Verdict {
  Decision decision = Decision::Undecided;
  Criterion criterion = Criterion::MarkovIff;
  Certificate certificate;
  /// One line per inequality evaluated.
  std::vector<std::string> detail;
  /// Some deciding quantity lay within kBoundaryTolerance of its threshold.
  bool boundary = false;
};

inline constexpr double kBoundaryTolerance = 1e-9;

// ---------------------------------------------------------------------------
// i.i.d. losses, single input

/// (1 - p) c > 1 - 1/det(A)^2. Requires m = 1 (PreconditionError otherwise).
/// On success the certificate carries K = -2/(l2 + lN) (B'PB)^-1 B'PA with P
/// from the MARE at gamma = (1 - p) c.
Verdict iid_single_input(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                         double loss_rate);

/// mu^2 / (mu^2 + sigma^2) * c > 1 - 1/det(A)^2. Requires m = 1.
Verdict iid_general_fading(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                           double mean, double variance);

/// Any m: (1 - p) c > gamma_c is sufficient, with the MARE gain at (1 - p) c.
Verdict iid_analytic_sufficient(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                                double loss_rate);

// ---------------------------------------------------------------------------
// identical two-state Markov losses

/// Spectral-radius test for a supplied gain. Consensusable when every mode
/// operator has radius < 1; otherwise Undecided (another gain might work).
Verdict markov_identical_iff(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                             const channel::TwoStateChannel& channel, const mjls::GainMatrix& K);

/// Same test for any 2x2 row-stochastic matrix over {lost, delivered}
/// (i.i.d. losses: both rows equal to (p, 1 - p)).
Verdict markov_identical_iff(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                             const Matrix& transition, const mjls::GainMatrix& K);

/// The coupled LMI system in (Q1, Q2, Z1, Z2), built for inspection.
lmi::Problem markov_identical_lmi_problem(const mjls::AgentModel& model,
                                          const graph::SpectrumSummary& spectrum,
                                          const channel::TwoStateChannel& channel);

/// Solves the LMI system; on a witness returns SufficientHolds with
/// K = -2/(l2 + lN) (B'Q2^-1 B)^-1 B'Q2^-1 A after confirming it with the
/// spectral-radius test. Solver budget exhaustion gives Undecided.
Verdict markov_identical_synthesis_lmi(const mjls::AgentModel& model,
                                       const graph::SpectrumSummary& spectrum,
                                       const channel::TwoStateChannel& channel,
                                       const lmi::SolverOptions& options = {});

/// gamma_1 = min{q, 1 - p} c > gamma_c.
Verdict markov_identical_analytic_sufficient(const mjls::AgentModel& model,
                                             const graph::SpectrumSummary& spectrum,
                                             const channel::TwoStateChannel& channel);

/// Necessary conditions: (1-q)^1/2 rho(A) < 1; with a gain,
/// (1-p)^1/2 rho(A + l_i B K) < 1 for all i; for m = 1,
/// (1-p)^(n/2) |det A| (lN - l2)/(lN + l2) < 1. Any failure gives
/// NecessaryFails; otherwise Undecided. Individual outcomes are recorded as
/// certificate scalars "unstable_mode_condition", "closed_loop_condition",
/// "single_input_condition" (value < 1 passes).
Verdict markov_identical_necessary(const mjls::AgentModel& model,
                                   const graph::SpectrumSummary& spectrum,
                                   const channel::TwoStateChannel& channel,
                                   const std::optional<mjls::GainMatrix>& K = std::nullopt);

/// Scalar agents (n = m = 1, |a| >= 1, b = 1):
///   (1-q) a^2 < 1  and  a^2 theta [1 + p(a^2-1)/(1 - a^2(1-q))] < 1,
/// theta = ((lN - l2)/(lN + l2))^2. Gain k = -2a/(l2 + lN).
Verdict scalar_iff(double a, const graph::SpectrumSummary& spectrum,
                   const channel::TwoStateChannel& channel);

/// Same test for a scalar AgentModel with arbitrary nonzero b (k scaled by 1/b).
Verdict scalar_iff(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                   const channel::TwoStateChannel& channel);

// ---------------------------------------------------------------------------
// nonidentical per-edge Markov losses

/// Radius of (Q' (x) I) diag(S_i (x) S_i) for the supplied gain.
/// Consensusable when < 1, otherwise Undecided.
Verdict nonidentical_analysis(const mjls::AgentModel& model, const graph::EdgeDecomposition& decomp,
                              const channel::EdgeChannel& channel, const mjls::GainMatrix& K);

/// N_i, M_i and a lower-triangular V_i with M_i = V_i V_i'.
struct EdgeMoments {
  std::vector<Matrix> N;
  std::vector<Matrix> M;
  std::vector<Matrix> V;
};

EdgeMoments edge_moments(const graph::EdgeDecomposition& decomp, const channel::EdgeChannel& channel);

/// Cholesky factor of a PSD matrix, tolerating zero pivots (columns past a
/// zero pivot are zeroed). Throws std::logic_error on a negative pivot.
Matrix semidefinite_cholesky(const Matrix& m);

/// gamma(kappa) = min_i lambda_min(-kappa N_i - kappa^2 M_i).
double kappa_gamma(const EdgeMoments& moments, double kappa);

struct KappaSearchOptions {
  /// Search interval [-kappa_max, 0); default 4 / lambda_2.
  std::optional<double> kappa_max;
  int grid_points = 200;
};

/// Line search for kappa maximising gamma(kappa); SufficientHolds when the
/// optimum exceeds gamma_c, with K = kappa (B'PB)^-1 B'PA and P from the MARE at
/// gamma(kappa) (capped at 1), confirmed by the edge radius test.
Verdict nonidentical_kappa_synthesis(const mjls::AgentModel& model,
                                     const graph::EdgeDecomposition& decomp,
                                     const channel::EdgeChannel& channel,
                                     const KappaSearchOptions& options = {});

/// Constant LMI [[I, -kappa V_i'], [-kappa V_i, -kappa N_i - gamma_c I]] > 0 per state.
lmi::Problem nonidentical_kappa_lmi(const EdgeMoments& moments, double kappa, double gamma_c);

}  // namespace consensus_kit::criteria
