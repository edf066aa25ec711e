#include "consensus_kit/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <unsupported/Eigen/KroneckerProduct>

namespace consensus_kit::criteria {

namespace {

std::string num(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

bool near(double x, double threshold) { return std::abs(x - threshold) < kBoundaryTolerance; }

double kcheck(double gain_sum) { return -2.0 / gain_sum; }

// [[p, 1-p], [p, 1-p]]: i.i.d. losses as a degenerate two-state chain.
Matrix iid_transition(double p) {
  Matrix Q(2, 2);
  Q << p, 1.0 - p, p, 1.0 - p;
  return Q;
}

void require_single_input(const mjls::AgentModel& model, const char* who) {
  if (model.m() != 1) {
    throw PreconditionError(std::string(who) +
                            " needs a single-input agent (m = 1); use the Markov or LMI criteria for m = " +
                            std::to_string(model.m()));
  }
  if (model.det_a() == 0.0) {
    throw PreconditionError(std::string(who) + " needs det(A) != 0");
  }
}

void record_radii(Verdict& v, const mjls::StabilityVerdict& s) {
  v.certificate.radii = s.radii;
  v.certificate.scalars["worst_radius"] = s.worst_radius;
  v.detail.push_back("max mode spectral radius = " + num(s.worst_radius) +
                     (s.stable ? " < 1" : " >= 1"));
  if (near(s.worst_radius, 1.0)) v.boundary = true;
}

Matrix min_eig_matrix_helper(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double min_sym_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(min_eig_matrix_helper(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Threshold to beat: closed-form gamma_c, or the bisection bracket's upper end.
struct GammaThreshold {
  riccati::CriticalValue cv;
  double feasible_above() const { return cv.upper; }
  double infeasible_below() const { return cv.lower; }
};

double spectral_lambda2(const graph::EdgeDecomposition& decomp) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(decomp.E * decomp.E.transpose(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(1);
}

}  // namespace

std::string to_string(Decision d) {
  switch (d) {
    case Decision::Consensusable:
      return "Consensusable";
    case Decision::NotConsensusable:
      return "NotConsensusable";
    case Decision::SufficientHolds:
      return "SufficientHolds";
    case Decision::SufficientFails:
      return "SufficientFails";
    case Decision::NecessaryFails:
      return "NecessaryFails";
    case Decision::Undecided:
      return "Undecided";
  }
  return "Undecided";
}

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::IidSingleInput:
      return "iid-single-input";
    case Criterion::IidGeneralFading:
      return "iid-general-fading";
    case Criterion::MarkovIff:
      return "markov-iff";
    case Criterion::MarkovLmi:
      return "markov-lmi";
    case Criterion::MarkovAnalytic:
      return "markov-analytic";
    case Criterion::IidAnalytic:
      return "iid-analytic";
    case Criterion::MarkovNecessary:
      return "markov-necessary";
    case Criterion::ScalarIff:
      return "scalar-iff";
    case Criterion::NonidenticalIff:
      return "nonidentical-iff";
    case Criterion::NonidenticalKappa:
      return "nonidentical-kappa";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

Verdict iid_single_input(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                         double loss_rate) {
  require_single_input(model, "iid_single_input");
  if (!(loss_rate >= 0.0 && loss_rate < 1.0)) {
    throw ValidationError("iid_single_input: loss rate must lie in [0, 1)");
  }
  Verdict v;
  v.criterion = Criterion::IidSingleInput;
  const double lhs = (1.0 - loss_rate) * spectrum.c;
  const double det = model.det_a();
  const double rhs = 1.0 - 1.0 / (det * det);
  v.certificate.scalars["lhs"] = lhs;
  v.certificate.scalars["rhs"] = rhs;
  v.certificate.scalars["c"] = spectrum.c;
  v.detail.push_back("(1-p) c = " + num(lhs) + " vs 1 - 1/det(A)^2 = " + num(rhs));
  v.boundary = near(lhs, rhs);
  if (!(lhs > rhs)) {
    v.decision = Decision::NotConsensusable;
    return v;
  }
  v.decision = Decision::Consensusable;

  const auto mare = riccati::mare_solve(model, std::min(lhs, 1.0));
  if (!mare.solved()) {
    v.detail.push_back("MARE at gamma = " + num(lhs) + " did not yield a gain: " + mare.reason);
    return v;
  }
  const auto K = riccati::optimal_gain(mare.solution->P, model, kcheck(spectrum.lambda2 + spectrum.lambdaN));
  v.certificate.gain = K.matrix();
  v.certificate.lyapunov.push_back(mare.solution->P);
  record_radii(v, mjls::ms_stable_identical(model, K, spectrum, iid_transition(loss_rate)));
  return v;
}

Verdict iid_general_fading(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                           double mean, double variance) {
  require_single_input(model, "iid_general_fading");
  if (!(variance >= 0.0) || !(mean * mean + variance > 0.0)) {
    throw ValidationError("iid_general_fading: need variance >= 0 and a positive second moment");
  }
  Verdict v;
  v.criterion = Criterion::IidGeneralFading;
  const double second = mean * mean + variance;
  const double ratio = mean * mean / second;
  const double lhs = ratio * spectrum.c;
  const double det = model.det_a();
  const double rhs = 1.0 - 1.0 / (det * det);
  v.certificate.scalars["lhs"] = lhs;
  v.certificate.scalars["rhs"] = rhs;
  v.certificate.scalars["mean_square_ratio"] = ratio;
  v.detail.push_back("mu^2/(mu^2+sigma^2) c = " + num(lhs) + " vs 1 - 1/det(A)^2 = " + num(rhs));
  v.boundary = near(lhs, rhs);
  if (!(lhs > rhs)) {
    v.decision = Decision::NotConsensusable;
    return v;
  }
  v.decision = Decision::Consensusable;

  const auto mare = riccati::mare_solve(model, std::min(lhs, 1.0));
  if (!mare.solved()) {
    v.detail.push_back("MARE at gamma = " + num(lhs) + " did not yield a gain: " + mare.reason);
    return v;
  }
  const double kappa = mean / second * kcheck(spectrum.lambda2 + spectrum.lambdaN);
  const auto K = riccati::optimal_gain(mare.solution->P, model, kappa);
  v.certificate.gain = K.matrix();
  v.certificate.lyapunov.push_back(mare.solution->P);

  // E[(A + g l BK) (x) (A + g l BK)] for i.i.d. gains g with the given moments.
  const Matrix& A = model.A();
  const Matrix BK = model.B() * K.matrix();
  std::vector<double> radii;
  for (Eigen::Index i = 1; i < spectrum.eigenvalues.size(); ++i) {
    const double l = spectrum.eigenvalues(i);
    const Matrix op = Eigen::kroneckerProduct(A, A).eval() +
                      mean * l * (Eigen::kroneckerProduct(A, BK).eval() + Eigen::kroneckerProduct(BK, A).eval()) +
                      second * l * l * Eigen::kroneckerProduct(BK, BK).eval();
    radii.push_back(mjls::spectral_radius(op));
  }
  record_radii(v, mjls::make_verdict(std::move(radii)));
  return v;
}

// ---------------------------------------------------------------------------

Verdict markov_identical_iff(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                             const channel::TwoStateChannel& channel, const mjls::GainMatrix& K) {
  Verdict v;
  v.criterion = Criterion::MarkovIff;
  const auto s = mjls::ms_stable_identical(model, K, spectrum, channel);
  v.certificate.gain = K.matrix();
  record_radii(v, s);
  if (s.stable) {
    v.decision = Decision::Consensusable;
  } else {
    v.decision = Decision::Undecided;
    v.detail.push_back("the supplied gain does not achieve mean-square consensus; another gain may");
  }
  return v;
}

lmi::Problem markov_identical_lmi_problem(const mjls::AgentModel& model,
                                          const graph::SpectrumSummary& spectrum,
                                          const channel::TwoStateChannel& channel) {
  const int n = model.n();
  const int m = model.m();
  const double p = channel.failure_rate();
  const double q = channel.recovery_rate();
  const double c = spectrum.c;
  const Matrix& A = model.A();
  const Matrix& B = model.B();
  const Matrix I = Matrix::Identity(n, n);

  lmi::Problem prob;
  const int Q1 = prob.add_variable("Q1", n, n, true);
  const int Q2 = prob.add_variable("Q2", n, n, true);
  const int Z1 = prob.add_variable("Z1", m, n, false);
  const int Z2 = prob.add_variable("Z2", m, n, false);
  const lmi::BlockLayout layout({n, n, n, n});

  // Block for the "lost" state.
  auto& lost = prob.add_block("lost-state", layout.total());
  lost.place(layout, 0, 0, Q1, I, I);
  lost.place(layout, 1, 0, Q1, std::sqrt(q * c) * A, I);
  lost.place(layout, 1, 0, Z1, std::sqrt(q * c) * B, I);
  lost.place(layout, 1, 1, Q2, I, I);
  lost.place(layout, 2, 0, Q1, std::sqrt(q * (1.0 - c)) * A, I);
  lost.place(layout, 2, 2, Q2, I, I);
  lost.place(layout, 3, 0, Q1, std::sqrt(1.0 - q) * A, I);
  lost.place(layout, 3, 3, Q1, I, I);

  // Block for the "delivered" state.
  auto& delivered = prob.add_block("delivered-state", layout.total());
  delivered.place(layout, 0, 0, Q2, I, I);
  delivered.place(layout, 1, 0, Q2, std::sqrt((1.0 - p) * c) * A, I);
  delivered.place(layout, 1, 0, Z2, std::sqrt((1.0 - p) * c) * B, I);
  delivered.place(layout, 1, 1, Q2, I, I);
  delivered.place(layout, 2, 0, Q2, std::sqrt((1.0 - p) * (1.0 - c)) * A, I);
  delivered.place(layout, 2, 2, Q2, I, I);
  delivered.place(layout, 3, 0, Q2, std::sqrt(p) * A, I);
  delivered.place(layout, 3, 3, Q1, I, I);
  return prob;
}

Verdict markov_identical_synthesis_lmi(const mjls::AgentModel& model,
                                       const graph::SpectrumSummary& spectrum,
                                       const channel::TwoStateChannel& channel,
                                       const lmi::SolverOptions& options) {
  Verdict v;
  v.criterion = Criterion::MarkovLmi;
  // The diagonal sub-blocks force Q1 > (1-q) A Q1 A', so this bound is
  // necessary for feasibility.
  const double unstable = std::sqrt(1.0 - channel.recovery_rate()) * model.rho_a();
  v.certificate.scalars["unstable_mode_condition"] = unstable;
  if (!(unstable < 1.0)) {
    v.decision = Decision::Undecided;
    v.detail.push_back("(1-q)^1/2 rho(A) = " + num(unstable) +
                       " >= 1, so the LMI system has no solution; sufficient condition not established");
    return v;
  }

  const auto problem = markov_identical_lmi_problem(model, spectrum, channel);
  const auto result = lmi::solve_feasibility(problem, options);
  v.certificate.scalars["solver_iterations"] = result.iterations;
  if (result.status != lmi::Status::Feasible) {
    v.decision = Decision::Undecided;
    v.detail.push_back("LMI solver found no witness in " + std::to_string(result.iterations) +
                       " iterations (worst slack " + num(result.last_slack) +
                       "); sufficient condition not established");
    return v;
  }
  const auto& w = *result.witness;
  const auto margins = lmi::check_witness(problem, w.assignment);
  const double worst = *std::min_element(margins.begin(), margins.end());
  v.certificate.scalars["lmi_min_eigenvalue"] = worst;
  v.detail.push_back("LMI witness found after " + std::to_string(w.iterations) +
                     " iterations, smallest block eigenvalue " + num(worst));

  const Matrix P1 = w.assignment[0].inverse();
  const Matrix P2 = w.assignment[1].inverse();
  v.certificate.lyapunov = {P1, P2};
  const auto K = riccati::optimal_gain(P2, model, kcheck(spectrum.lambda2 + spectrum.lambdaN));
  v.certificate.gain = K.matrix();
  const auto s = mjls::ms_stable_identical(model, K, spectrum, channel);
  record_radii(v, s);
  if (s.stable) {
    v.decision = Decision::SufficientHolds;
  } else {
    v.decision = Decision::Undecided;
    v.detail.push_back("witness gain failed the spectral-radius confirmation");
  }
  return v;
}

namespace {

// Shared tail of the analytic tests: compare gamma_1 with gamma_c, then build
// the MARE gain and confirm it against the exact radius test.
void analytic_from_gamma(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum, double gamma1,
                         const Matrix& transition, Verdict& v) {
  const GammaThreshold th{riccati::gamma_c(model)};
  v.certificate.scalars["gamma_1"] = gamma1;
  v.certificate.scalars["gamma_c"] = th.cv.gamma_c;
  v.detail.push_back("gamma_1 = " + num(gamma1) + " vs gamma_c = " + num(th.cv.gamma_c) + " (" +
                     riccati::to_string(th.cv.method) + ")");
  v.boundary = near(gamma1, th.cv.gamma_c);
  if (gamma1 <= th.infeasible_below()) {
    v.decision = Decision::SufficientFails;
    return;
  }
  if (gamma1 <= th.feasible_above()) {
    v.decision = Decision::Undecided;
    v.detail.push_back("gamma_1 lies inside the gamma_c bisection bracket [" + num(th.cv.lower) + ", " +
                       num(th.cv.upper) + "]");
    return;
  }
  const auto mare = riccati::mare_solve(model, std::min(gamma1, 1.0));
  if (!mare.solved()) {
    v.decision = Decision::Undecided;
    v.detail.push_back("MARE at gamma_1 did not converge: " + mare.reason);
    return;
  }
  const auto K = riccati::optimal_gain(mare.solution->P, model, kcheck(spectrum.lambda2 + spectrum.lambdaN));
  v.certificate.gain = K.matrix();
  v.certificate.lyapunov.push_back(mare.solution->P);
  v.certificate.scalars["mare_residual"] = mare.solution->residual;
  const auto s = mjls::ms_stable_identical(model, K, spectrum, transition);
  record_radii(v, s);
  if (s.stable) {
    v.decision = Decision::SufficientHolds;
  } else {
    v.decision = Decision::Undecided;
    v.detail.push_back("MARE gain failed the spectral-radius confirmation");
  }
}

}  // namespace

Verdict markov_identical_analytic_sufficient(const mjls::AgentModel& model,
                                             const graph::SpectrumSummary& spectrum,
                                             const channel::TwoStateChannel& channel) {
  Verdict v;
  v.criterion = Criterion::MarkovAnalytic;
  const double gamma1 = std::min(channel.recovery_rate(), 1.0 - channel.failure_rate()) * spectrum.c;
  v.detail.push_back("gamma_1 = min{q, 1-p} c");
  analytic_from_gamma(model, spectrum, gamma1, channel.transition(), v);
  return v;
}

Verdict iid_analytic_sufficient(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                                double loss_rate) {
  if (!(loss_rate >= 0.0 && loss_rate < 1.0)) {
    throw ValidationError("iid_analytic_sufficient: loss rate must lie in [0, 1)");
  }
  Verdict v;
  v.criterion = Criterion::IidAnalytic;
  v.detail.push_back("gamma_1 = (1-p) c");
  analytic_from_gamma(model, spectrum, (1.0 - loss_rate) * spectrum.c, iid_transition(loss_rate), v);
  return v;
}

Verdict markov_identical_iff(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                             const Matrix& transition, const mjls::GainMatrix& K) {
  Verdict v;
  v.criterion = Criterion::MarkovIff;
  const auto s = mjls::ms_stable_identical(model, K, spectrum, transition);
  v.certificate.gain = K.matrix();
  record_radii(v, s);
  if (s.stable) {
    v.decision = Decision::Consensusable;
  } else {
    v.decision = Decision::Undecided;
    v.detail.push_back("the supplied gain does not achieve mean-square consensus; another gain may");
  }
  return v;
}

Verdict markov_identical_necessary(const mjls::AgentModel& model,
                                   const graph::SpectrumSummary& spectrum,
                                   const channel::TwoStateChannel& channel,
                                   const std::optional<mjls::GainMatrix>& K) {
  Verdict v;
  v.criterion = Criterion::MarkovNecessary;
  const double p = channel.failure_rate();
  const double q = channel.recovery_rate();
  bool independent_fail = false;
  bool gain_fail = false;

  const double unstable = std::sqrt(1.0 - q) * model.rho_a();
  v.certificate.scalars["unstable_mode_condition"] = unstable;
  v.detail.push_back("(1-q)^1/2 rho(A) = " + num(unstable) + (unstable < 1.0 ? " < 1" : " >= 1"));
  independent_fail |= !(unstable < 1.0);
  v.boundary |= near(unstable, 1.0);

  if (K) {
    K->check_shape(model);
    double worst = 0.0;
    for (Eigen::Index i = 1; i < spectrum.eigenvalues.size(); ++i) {
      const Matrix S = model.A() + spectrum.eigenvalues(i) * model.B() * K->matrix();
      Eigen::EigenSolver<Matrix> es(S, false);
      worst = std::max(worst, std::sqrt(1.0 - p) * es.eigenvalues().cwiseAbs().maxCoeff());
    }
    v.certificate.scalars["closed_loop_condition"] = worst;
    v.detail.push_back("max_i (1-p)^1/2 rho(A + l_i BK) = " + num(worst) + (worst < 1.0 ? " < 1" : " >= 1"));
    gain_fail = !(worst < 1.0);
    v.boundary |= near(worst, 1.0);
  }

  if (model.m() == 1) {
    const double ratio = (spectrum.lambdaN - spectrum.lambda2) / (spectrum.lambdaN + spectrum.lambda2);
    const double single = std::pow(1.0 - p, 0.5 * model.n()) * std::abs(model.det_a()) * ratio;
    v.certificate.scalars["single_input_condition"] = single;
    v.detail.push_back("(1-p)^(n/2) |det A| (lN-l2)/(lN+l2) = " + num(single) + (single < 1.0 ? " < 1" : " >= 1"));
    independent_fail |= !(single < 1.0);
    v.boundary |= near(single, 1.0);
  }

  if (independent_fail) {
    v.decision = Decision::NecessaryFails;
    v.detail.push_back("a gain-independent necessary condition fails: not consensusable");
  } else if (gain_fail) {
    v.decision = Decision::NecessaryFails;
    v.detail.push_back("the supplied gain violates the closed-loop necessary condition");
  } else {
    v.decision = Decision::Undecided;
    v.detail.push_back("necessary conditions hold");
  }
  return v;
}

Verdict scalar_iff(double a, const graph::SpectrumSummary& spectrum, const channel::TwoStateChannel& channel) {
  return scalar_iff(mjls::AgentModel::make(Matrix::Constant(1, 1, a), Matrix::Ones(1, 1)), spectrum, channel);
}

Verdict scalar_iff(const mjls::AgentModel& model, const graph::SpectrumSummary& spectrum,
                   const channel::TwoStateChannel& channel) {
  if (model.n() != 1 || model.m() != 1) {
    throw PreconditionError("scalar_iff needs n = m = 1");
  }
  const double a = model.A()(0, 0);
  const double b = model.B()(0, 0);
  if (std::abs(a) < 1.0) throw PreconditionError("scalar_iff needs |a| >= 1");
  const double p = channel.failure_rate();
  const double q = channel.recovery_rate();
  const double a2 = a * a;
  const double ratio = (spectrum.lambdaN - spectrum.lambda2) / (spectrum.lambdaN + spectrum.lambda2);
  const double theta = ratio * ratio;

  Verdict v;
  v.criterion = Criterion::ScalarIff;
  const double first = (1.0 - q) * a2;
  v.certificate.scalars["first_condition"] = first;
  v.certificate.scalars["theta"] = theta;
  v.detail.push_back("(1-q) a^2 = " + num(first) + (first < 1.0 ? " < 1" : " >= 1"));
  v.boundary = near(first, 1.0);
  bool ok = first < 1.0;
  if (ok) {
    const double second = a2 * theta * (1.0 + p * (a2 - 1.0) / (1.0 - a2 * (1.0 - q)));
    v.certificate.scalars["second_condition"] = second;
    v.detail.push_back("a^2 theta [1 + p(a^2-1)/(1-a^2(1-q))] = " + num(second) + (second < 1.0 ? " < 1" : " >= 1"));
    v.boundary |= near(second, 1.0);
    ok = second < 1.0;
  }
  if (!ok) {
    v.decision = Decision::NotConsensusable;
    return v;
  }
  v.decision = Decision::Consensusable;
  const mjls::GainMatrix K(Matrix::Constant(1, 1, kcheck(spectrum.lambda2 + spectrum.lambdaN) * a / b));
  v.certificate.gain = K.matrix();
  record_radii(v, mjls::ms_stable_identical(model, K, spectrum, channel));
  return v;
}

// ---------------------------------------------------------------------------

Verdict nonidentical_analysis(const mjls::AgentModel& model, const graph::EdgeDecomposition& decomp,
                              const channel::EdgeChannel& channel, const mjls::GainMatrix& K) {
  Verdict v;
  v.criterion = Criterion::NonidenticalIff;
  const auto s = mjls::ms_stable_edge(model, K, decomp, channel);
  v.certificate.gain = K.matrix();
  record_radii(v, s);
  if (s.stable) {
    v.decision = Decision::Consensusable;
  } else {
    v.decision = Decision::Undecided;
    v.detail.push_back("the supplied gain does not achieve mean-square consensus; another gain may");
  }
  return v;
}

Matrix semidefinite_cholesky(const Matrix& m) {
  const Eigen::Index n = m.rows();
  if (m.cols() != n) throw DimensionMismatch("semidefinite_cholesky: matrix is not square");
  const double tol = 1e-12 * (1.0 + m.diagonal().cwiseAbs().maxCoeff());
  Matrix L = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j) - L.row(j).head(j).squaredNorm();
    if (d < -tol) throw std::logic_error("semidefinite_cholesky: matrix is not positive semidefinite");
    if (d <= tol) continue;  // zero pivot: column stays zero
    L(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      L(i, j) = (m(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
  }
  if ((L * L.transpose() - m).norm() > 1e-8 * (1.0 + m.norm())) {
    throw std::logic_error("semidefinite_cholesky: factor does not reproduce the matrix");
  }
  return L;
}

EdgeMoments edge_moments(const graph::EdgeDecomposition& decomp, const channel::EdgeChannel& channel) {
  if (channel.edge_count() != decomp.edge_count()) {
    throw DimensionMismatch("channel covers " + std::to_string(channel.edge_count()) + " edges, graph has " +
                            std::to_string(decomp.edge_count()));
  }
  const int o = channel.state_count();
  const int r = decomp.tree_size;
  std::vector<Matrix> sym(o), quad(o);
  for (int j = 0; j < o; ++j) {
    const Vector gamma = decomp.permute_edges(channel.pattern(j));
    const Matrix MG = decomp.M * gamma.asDiagonal();  // M Gamma_j
    const Matrix RG = decomp.R * gamma.asDiagonal();  // R Gamma_j
    sym[j] = RG * decomp.M.transpose() + MG * decomp.R.transpose();
    quad[j] = RG * decomp.M.transpose() * MG * decomp.R.transpose();
  }
  EdgeMoments out;
  for (int i = 0; i < o; ++i) {
    Matrix N = Matrix::Zero(r, r);
    Matrix M = Matrix::Zero(r, r);
    for (int j = 0; j < o; ++j) {
      N += channel.transition()(i, j) * sym[j];
      M += channel.transition()(i, j) * quad[j];
    }
    M = 0.5 * (M + M.transpose()).eval();
    out.V.push_back(semidefinite_cholesky(M));
    out.N.push_back(std::move(N));
    out.M.push_back(std::move(M));
  }
  return out;
}

double kappa_gamma(const EdgeMoments& moments, double kappa) {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < moments.N.size(); ++i) {
    g = std::min(g, min_sym_eigenvalue(-kappa * moments.N[i] - kappa * kappa * moments.M[i]));
  }
  return g;
}

lmi::Problem nonidentical_kappa_lmi(const EdgeMoments& moments, double kappa, double gamma_c) {
  lmi::Problem prob;
  for (std::size_t i = 0; i < moments.N.size(); ++i) {
    const Eigen::Index r = moments.N[i].rows();
    const lmi::BlockLayout layout({static_cast<int>(r), static_cast<int>(r)});
    auto& b = prob.add_block("state-" + std::to_string(i + 1), layout.total());
    b.place_constant(layout, 0, 0, Matrix::Identity(r, r));
    b.place_constant(layout, 1, 0, -kappa * moments.V[i]);
    b.place_constant(layout, 1, 1, -kappa * moments.N[i] - gamma_c * Matrix::Identity(r, r));
  }
  return prob;
}

Verdict nonidentical_kappa_synthesis(const mjls::AgentModel& model, const graph::EdgeDecomposition& decomp,
                                     const channel::EdgeChannel& channel, const KappaSearchOptions& options) {
  Verdict v;
  v.criterion = Criterion::NonidenticalKappa;
  const EdgeMoments moments = edge_moments(decomp, channel);
  const double kappa_max = options.kappa_max.value_or(4.0 / spectral_lambda2(decomp));
  const int points = std::max(options.grid_points, 3);

  // gamma(kappa) is concave (min of concave quadratics), so a grid followed by
  // golden-section refinement around the best sample finds its maximum.
  std::vector<double> grid(points);
  double best_kappa = 0.0;
  double best_gamma = -std::numeric_limits<double>::infinity();
  int best_index = 0;
  for (int k = 0; k < points; ++k) {
    grid[k] = -kappa_max * (k + 1) / points;
    const double g = kappa_gamma(moments, grid[k]);
    v.certificate.kappa_curve.emplace_back(grid[k], g);
    if (g > best_gamma) {
      best_gamma = g;
      best_kappa = grid[k];
      best_index = k;
    }
  }
  double lo = best_index + 1 < points ? grid[best_index + 1] : grid[best_index];
  double hi = best_index > 0 ? grid[best_index - 1] : 0.0;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = kappa_gamma(moments, x1);
  double f2 = kappa_gamma(moments, x2);
  for (int it = 0; it < 100 && hi - lo > 1e-12 * kappa_max; ++it) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = kappa_gamma(moments, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = kappa_gamma(moments, x2);
    }
  }
  const double refined = 0.5 * (lo + hi);
  const double refined_gamma = kappa_gamma(moments, refined);
  if (refined_gamma > best_gamma && refined < 0.0) {
    best_gamma = refined_gamma;
    best_kappa = refined;
  }

  const GammaThreshold th{riccati::gamma_c(model)};
  v.certificate.scalars["kappa"] = best_kappa;
  v.certificate.scalars["gamma_kappa"] = best_gamma;
  v.certificate.scalars["gamma_c"] = th.cv.gamma_c;
  v.certificate.scalars["kappa_max"] = kappa_max;
  v.detail.push_back("max over kappa of min_i lambda_min(-kappa N_i - kappa^2 M_i) = " + num(best_gamma) +
                     " at kappa = " + num(best_kappa) + " vs gamma_c = " + num(th.cv.gamma_c));
  v.boundary = near(best_gamma, th.cv.gamma_c);
  if (best_gamma <= th.infeasible_below()) {
    v.decision = Decision::SufficientFails;
    return v;
  }
  if (best_gamma <= th.feasible_above()) {
    v.decision = Decision::Undecided;
    v.detail.push_back("gamma(kappa) lies inside the gamma_c bisection bracket");
    return v;
  }

  const auto lmi_problem = nonidentical_kappa_lmi(moments, best_kappa, th.cv.gamma_c);
  const auto margins = lmi::check_witness(lmi_problem, {});
  const double lmi_margin = *std::min_element(margins.begin(), margins.end());
  v.certificate.scalars["lmi_min_eigenvalue"] = lmi_margin;
  v.detail.push_back("LMI blocks at kappa: smallest eigenvalue " + num(lmi_margin));

  const auto mare = riccati::mare_solve(model, std::min(best_gamma, 1.0));
  if (!mare.solved()) {
    v.decision = Decision::Undecided;
    v.detail.push_back("MARE at gamma(kappa) did not converge: " + mare.reason);
    return v;
  }
  const auto K = riccati::optimal_gain(mare.solution->P, model, best_kappa);
  v.certificate.gain = K.matrix();
  v.certificate.lyapunov.push_back(mare.solution->P);
  const auto s = mjls::ms_stable_edge(model, K, decomp, channel);
  record_radii(v, s);
  v.decision = s.stable ? Decision::SufficientHolds : Decision::Undecided;
  if (!s.stable) v.detail.push_back("synthesised gain failed the edge spectral-radius confirmation");
  return v;
}

}  // namespace consensus_kit::criteria
