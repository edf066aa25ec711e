#include <doctest.h>

#include <cmath>
#include <vector>

#include "consensus_kit/criteria.hpp"
#include "consensus_kit/mjls.hpp"
#include "support/fixtures.hpp"

using namespace consensus_kit;
using namespace consensus_kit::mjls;
using fixtures::kron;

namespace {

GainMatrix scalar_gain(double k) { return GainMatrix(Matrix::Constant(1, 1, k)); }

// [[(1-q) A(x)A, p S(x)S], [q A(x)A, (1-p) S(x)S]] from explicit Kronecker products.
Matrix reference_operator(const Matrix& A, const Matrix& BK, double lambda, double p, double q) {
  const Matrix S = A + lambda * BK;
  const Matrix AA = kron(A, A), SS = kron(S, S);
  const Eigen::Index d = AA.rows();
  Matrix H(2 * d, 2 * d);
  H << (1 - q) * AA, p * SS, q * AA, (1 - p) * SS;
  return H;
}

}  // namespace

TEST_CASE("agent model validation") {
  auto m = fixtures::agent_model();
  CHECK(m.n() == 3);
  CHECK(m.m() == 2);
  CHECK(m.det_a() == doctest::Approx(fixtures::agent_A().determinant()));
  CHECK(m.rho_a() == doctest::Approx(fixtures::radius(fixtures::agent_A())));
  CHECK(m.all_modes_unstable());
  CHECK(m.warnings().empty());

  auto damped = fixtures::scalar_model(0.5);
  CHECK_FALSE(damped.all_modes_unstable());
  CHECK(damped.warnings().size() == 1);
  Matrix B(2, 2);
  B << 1, 2, 2, 4;
  CHECK_THROWS_AS(AgentModel::make(Matrix::Identity(2, 2), B), ValidationError);  // rank deficient
  Matrix b(2, 1);
  b << 1, 0;
  CHECK_THROWS_AS(AgentModel::make(Matrix::Identity(2, 2) * 2, b), ValidationError);  // uncontrollable
  CHECK_THROWS_AS(AgentModel::make(Matrix::Identity(2, 3), b), ValidationError);
  CHECK_THROWS_AS(GainMatrix(Matrix::Zero(2, 2)).check_shape(fixtures::agent_model()), DimensionMismatch);
}

TEST_CASE("identical operator, scalar hand assembly") {
  auto model = fixtures::scalar_model(2.0);
  auto ch = channel::TwoStateChannel::make(0.2, 0.8);
  Matrix H = build_identical_operator(model, scalar_gain(-0.8), 2.0, ch);
  Matrix expected(2, 2);
  expected << 0.8, 0.032, 3.2, 0.128;
  CHECK((H - expected).norm() < 1e-12);
  // det = 0, so the radius is the trace
  CHECK(spectral_radius(H) == doctest::Approx(0.928).epsilon(1e-12));
}

TEST_CASE("identical operator equals explicit Kronecker assembly") {
  Xoshiro256ss rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    Matrix A = fixtures::random_matrix(rng, n, n, -1.5, 1.5);
    Matrix B = fixtures::random_matrix(rng, n, 1, -1.0, 1.0);
    Matrix K = fixtures::random_matrix(rng, 1, n, -1.0, 1.0);
    auto model = AgentModel::make(A, B);
    const double p = rng.uniform(0.05, 0.95), q = rng.uniform(0.05, 0.95), lambda = rng.uniform(0.5, 4.0);
    Matrix H = build_identical_operator(model, GainMatrix(K), lambda, channel::TwoStateChannel::make(p, q));
    CHECK((H - reference_operator(A, B * K, lambda, p, q)).norm() < 1e-12);
  }
}

TEST_CASE("zero gain leaves the open-loop growth") {
  auto model = fixtures::scalar_model(1.5);
  for (auto [p, q] : std::vector<std::pair<double, double>>{{0.2, 0.7}, {0.5, 0.5}, {0.9, 0.1}}) {
    auto ch = channel::TwoStateChannel::make(p, q);
    Matrix H = build_identical_operator(model, scalar_gain(0.0), 3.0, ch);
    CHECK(spectral_radius(H) >= 2.25 - 1e-12);
  }
  auto agent = fixtures::agent_model();
  auto v = ms_stable_identical(agent, GainMatrix(Matrix::Zero(2, 3)),
                               graph::laplacian_spectrum(fixtures::four_agents()),
                               channel::TwoStateChannel::make(0.2, 0.7));
  CHECK_FALSE(v.stable);
  CHECK(v.worst_radius == doctest::Approx(agent.rho_a() * agent.rho_a()).epsilon(1e-9));
}

TEST_CASE("symmetric chain gives a rank-one scalar operator") {
  for (double k : {-0.3, -0.8, -1.1}) {
    const double a = 2.0, lambda = 2.0;
    Matrix H = build_identical_operator(fixtures::scalar_model(a), scalar_gain(k), lambda,
                                        channel::TwoStateChannel::make(0.5, 0.5));
    const double s = a + lambda * k;
    CHECK(spectral_radius(H) == doctest::Approx(0.5 * (a * a + s * s)).epsilon(1e-12));
  }
}

TEST_CASE("spectral radius basics") {
  CHECK(spectral_radius(Matrix::Identity(4, 4)) == doctest::Approx(1.0));
  Matrix nil(2, 2);
  nil << 0, 1, 0, 0;
  CHECK(spectral_radius(nil) == doctest::Approx(0.0));
  CHECK_THROWS_AS(spectral_radius(Matrix::Zero(2, 3)), DimensionMismatch);
  Matrix rot(2, 2);
  rot << 0, -1, 1, 0;
  CHECK(spectral_radius(0.9 * rot) == doctest::Approx(0.9));
}

TEST_CASE("power iteration path on a large second-moment operator") {
  // S (x) S for a 40x40 S has 1600 rows; its radius is rho(S)^2.
  Xoshiro256ss rng(8);
  Matrix S = fixtures::random_matrix(rng, 40, 40, -0.1, 0.1) + 0.5 * Matrix::Identity(40, 40);
  const double expected = std::pow(fixtures::radius(S), 2);
  Matrix big = kron(S, S);
  REQUIRE(big.rows() > kDenseEigenLimit);
  CHECK(spectral_radius(big) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("matrix-free radius agrees with the assembled operator") {
  auto model = fixtures::agent_model();
  auto d = graph::edge_decomposition(fixtures::four_agents());
  auto ch = fixtures::nonidentical_channel();
  GainMatrix K(fixtures::nonidentical_K());
  std::vector<Matrix> modes;
  for (int i = 0; i < ch.state_count(); ++i) modes.push_back(edge_mode_matrix(model, K, d, ch.pattern(i)));
  const double dense = spectral_radius(build_edge_operator(model, K, d, ch));
  CHECK(second_moment_radius(modes, ch.transition()) == doctest::Approx(dense).epsilon(1e-7));
}

TEST_CASE("edge operator on a single edge reduces to the identical operator") {
  Xoshiro256ss rng(12);
  auto d = graph::edge_decomposition(graph::Topology::build(2, {{1, 2}}));
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + trial % 2;
    Matrix A = fixtures::random_matrix(rng, n, n, -1.5, 1.5);
    Matrix B = fixtures::random_matrix(rng, n, 1, -1.0, 1.0);
    GainMatrix K(fixtures::random_matrix(rng, 1, n, -1.0, 1.0));
    auto model = AgentModel::make(A, B);
    auto two = channel::TwoStateChannel::make(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95));
    auto edge = channel::EdgeChannel::make(1, {{0}, {1}}, two.transition());
    Matrix He = build_edge_operator(model, K, d, edge);
    Matrix Hi = build_identical_operator(model, K, 2.0, two);
    CHECK((He - Hi).norm() < 1e-12);
  }
}

TEST_CASE("lossless edge operator matches the deterministic mode test") {
  auto model = fixtures::agent_model();
  auto t = fixtures::four_agents();
  auto d = graph::edge_decomposition(t);
  auto s = graph::laplacian_spectrum(t);
  auto ch = channel::EdgeChannel::make(4, {{1, 1, 1, 1}}, Matrix::Ones(1, 1));
  for (const Matrix& Km : {fixtures::identical_K(), fixtures::nonidentical_K(), Matrix(0.3 * fixtures::identical_K())}) {
    GainMatrix K(Km);
    double worst = 0.0;
    for (int i = 1; i < s.eigenvalues.size(); ++i)
      worst = std::max(worst, fixtures::radius(model.A() + s.eigenvalues(i) * model.B() * Km));
    auto v = ms_stable_edge(model, K, d, ch);
    CHECK(v.worst_radius == doctest::Approx(worst * worst).epsilon(1e-9));
    CHECK(v.stable == (worst < 1.0));
  }
}

TEST_CASE("network experiments with the printed gains") {
  auto model = fixtures::agent_model();
  auto t = fixtures::four_agents();
  auto s = graph::laplacian_spectrum(t);
  auto ident = ms_stable_identical(model, GainMatrix(fixtures::identical_K()), s,
                                   channel::TwoStateChannel::make(0.2, 0.7));
  CHECK(ident.stable);
  CHECK(ident.radii.size() == 3);
  CHECK(ident.worst_radius < 1.0);
  CHECK(ident.worst_radius == doctest::Approx(0.94683).epsilon(1e-4));

  auto edge = ms_stable_edge(model, GainMatrix(fixtures::nonidentical_K()), graph::edge_decomposition(t),
                             fixtures::nonidentical_channel());
  CHECK(edge.stable);
  CHECK(edge.worst_radius == doctest::Approx(0.99664).epsilon(1e-4));
}

TEST_CASE("scalar verdict agrees with the closed-form region") {
  auto model = fixtures::scalar_model(2.0);
  auto s = fixtures::spectrum_of(2.0, 3.0);
  auto ch = channel::TwoStateChannel::make(0.1, 0.9);
  auto v = ms_stable_identical(model, scalar_gain(-0.8), s, ch);
  auto closed = criteria::scalar_iff(2.0, s, ch);
  CHECK(v.stable);
  CHECK(closed.decision == criteria::Decision::Consensusable);
}

TEST_CASE("radius is continuous in the gain") {
  auto model = fixtures::agent_model();
  auto s = graph::laplacian_spectrum(fixtures::four_agents());
  auto ch = channel::TwoStateChannel::make(0.2, 0.7);
  Xoshiro256ss rng(1);
  Matrix K = fixtures::identical_K();
  const double base = ms_stable_identical(model, GainMatrix(K), s, ch).worst_radius;
  for (int i = 0; i < 5; ++i) {
    Matrix dK = fixtures::random_matrix(rng, 2, 3, -1e-9, 1e-9);
    CHECK(std::abs(ms_stable_identical(model, GainMatrix(K + dK), s, ch).worst_radius - base) < 1e-6);
  }
}

TEST_CASE("coupled Lyapunov verification for a stable gain") {
  auto model = fixtures::agent_model();
  auto s = graph::laplacian_spectrum(fixtures::four_agents());
  auto ch = channel::TwoStateChannel::make(0.2, 0.7);
  GainMatrix K(fixtures::identical_K());
  const double p = 0.2, q = 0.7;
  const Matrix& A = model.A();

  // Solve the coupled Lyapunov equations with right-hand side I by fixed-point
  // iteration; converges because the mode operators are stable.
  std::vector<Matrix> P1, P2;
  for (int i = 1; i < s.eigenvalues.size(); ++i) {
    const Matrix S = A + s.eigenvalues(i) * model.B() * K.matrix();
    Matrix X1 = Matrix::Identity(3, 3), X2 = Matrix::Identity(3, 3);
    for (int it = 0; it < 5000; ++it) {
      Matrix Y1 = Matrix::Identity(3, 3) + (1 - q) * A.transpose() * X1 * A + q * S.transpose() * X2 * S;
      Matrix Y2 = Matrix::Identity(3, 3) + p * A.transpose() * X1 * A + (1 - p) * S.transpose() * X2 * S;
      X1 = Y1;
      X2 = Y2;
    }
    P1.push_back(X1);
    P2.push_back(X2);
  }
  CHECK(coupled_lyapunov_margin_identical(model, K, s, ch, P1, P2) == doctest::Approx(1.0).epsilon(1e-6));
  std::vector<Matrix> I1{Matrix::Identity(3, 3)};
  CHECK(coupled_lyapunov_margin_identical(model, K, s, ch, I1, I1) < 0.0);
}

TEST_CASE("size guard") {
  std::vector<graph::Edge> edges;
  for (int v = 2; v <= 8; ++v) edges.push_back({v - 1, v});
  auto d = graph::edge_decomposition(graph::Topology::build(8, edges));
  std::vector<std::vector<int>> states;
  for (int i = 0; i < 8; ++i) states.push_back(channel::outcome_pattern(7, i));
  auto ch = channel::EdgeChannel::make(7, states, Matrix::Constant(8, 8, 0.125));
  // 8 states * (7 * 12)^2 = 56448 rows
  auto big = AgentModel::make(Matrix::Identity(12, 12) * 1.01, Matrix::Identity(12, 12));
  GainMatrix K(Matrix::Zero(12, 12));
  CHECK_THROWS_AS(build_edge_operator(big, K, d, ch), SizeLimitExceeded);
  CHECK(edge_mode_matrix(big, K, d, ch.pattern(0)).rows() == 84);
}
