#include "consensus_kit/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <thread>

#include "consensus_kit/rng.hpp"

namespace consensus_kit::sim {

namespace {

// Runs are folded into fixed-size blocks; block sums are combined in block
// order, so results do not depend on the number of worker threads.
constexpr int kBlockRuns = 32;

struct Kahan {
  std::vector<double> sum;
  std::vector<double> comp;

  explicit Kahan(std::size_t n = 0) : sum(n, 0.0), comp(n, 0.0) {}

  void add(std::size_t i, double v) {
    const double y = v - comp[i];
    const double t = sum[i] + y;
    comp[i] = (t - sum[i]) - y;
    sum[i] = t;
  }
};

// Per-run series laid out as [t][0] = ||delta||^2, [t][1] = ||z_tau||^2,
// [t][2 + i] = ||delta_i||^2.
struct RunSeries {
  std::vector<double> values;
  bool diverged = false;
};

int channel_state_count(const channel::ChannelModel& ch) {
  if (const auto* e = std::get_if<channel::EdgeChannel>(&ch)) return e->state_count();
  return 2;
}

// Columns of X are agent states; returns the per-time series entries.
void record(const Matrix& X, const graph::EdgeDecomposition& decomp, double* out) {
  const Vector mean = X.rowwise().mean();
  const Matrix D = X.colwise() - mean;
  out[0] = D.squaredNorm();
  out[1] = (X * decomp.E_tau).squaredNorm();
  for (Eigen::Index i = 0; i < D.cols(); ++i) out[2 + i] = D.col(i).squaredNorm();
}

Matrix as_columns(const Vector& stacked, int n) {
  return Eigen::Map<const Matrix>(stacked.data(), n, stacked.size() / n);
}

Vector as_stacked(const Matrix& cols) { return Eigen::Map<const Vector>(cols.data(), cols.size()); }

template <class RunFn>
SimResult monte_carlo(const SimScenario& s, const graph::EdgeDecomposition& decomp, RunFn run_fn,
                      const char* form) {
  const int N = s.topology.vertex_count();
  const int width = N + 2;
  const std::size_t len = static_cast<std::size_t>(s.horizon + 1) * width;
  const int blocks = (s.runs + kBlockRuns - 1) / kBlockRuns;

  struct BlockSum {
    std::vector<double> values;
    int diverged = 0;
    int averaged = 0;
  };
  std::vector<BlockSum> block_sums(blocks);
  std::atomic<int> next_block{0};

  auto worker = [&]() {
    for (int b = next_block++; b < blocks; b = next_block++) {
      Kahan acc(len);
      BlockSum& out = block_sums[b];
      const int first = b * kBlockRuns;
      const int last = std::min(s.runs, first + kBlockRuns);
      for (int r = first; r < last; ++r) {
        const RunSeries series = run_fn(run_seed(s.seed, r), decomp);
        if (series.diverged) ++out.diverged;
        if (series.diverged && s.exclude_diverged) continue;
        ++out.averaged;
        for (std::size_t k = 0; k < len; ++k) acc.add(k, series.values[k]);
      }
      out.values = std::move(acc.sum);
    }
  };

  const int threads = std::min(thread_count(), blocks);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  Kahan total(len);
  SimResult res;
  for (const auto& b : block_sums) {
    for (std::size_t k = 0; k < len; ++k) total.add(k, b.values[k]);
    res.diverged_runs += b.diverged;
    res.averaged_runs += b.averaged;
  }
  const double scale = res.averaged_runs > 0 ? 1.0 / res.averaged_runs : 0.0;
  res.mse_total.resize(s.horizon + 1);
  res.tree_edge_norm.resize(s.horizon + 1);
  res.mse_per_agent.assign(N, std::vector<double>(s.horizon + 1));
  for (int t = 0; t <= s.horizon; ++t) {
    const double* row = total.sum.data() + static_cast<std::size_t>(t) * width;
    res.mse_total[t] = row[0] * scale;
    res.tree_edge_norm[t] = row[1] * scale;
    for (int i = 0; i < N; ++i) res.mse_per_agent[i][t] = row[2 + i] * scale;
  }
  const double start = res.mse_total.front();
  const double end = res.mse_total.back();
  if (start > 0.0) {
    res.decay_ratio = end / start;
  } else {
    res.decay_ratio = end > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  res.seed = s.seed;
  res.run_seeds.reserve(s.runs);
  for (int r = 0; r < s.runs; ++r) res.run_seeds.push_back(run_seed(s.seed, r));
  res.form = form;
  return res;
}

// Pads a truncated trajectory by holding its last (saturated) state.
void fill_series(const std::vector<Vector>& traj, int horizon, const graph::EdgeDecomposition& decomp,
                 RunSeries& out, const std::function<Matrix(const Vector&)>& to_agents) {
  const int width = decomp.n_vertices + 2;
  out.values.assign(static_cast<std::size_t>(horizon + 1) * width, 0.0);
  out.diverged = static_cast<int>(traj.size()) < horizon + 1;
  Vector last = traj.back();
  if (out.diverged) last *= kOverflowGuard / last.norm();
  for (int t = 0; t <= horizon; ++t) {
    const Vector& v = t + 1 < static_cast<int>(traj.size()) ? traj[t] : last;
    record(to_agents(v), decomp, out.values.data() + static_cast<std::size_t>(t) * width);
  }
}

}  // namespace

void validate(const SimScenario& s) {
  if (s.horizon < 1) throw ValidationError("simulation horizon must be at least 1");
  if (s.runs < 1) throw ValidationError("simulation runs must be at least 1");
  if (!(s.init.lo <= s.init.hi)) throw ValidationError("initial box needs lo <= hi");
  s.gain.check_shape(s.model);
  if (const auto* e = std::get_if<channel::EdgeChannel>(&s.channel)) {
    if (e->edge_count() != s.topology.edge_count()) {
      throw DimensionMismatch("edge channel covers " + std::to_string(e->edge_count()) + " edges, topology has " +
                              std::to_string(s.topology.edge_count()));
    }
  }
  if (!s.topology.connected()) throw NotConnected("simulation topology is not connected");
}

std::uint64_t run_seed(std::uint64_t seed, int run) { return derive_seed(seed, static_cast<std::uint64_t>(run)); }

Vector initial_states(const SimScenario& s, std::uint64_t rs) {
  Xoshiro256ss rng(derive_seed(rs, 0));
  Vector x(static_cast<Eigen::Index>(s.topology.vertex_count()) * s.model.n());
  for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = rng.uniform(s.init.lo, s.init.hi);
  return x;
}

channel::LossPath run_path(const SimScenario& s, std::uint64_t rs) {
  return channel::sample_path(s.channel, s.horizon, derive_seed(rs, 1), s.channel_initial);
}

Vector link_gains(const channel::ChannelModel& ch, int edge_count, int state) {
  if (const auto* iid = std::get_if<channel::IidChannel>(&ch)) {
    return Vector::Constant(edge_count, iid->gain(state));
  }
  if (std::holds_alternative<channel::TwoStateChannel>(ch)) {
    return Vector::Constant(edge_count, state == 0 ? 0.0 : 1.0);
  }
  return std::get<channel::EdgeChannel>(ch).pattern(state);
}

std::vector<Vector> vertex_trajectory(const SimScenario& s, const channel::LossPath& path, const Vector& x0) {
  const int n = s.model.n();
  const int N = s.topology.vertex_count();
  const auto& edges = s.topology.edges();
  const Matrix& A = s.model.A();
  const Matrix BK = s.model.B() * s.gain.matrix();

  // Weighted Laplacian per channel state.
  const int states = channel_state_count(s.channel);
  std::vector<Matrix> lap(states);
  for (int k = 0; k < states; ++k) {
    const Vector g = link_gains(s.channel, static_cast<int>(edges.size()), k);
    Matrix L = Matrix::Zero(N, N);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const int u = edges[e].u - 1;
      const int v = edges[e].v - 1;
      L(u, u) += g(e);
      L(v, v) += g(e);
      L(u, v) -= g(e);
      L(v, u) -= g(e);
    }
    lap[k] = std::move(L);
  }

  std::vector<Vector> traj;
  traj.reserve(path.states.size() + 1);
  traj.push_back(x0);
  Matrix X = as_columns(x0, n);
  for (int st : path.states) {
    X = (A * X + BK * (X * lap[st])).eval();
    traj.push_back(as_stacked(X));
    const double norm = traj.back().norm();
    if (!std::isfinite(norm) || norm > kOverflowGuard) {
      if (!std::isfinite(norm)) traj.pop_back();
      break;
    }
  }
  return traj;
}

std::vector<Vector> edge_trajectory(const SimScenario& s, const graph::EdgeDecomposition& decomp,
                                    const channel::LossPath& path, const Vector& z0) {
  const int states = channel_state_count(s.channel);
  std::vector<Matrix> modes(states);
  for (int k = 0; k < states; ++k) {
    modes[k] = mjls::edge_mode_matrix(s.model, s.gain, decomp, link_gains(s.channel, decomp.edge_count(), k));
  }
  std::vector<Vector> traj;
  traj.reserve(path.states.size() + 1);
  traj.push_back(z0);
  for (int st : path.states) {
    traj.push_back(modes[st] * traj.back());
    const double norm = traj.back().norm();
    if (!std::isfinite(norm) || norm > kOverflowGuard) {
      if (!std::isfinite(norm)) traj.pop_back();
      break;
    }
  }
  return traj;
}

SimResult simulate(const SimScenario& s) {
  validate(s);
  const auto decomp = graph::edge_decomposition(s.topology, s.orientation, s.tree_rule);
  const int n = s.model.n();
  auto run = [&](std::uint64_t rs, const graph::EdgeDecomposition& d) {
    RunSeries out;
    const auto traj = vertex_trajectory(s, run_path(s, rs), initial_states(s, rs));
    fill_series(traj, s.horizon, d, out, [n](const Vector& x) { return as_columns(x, n); });
    return out;
  };
  return monte_carlo(s, decomp, run, "vertex");
}

SimResult simulate_edge(const SimScenario& s) {
  validate(s);
  const auto decomp = graph::edge_decomposition(s.topology, s.orientation, s.tree_rule);
  const int n = s.model.n();
  // delta = E_tau (E_tau' E_tau)^-1 z_tau; as columns, D = Z (E_tau (E_tau' E_tau)^-1)'.
  const Matrix back = (decomp.E_tau * (decomp.E_tau.transpose() * decomp.E_tau).inverse()).transpose();
  auto run = [&](std::uint64_t rs, const graph::EdgeDecomposition& d) {
    RunSeries out;
    const Matrix X0 = as_columns(initial_states(s, rs), n);
    const Vector z0 = as_stacked(X0 * d.E_tau);
    const auto traj = edge_trajectory(s, d, run_path(s, rs), z0);
    fill_series(traj, s.horizon, d, out, [n, &back](const Vector& z) { return (as_columns(z, n) * back).eval(); });
    return out;
  };
  return monte_carlo(s, decomp, run, "edge");
}

int thread_count() {
  if (const char* env = std::getenv("CONSENSUS_KIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::string to_csv(const SimResult& r) {
  std::string out = "t,mse_total";
  for (std::size_t i = 0; i < r.mse_per_agent.size(); ++i) out += ",mse_agent_" + std::to_string(i + 1);
  out += '\n';
  char buf[40];
  for (std::size_t t = 0; t < r.mse_total.size(); ++t) {
    out += std::to_string(t);
    std::snprintf(buf, sizeof buf, ",%.17g", r.mse_total[t]);
    out += buf;
    for (const auto& agent : r.mse_per_agent) {
      std::snprintf(buf, sizeof buf, ",%.17g", agent[t]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace consensus_kit::sim
