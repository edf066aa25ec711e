#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "consensus_kit/channel.hpp"
#include "consensus_kit/common.hpp"
#include "consensus_kit/graph.hpp"
#include "consensus_kit/mjls.hpp"

namespace consensus_kit::sim {

/// Each coordinate of each agent's x_i(0) is uniform on [lo, hi).
struct InitBox {
  double lo = 0.0;
  double hi = 0.5;
};

struct SimScenario {
  mjls::AgentModel model;
  graph::Topology topology;
  channel::ChannelModel channel;
  mjls::GainMatrix gain;
  int horizon = 100;
  int runs = 1000;
  std::uint64_t seed = 0;
  InitBox init;
  channel::InitialRule channel_initial;
  /// Used by simulate_edge only.
  graph::OrientationRule orientation;
  graph::TreeRule tree_rule = graph::TreeRule::BreadthFirst;
  /// Drop runs that hit the overflow guard from the averages.
  bool exclude_diverged = false;
};

/// Throws DimensionMismatch / ValidationError on inconsistent scenarios.
void validate(const SimScenario& s);

struct SimResult {
  /// mse_per_agent[i][t] = E||x_i(t) - xbar(t)||^2, t = 0..horizon.
  std::vector<std::vector<double>> mse_per_agent;
  /// E||delta(t)||^2.
  std::vector<double> mse_total;
  /// E||z_tau(t)||^2 over the tree edges.
  std::vector<double> tree_edge_norm;
  /// mse_total(horizon) / mse_total(0).
  double decay_ratio = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> run_seeds;
  int diverged_runs = 0;
  int averaged_runs = 0;
  std::string form;  // "vertex" or "edge"
};

/// States with norm above this saturate and mark the run diverged.
inline constexpr double kOverflowGuard = 1e15;

/// Vertex-coordinate Monte Carlo: x(t+1) = (I (x) A + L_gamma(t) (x) BK) x(t).
SimResult simulate(const SimScenario& s);

/// Reduced tree-edge Monte Carlo:
/// z_tau(t+1) = (I (x) A + M Gamma(t) R' (x) BK) z_tau(t), with agent errors
/// recovered as delta = (E_tau (E_tau' E_tau)^-1 (x) I) z_tau.
SimResult simulate_edge(const SimScenario& s);

// Pathwise building blocks (also used by the Monte Carlo drivers).

/// Seed for run r: derive_seed(seed, r). Initial states use
/// derive_seed(run_seed, 0), the loss path derive_seed(run_seed, 1).
std::uint64_t run_seed(std::uint64_t seed, int run);

/// Stacked x(0) of length N n, agent-major.
Vector initial_states(const SimScenario& s, std::uint64_t run_seed);

channel::LossPath run_path(const SimScenario& s, std::uint64_t run_seed);

/// Link gains (input edge order) while the channel is in `state`.
Vector link_gains(const channel::ChannelModel& channel, int edge_count, int state);

/// x(0..horizon) along a fixed loss path. Stops early (shorter result) if the
/// overflow guard trips.
std::vector<Vector> vertex_trajectory(const SimScenario& s, const channel::LossPath& path, const Vector& x0);

/// z_tau(0..horizon) along a fixed loss path.
std::vector<Vector> edge_trajectory(const SimScenario& s, const graph::EdgeDecomposition& decomp,
                                    const channel::LossPath& path, const Vector& z_tau0);

/// Worker count: CONSENSUS_KIT_THREADS if set and positive, else hardware concurrency.
int thread_count();

/// CSV with columns t, mse_total, mse_agent_1..N; 17 significant digits.
std::string to_csv(const SimResult& r);

}  // namespace consensus_kit::sim
