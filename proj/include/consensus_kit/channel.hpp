#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "consensus_kit/common.hpp"

namespace consensus_kit::channel {

/// First two moments of an i.i.d. fading gain.
struct FadingMoments {
  double mean = 1.0;
  double variance = 0.0;
};

/// Identical i.i.d. channel shared by every link. Path state 1 = delivered.
///
/// Without `fading` the gain is Bernoulli: 0 with probability `loss_rate`.
/// With `fading`, gains are drawn from the two-point law mean +/- stddev
/// (equiprobable) and `loss_rate` is ignored by the sampler.
struct IidChannel {
  double loss_rate = 0.0;
  std::optional<FadingMoments> fading;

  static IidChannel bernoulli(double p);
  static IidChannel with_moments(double mean, double variance);

  double mean() const;
  double variance() const;
  /// Gain applied to every link when the path is in `state`.
  double gain(int state) const;
};

/// Two-state Markov chain on {0 = lost, 1 = delivered}:
///   Q = [[1-q, q], [p, 1-p]].
class TwoStateChannel {
 public:
  /// Requires 0 < p < 1 and 0 < q < 1.
  static TwoStateChannel make(double failure_rate, double recovery_rate);

  double failure_rate() const { return p_; }
  double recovery_rate() const { return q_; }
  Matrix transition() const;
  /// (p / (p + q), q / (p + q)).
  Vector stationary() const;

 private:
  TwoStateChannel(double p, double q) : p_(p), q_(q) {}
  double p_;
  double q_;
};

/// Per-edge joint Markov chain. Each state is a 0/1 delivery pattern over the
/// l edges (input edge order); `transition(i, j)` is P(state j | state i).
class EdgeChannel {
 public:
  static EdgeChannel make(int edge_count, std::vector<std::vector<int>> states, Matrix transition);

  int edge_count() const { return l_; }
  int state_count() const { return static_cast<int>(states_.size()); }
  const std::vector<std::vector<int>>& states() const { return states_; }
  const Matrix& transition() const { return transition_; }
  /// Diagonal of state i as a vector in input edge order.
  Vector pattern(int i) const;
  Vector stationary() const;

 private:
  EdgeChannel(int l, std::vector<std::vector<int>> s, Matrix q)
      : l_(l), states_(std::move(s)), transition_(std::move(q)) {}
  int l_;
  std::vector<std::vector<int>> states_;
  Matrix transition_;
};

using ChannelModel = std::variant<IidChannel, TwoStateChannel, EdgeChannel>;

/// Index of a delivery pattern in the full outcome space {0,1}^l:
/// i = eta_l 2^(l-1) + ... + eta_1 2^0.
std::uint64_t outcome_index(const std::vector<int>& pattern);
/// Inverse of outcome_index.
std::vector<int> outcome_pattern(int edge_count, std::uint64_t index);

/// Stationary distribution of a row-stochastic matrix (least squares on
/// pi (Q - I) = 0, sum(pi) = 1).
Vector stationary_distribution(const Matrix& transition);

/// Starting channel state; stationary draw unless `fixed_state` is given.
struct InitialRule {
  std::optional<int> fixed_state;
};

struct LossPath {
  std::vector<int> states;  // one per time step
  std::uint64_t seed = 0;
};

/// Deterministic in (channel, horizon, seed, initial).
LossPath sample_path(const ChannelModel& channel, int horizon, std::uint64_t seed,
                     const InitialRule& initial = {});

}  // namespace consensus_kit::channel
