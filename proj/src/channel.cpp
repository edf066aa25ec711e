#include "consensus_kit/channel.hpp"

#include <cmath>
#include <set>
#include <string>

#include "consensus_kit/rng.hpp"

namespace consensus_kit::channel {

namespace {

void require_probability(double x, const char* name, bool open) {
  const bool ok = open ? (x > 0.0 && x < 1.0) : (x >= 0.0 && x <= 1.0);
  if (!std::isfinite(x) || !ok) {
    throw ValidationError(std::string(name) + " = " + std::to_string(x) + " must lie in " +
                          (open ? "(0, 1)" : "[0, 1]"));
  }
}

int draw(const Eigen::Ref<const Vector>& weights, double u) {
  double acc = 0.0;
  const int n = static_cast<int>(weights.size());
  for (int j = 0; j < n - 1; ++j) {
    acc += weights(j);
    if (u < acc) return j;
  }
  return n - 1;
}

}  // namespace

IidChannel IidChannel::bernoulli(double p) {
  require_probability(p, "loss rate", false);
  return IidChannel{p, std::nullopt};
}

IidChannel IidChannel::with_moments(double mean, double variance) {
  if (!std::isfinite(mean) || !std::isfinite(variance) || variance < 0.0) {
    throw ValidationError("fading moments need finite mean and nonnegative variance");
  }
  if (mean * mean + variance <= 0.0) {
    throw ValidationError("fading second moment must be positive");
  }
  return IidChannel{0.0, FadingMoments{mean, variance}};
}

double IidChannel::mean() const { return fading ? fading->mean : 1.0 - loss_rate; }

double IidChannel::variance() const {
  return fading ? fading->variance : loss_rate * (1.0 - loss_rate);
}

double IidChannel::gain(int state) const {
  if (!fading) return state == 0 ? 0.0 : 1.0;
  const double s = std::sqrt(fading->variance);
  return state == 0 ? fading->mean - s : fading->mean + s;
}

TwoStateChannel TwoStateChannel::make(double failure_rate, double recovery_rate) {
  require_probability(failure_rate, "failure rate p", true);
  require_probability(recovery_rate, "recovery rate q", true);
  return TwoStateChannel(failure_rate, recovery_rate);
}

Matrix TwoStateChannel::transition() const {
  Matrix Q(2, 2);
  Q << 1.0 - q_, q_, p_, 1.0 - p_;
  return Q;
}

Vector TwoStateChannel::stationary() const {
  Vector pi(2);
  pi << p_ / (p_ + q_), q_ / (p_ + q_);
  return pi;
}

EdgeChannel EdgeChannel::make(int edge_count, std::vector<std::vector<int>> states, Matrix transition) {
  if (edge_count < 1) throw ValidationError("edge channel needs at least one edge");
  if (states.empty()) throw ValidationError("edge channel needs at least one state");
  const int o = static_cast<int>(states.size());
  std::set<std::vector<int>> distinct;
  for (int i = 0; i < o; ++i) {
    if (static_cast<int>(states[i].size()) != edge_count) {
      throw ValidationError("state " + std::to_string(i + 1) + " has " +
                            std::to_string(states[i].size()) + " entries, expected " +
                            std::to_string(edge_count));
    }
    for (int v : states[i]) {
      if (v != 0 && v != 1) {
        throw ValidationError("state " + std::to_string(i + 1) + " has a non-binary diagonal entry");
      }
    }
    if (!distinct.insert(states[i]).second) {
      throw ValidationError("state " + std::to_string(i + 1) + " duplicates an earlier state");
    }
  }
  if (transition.rows() != o || transition.cols() != o) {
    throw ValidationError("transition matrix must be " + std::to_string(o) + "x" + std::to_string(o));
  }
  for (int i = 0; i < o; ++i) {
    for (int j = 0; j < o; ++j) {
      if (!std::isfinite(transition(i, j)) || transition(i, j) < 0.0) {
        throw ValidationError("transition entry (" + std::to_string(i + 1) + "," +
                              std::to_string(j + 1) + ") is negative or not finite");
      }
    }
    if (std::abs(transition.row(i).sum() - 1.0) > 1e-12) {
      throw ValidationError("transition row " + std::to_string(i + 1) + " does not sum to 1");
    }
  }
  return EdgeChannel(edge_count, std::move(states), std::move(transition));
}

Vector EdgeChannel::pattern(int i) const {
  Vector v(l_);
  for (int k = 0; k < l_; ++k) v(k) = states_.at(i)[k];
  return v;
}

Vector EdgeChannel::stationary() const { return stationary_distribution(transition_); }

std::uint64_t outcome_index(const std::vector<int>& pattern) {
  std::uint64_t index = 0;
  for (std::size_t j = 0; j < pattern.size(); ++j) {
    if (pattern[j]) index |= (std::uint64_t{1} << j);
  }
  return index;
}

std::vector<int> outcome_pattern(int edge_count, std::uint64_t index) {
  std::vector<int> eta(edge_count);
  for (int j = 0; j < edge_count; ++j) eta[j] = static_cast<int>((index >> j) & 1U);
  return eta;
}

Vector stationary_distribution(const Matrix& transition) {
  const Eigen::Index o = transition.rows();
  Matrix system(o + 1, o);
  system.topRows(o) = transition.transpose() - Matrix::Identity(o, o);
  system.row(o).setOnes();
  Vector rhs = Vector::Zero(o + 1);
  rhs(o) = 1.0;
  Vector pi = system.colPivHouseholderQr().solve(rhs);
  for (Eigen::Index i = 0; i < o; ++i) pi(i) = std::max(pi(i), 0.0);
  return pi / pi.sum();
}

LossPath sample_path(const ChannelModel& channel, int horizon, std::uint64_t seed,
                     const InitialRule& initial) {
  if (horizon < 1) throw ValidationError("sample_path: horizon must be at least 1");
  LossPath path;
  path.seed = seed;
  path.states.resize(horizon);
  Xoshiro256ss rng(seed);

  if (const auto* iid = std::get_if<IidChannel>(&channel)) {
    const double p_low = iid->fading ? 0.5 : iid->loss_rate;
    for (int t = 0; t < horizon; ++t) path.states[t] = rng.uniform() < p_low ? 0 : 1;
    return path;
  }

  Matrix Q;
  Vector pi;
  if (const auto* two = std::get_if<TwoStateChannel>(&channel)) {
    Q = two->transition();
    pi = two->stationary();
  } else {
    const auto& edge = std::get<EdgeChannel>(channel);
    Q = edge.transition();
    pi = edge.stationary();
  }
  const int o = static_cast<int>(Q.rows());
  int state;
  if (initial.fixed_state) {
    state = *initial.fixed_state;
    if (state < 0 || state >= o) {
      throw ValidationError("initial channel state " + std::to_string(state) + " out of range");
    }
  } else {
    state = draw(pi, rng.uniform());
  }
  path.states[0] = state;
  for (int t = 1; t < horizon; ++t) {
    state = draw(Q.row(state).transpose(), rng.uniform());
    path.states[t] = state;
  }
  return path;
}

}  // namespace consensus_kit::channel
