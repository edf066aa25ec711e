#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "consensus_kit/channel.hpp"
#include "consensus_kit/graph.hpp"
#include "consensus_kit/mjls.hpp"
#include "consensus_kit/sim.hpp"

namespace consensus_kit::scenario {

struct SynthesisOptions {
  /// "auto", "lmi", "analytic", "scalar", "iid", "kappa".
  std::string method = "auto";
  int lmi_max_iterations = 2000;
  std::optional<double> kappa_max;
  int kappa_grid = 200;
};

struct SimulationOptions {
  int horizon = 100;
  int runs = 1000;
  std::uint64_t seed = 1;
  sim::InitBox init;
  /// "auto" picks edge form for per-edge channels, vertex form otherwise.
  std::string form = "auto";
  bool exclude_diverged = false;
};

/// A parsed and validated scenario file.
struct Scenario {
  mjls::AgentModel model;
  graph::Topology topology;
  graph::OrientationRule orientation;
  graph::TreeRule tree_rule = graph::TreeRule::BreadthFirst;
  channel::ChannelModel channel;
  channel::InitialRule channel_initial;
  std::optional<mjls::GainMatrix> gain;
  std::vector<std::string> theorems{"all"};
  SynthesisOptions synthesis;
  SimulationOptions simulation;
};

/// Throws ValidationError with a JSON-path location ("$.channel.Q[1][0]: ...")
/// for malformed values and unknown keys.
Scenario parse(const nlohmann::json& doc);
Scenario load(const std::string& path);

/// Matrix from a row-major array of arrays; `where` prefixes error messages.
Matrix parse_matrix(const nlohmann::json& value, const std::string& where);

/// Gain file: either a bare row-major array or {"K": [...]}.
mjls::GainMatrix load_gain(const std::string& path);

/// Reads a whole file; ValidationError if it cannot be opened.
std::string read_file(const std::string& path);

/// Analysis theorem names accepted by `analysis.theorems` and `--theorem`.
const std::vector<std::string>& theorem_names();

sim::SimScenario to_sim(const Scenario& s, const mjls::GainMatrix& gain);

}  // namespace consensus_kit::scenario
