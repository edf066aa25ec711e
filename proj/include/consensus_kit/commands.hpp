#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "consensus_kit/scenario.hpp"
#include "consensus_kit/sim.hpp"

namespace consensus_kit::commands {

inline constexpr const char* kVersion = "0.1.0";

/// Runs the named analyses ("all" expands to every test that applies to the
/// scenario's channel). An explicitly named test that does not apply throws
/// ValidationError; under "all" it is listed in "skipped" instead.
nlohmann::json analyze(const scenario::Scenario& s, const std::vector<std::string>& theorems,
                       const std::optional<mjls::GainMatrix>& gain);

struct Synthesis {
  nlohmann::json report;
  std::optional<mjls::GainMatrix> gain;  // set when a verdict certified it
};

/// Gain construction for the scenario's channel; `method` overrides the
/// scenario's synthesis.method when non-empty.
Synthesis synthesize(const scenario::Scenario& s, const std::string& method = "");

nlohmann::json gamma_c(const scenario::Scenario& s);

struct Simulation {
  sim::SimResult result;
  nlohmann::json summary;
};

/// Uses `gain`, else the scenario's gain, else a synthesized one. `form`
/// overrides simulation.form when non-empty.
Simulation simulate(const scenario::Scenario& s, const std::optional<mjls::GainMatrix>& gain,
                    const std::string& form = "");

}  // namespace consensus_kit::commands
