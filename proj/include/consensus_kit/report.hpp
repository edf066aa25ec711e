#pragma once

#include <string>

#include <json.hpp>

#include "consensus_kit/criteria.hpp"
#include "consensus_kit/graph.hpp"
#include "consensus_kit/riccati.hpp"
#include "consensus_kit/sim.hpp"

namespace consensus_kit::report {

using nlohmann::json;

json matrix_json(const Matrix& m);
json to_json(const criteria::Verdict& v);
json to_json(const graph::SpectrumSummary& s);
json to_json(const riccati::CriticalValue& cv);
/// Summary only; the time series go to CSV.
json summary_json(const sim::SimResult& r);

/// Deterministic text: keys sorted, two-space indent, floats as %.17g,
/// non-finite floats as null.
std::string dump(const json& j);

}  // namespace consensus_kit::report
