#include "consensus_kit/commands.hpp"

#include <algorithm>

#include "consensus_kit/criteria.hpp"
#include "consensus_kit/report.hpp"

namespace consensus_kit::commands {

using nlohmann::json;

namespace {

struct NotApplicable {
  std::string reason;
};

const channel::IidChannel* iid_of(const scenario::Scenario& s) { return std::get_if<channel::IidChannel>(&s.channel); }
const channel::TwoStateChannel* markov_of(const scenario::Scenario& s) {
  return std::get_if<channel::TwoStateChannel>(&s.channel);
}
const channel::EdgeChannel* edge_of(const scenario::Scenario& s) { return std::get_if<channel::EdgeChannel>(&s.channel); }

std::string channel_name(const scenario::Scenario& s) {
  if (iid_of(s)) return iid_of(s)->fading ? "iid-fading" : "iid";
  if (markov_of(s)) return "markov2";
  return "markov-edge";
}

Matrix iid_transition(double p) {
  Matrix Q(2, 2);
  Q << p, 1.0 - p, p, 1.0 - p;
  return Q;
}

json model_json(const mjls::AgentModel& m) {
  return json{{"n", m.n()}, {"m", m.m()}, {"det_a", m.det_a()}, {"rho_a", m.rho_a()}, {"warnings", m.warnings()}};
}

std::vector<criteria::Verdict> run_theorem(const scenario::Scenario& s, const std::string& name,
                                           const std::optional<mjls::GainMatrix>& gain,
                                           const graph::SpectrumSummary& spectrum) {
  const auto& model = s.model;
  std::vector<criteria::Verdict> out;
  if (name == "iid") {
    const auto* iid = iid_of(s);
    if (!iid) throw NotApplicable{"needs an iid channel"};
    if (iid->fading) {
      if (model.m() != 1) throw NotApplicable{"fading test needs a single-input agent"};
      out.push_back(criteria::iid_general_fading(model, spectrum, iid->mean(), iid->variance()));
    } else if (model.m() == 1) {
      out.push_back(criteria::iid_single_input(model, spectrum, iid->loss_rate));
    } else {
      out.push_back(criteria::iid_analytic_sufficient(model, spectrum, iid->loss_rate));
    }
  } else if (name == "markov-iff") {
    if (!gain) throw NotApplicable{"needs a gain (--gain or scenario \"gain\")"};
    gain->check_shape(model);
    if (const auto* two = markov_of(s)) {
      out.push_back(criteria::markov_identical_iff(model, spectrum, *two, *gain));
    } else if (const auto* iid = iid_of(s); iid && !iid->fading) {
      out.push_back(criteria::markov_identical_iff(model, spectrum, iid_transition(iid->loss_rate), *gain));
    } else {
      throw NotApplicable{"needs a markov2 or Bernoulli iid channel"};
    }
  } else if (name == "markov-lmi" || name == "markov-analytic" || name == "necessary") {
    const auto* two = markov_of(s);
    if (!two) throw NotApplicable{"needs a markov2 channel"};
    if (name == "markov-lmi") {
      lmi::SolverOptions opts;
      opts.max_iterations = s.synthesis.lmi_max_iterations;
      out.push_back(criteria::markov_identical_synthesis_lmi(model, spectrum, *two, opts));
    } else if (name == "markov-analytic") {
      out.push_back(criteria::markov_identical_analytic_sufficient(model, spectrum, *two));
    } else {
      out.push_back(criteria::markov_identical_necessary(model, spectrum, *two, gain));
    }
  } else if (name == "scalar") {
    const auto* two = markov_of(s);
    if (!two) throw NotApplicable{"needs a markov2 channel"};
    if (model.n() != 1 || model.m() != 1) throw NotApplicable{"needs scalar agents (n = m = 1)"};
    if (model.rho_a() < 1.0) throw NotApplicable{"needs |a| >= 1"};
    out.push_back(criteria::scalar_iff(model, spectrum, *two));
  } else if (name == "nonidentical") {
    const auto* edge = edge_of(s);
    if (!edge) throw NotApplicable{"needs a markov-edge channel"};
    const auto decomp = graph::edge_decomposition(s.topology, s.orientation, s.tree_rule);
    if (gain) {
      gain->check_shape(model);
      out.push_back(criteria::nonidentical_analysis(model, decomp, *edge, *gain));
    }
    criteria::KappaSearchOptions opts;
    opts.kappa_max = s.synthesis.kappa_max;
    opts.grid_points = s.synthesis.kappa_grid;
    out.push_back(criteria::nonidentical_kappa_synthesis(model, decomp, *edge, opts));
  } else {
    throw ValidationError("unknown theorem \"" + name + "\"");
  }
  return out;
}

bool certified(const criteria::Verdict& v) {
  return v.certificate.gain && (v.decision == criteria::Decision::Consensusable ||
                                v.decision == criteria::Decision::SufficientHolds);
}

}  // namespace

json analyze(const scenario::Scenario& s, const std::vector<std::string>& theorems,
             const std::optional<mjls::GainMatrix>& gain_override) {
  const auto spectrum = graph::laplacian_spectrum(s.topology);
  const auto gain = gain_override ? gain_override : s.gain;
  const bool all = std::find(theorems.begin(), theorems.end(), "all") != theorems.end();
  std::vector<std::string> names;
  if (all) {
    const auto& known = scenario::theorem_names();
    names.assign(known.begin() + 1, known.end());
  } else {
    names = theorems;
  }
  json verdicts = json::array();
  json skipped = json::array();
  for (const auto& name : names) {
    try {
      for (const auto& v : run_theorem(s, name, gain, spectrum)) verdicts.push_back(report::to_json(v));
    } catch (const NotApplicable& na) {
      if (!all) throw ValidationError("theorem \"" + name + "\": " + na.reason);
      skipped.push_back(json{{"theorem", name}, {"reason", na.reason}});
    }
  }
  return json{{"command", "analyze"},
              {"channel", channel_name(s)},
              {"model", model_json(s.model)},
              {"spectrum", report::to_json(spectrum)},
              {"verdicts", std::move(verdicts)},
              {"skipped", std::move(skipped)}};
}

Synthesis synthesize(const scenario::Scenario& s, const std::string& method_override) {
  const std::string method = method_override.empty() ? s.synthesis.method : method_override;
  const auto spectrum = graph::laplacian_spectrum(s.topology);
  const auto& model = s.model;
  std::vector<criteria::Verdict> verdicts;
  auto want = [&](const char* m) { return method == "auto" || method == m; };
  auto done = [&] { return !verdicts.empty() && certified(verdicts.back()); };

  if (const auto* iid = iid_of(s)) {
    if (!want("iid") && !want("analytic")) throw ValidationError("method \"" + method + "\" does not apply to iid channels");
    if (iid->fading) {
      if (model.m() != 1) throw ValidationError("fading synthesis needs a single-input agent");
      verdicts.push_back(criteria::iid_general_fading(model, spectrum, iid->mean(), iid->variance()));
    } else if (model.m() == 1 && want("iid")) {
      verdicts.push_back(criteria::iid_single_input(model, spectrum, iid->loss_rate));
    } else {
      verdicts.push_back(criteria::iid_analytic_sufficient(model, spectrum, iid->loss_rate));
    }
  } else if (const auto* two = markov_of(s)) {
    const bool scalar = model.n() == 1 && model.m() == 1 && model.rho_a() >= 1.0;
    if (method == "scalar" && !scalar) throw ValidationError("scalar synthesis needs n = m = 1 and |a| >= 1");
    if (method == "kappa" || method == "iid") {
      throw ValidationError("method \"" + method + "\" does not apply to markov2 channels");
    }
    if (scalar && want("scalar")) verdicts.push_back(criteria::scalar_iff(model, spectrum, *two));
    if (!done() && want("lmi")) {
      lmi::SolverOptions opts;
      opts.max_iterations = s.synthesis.lmi_max_iterations;
      verdicts.push_back(criteria::markov_identical_synthesis_lmi(model, spectrum, *two, opts));
    }
    if (!done() && want("analytic")) verdicts.push_back(criteria::markov_identical_analytic_sufficient(model, spectrum, *two));
  } else {
    if (!want("kappa")) throw ValidationError("method \"" + method + "\" does not apply to markov-edge channels");
    const auto decomp = graph::edge_decomposition(s.topology, s.orientation, s.tree_rule);
    criteria::KappaSearchOptions opts;
    opts.kappa_max = s.synthesis.kappa_max;
    opts.grid_points = s.synthesis.kappa_grid;
    verdicts.push_back(criteria::nonidentical_kappa_synthesis(model, decomp, *edge_of(s), opts));
  }

  Synthesis out;
  json list = json::array();
  json source = nullptr;
  for (const auto& v : verdicts) {
    list.push_back(report::to_json(v));
    if (!out.gain && certified(v)) {
      out.gain = mjls::GainMatrix(*v.certificate.gain);
      source = criteria::to_string(v.criterion);
    }
  }
  out.report = json{{"command", "synthesize"},
                    {"channel", channel_name(s)},
                    {"method", method},
                    {"gain", out.gain ? report::matrix_json(out.gain->matrix()) : json(nullptr)},
                    {"gain_source", source},
                    {"verdicts", std::move(list)}};
  return out;
}

json gamma_c(const scenario::Scenario& s) {
  return json{{"command", "gamma-c"}, {"model", model_json(s.model)}, {"critical_value", report::to_json(riccati::gamma_c(s.model))}};
}

Simulation simulate(const scenario::Scenario& s, const std::optional<mjls::GainMatrix>& gain_override,
                    const std::string& form_override) {
  std::optional<mjls::GainMatrix> gain = gain_override ? gain_override : s.gain;
  std::string source = gain_override ? "argument" : "scenario";
  json synthesis = nullptr;
  if (!gain) {
    auto syn = synthesize(s);
    if (!syn.gain) throw PreconditionError("no gain supplied and synthesis did not certify one");
    gain = syn.gain;
    source = "synthesized";
    synthesis = std::move(syn.report);
  }
  std::string form = form_override.empty() ? s.simulation.form : form_override;
  if (form == "auto") form = edge_of(s) ? "edge" : "vertex";
  if (form != "vertex" && form != "edge") throw ValidationError("simulation form must be vertex, edge or auto");

  const auto scenario = scenario::to_sim(s, *gain);
  Simulation out{form == "edge" ? sim::simulate_edge(scenario) : sim::simulate(scenario), nullptr};
  out.summary = report::summary_json(out.result);
  out.summary["command"] = "simulate";
  out.summary["gain"] = report::matrix_json(gain->matrix());
  out.summary["gain_source"] = source;
  out.summary["synthesis"] = std::move(synthesis);
  return out;
}

}  // namespace consensus_kit::commands
