// consensus-kit: mean-square consensusability analysis, gain synthesis and
// Monte Carlo simulation over lossy channels.
//
// Exit status: 0 when the command ran (whatever the verdict), 2 for invalid
// input, 1 for internal failures.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "consensus_kit/commands.hpp"
#include "consensus_kit/report.hpp"
#include "consensus_kit/scenario.hpp"

namespace ck = consensus_kit;

namespace {

void emit(const nlohmann::json& j, const std::string& path) {
  const std::string text = ck::report::dump(j);
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ck::ValidationError(path + ": cannot write file");
  out << text;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ck::ValidationError(path + ": cannot write file");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-square consensusability of linear multi-agent systems over lossy channels"};
  app.require_subcommand(1);

  std::string scenario_path, gain_path, out_path, csv_path, summary_path, method, form;
  std::vector<std::string> theorems;
  std::optional<int> runs, horizon, initial_state;
  std::optional<std::uint64_t> seed;

  auto* analyze = app.add_subcommand("analyze", "Run consensusability tests and print a JSON report");
  analyze->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  analyze->add_option("--theorem", theorems, "Test(s) to run: all, iid, markov-iff, markov-lmi, markov-analytic, "
                                             "necessary, scalar, nonidentical")
      ->check(CLI::IsMember(ck::scenario::theorem_names()));
  analyze->add_option("--gain", gain_path, "Gain JSON file (array of rows or {\"K\": ...})");
  analyze->add_option("--out", out_path, "Write the report here instead of stdout");

  auto* synth = app.add_subcommand("synthesize", "Construct a consensus gain and report its certificate");
  synth->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  synth->add_option("--method", method, "auto, lmi, analytic, scalar, iid or kappa")
      ->check(CLI::IsMember({"auto", "lmi", "analytic", "scalar", "iid", "kappa"}));
  synth->add_option("--out", out_path, "Write the report here instead of stdout");

  auto* gamma = app.add_subcommand("gamma-c", "Critical value of the modified Riccati inequality for (A, B)");
  gamma->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  gamma->add_option("--out", out_path, "Write the report here instead of stdout");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo mean-square consensus error");
  simulate->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  simulate->add_option("--gain", gain_path, "Gain JSON file; default: scenario gain, else synthesized");
  simulate->add_option("--csv", csv_path, "CSV output: t, mse_total, mse_agent_1..N");
  simulate->add_option("--summary", summary_path, "JSON summary output (default stdout)");
  simulate->add_option("--form", form, "vertex, edge or auto")->check(CLI::IsMember({"auto", "vertex", "edge"}));
  simulate->add_option("--runs", runs, "Override simulation.runs")->check(CLI::PositiveNumber);
  simulate->add_option("--horizon", horizon, "Override simulation.horizon")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Override simulation.seed");
  simulate->add_option("--initial-state", initial_state, "Force the initial Markov channel state (0-based)")
      ->check(CLI::NonNegativeNumber);

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("version")) {
      std::cout << "consensus-kit " << ck::commands::kVersion << "\n";
      return 0;
    }
    auto scenario = ck::scenario::load(scenario_path);
    std::optional<ck::mjls::GainMatrix> gain;
    if (!gain_path.empty()) {
      gain = ck::scenario::load_gain(gain_path);
      gain->check_shape(scenario.model);
    }

    if (app.got_subcommand(analyze)) {
      emit(ck::commands::analyze(scenario, theorems.empty() ? scenario.theorems : theorems, gain), out_path);
    } else if (app.got_subcommand(synth)) {
      emit(ck::commands::synthesize(scenario, method).report, out_path);
    } else if (app.got_subcommand(gamma)) {
      emit(ck::commands::gamma_c(scenario), out_path);
    } else if (app.got_subcommand(simulate)) {
      if (runs) scenario.simulation.runs = *runs;
      if (horizon) scenario.simulation.horizon = *horizon;
      if (seed) scenario.simulation.seed = *seed;
      if (initial_state) scenario.channel_initial.fixed_state = *initial_state;
      const auto sim = ck::commands::simulate(scenario, gain, form);
      if (!csv_path.empty()) write_text(csv_path, ck::sim::to_csv(sim.result));
      emit(sim.summary, summary_path);
    }
    return 0;
  } catch (const std::invalid_argument& e) {  // ValidationError, DimensionMismatch
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {  // NotConnected, PreconditionError
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::length_error& e) {  // SizeLimitExceeded
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
