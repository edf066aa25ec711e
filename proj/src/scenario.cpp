#include "consensus_kit/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace consensus_kit::scenario {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

void require_object(const json& v, const std::string& where) {
  if (!v.is_object()) fail(where, "expected an object");
}

// Rejects any key outside `allowed`, naming all offenders.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  std::vector<std::string> unknown;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      unknown.push_back(it.key());
    }
  }
  if (unknown.empty()) return;
  std::string msg = "unknown key";
  msg += unknown.size() > 1 ? "s " : " ";
  for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", \"" : "\"") + unknown[i] + "\"";
  fail(where, msg);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing required key \"") + key + "\"");
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where, "expected a finite number");
  return x;
}

int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected a string");
  return v.get<std::string>();
}

std::string at(const std::string& where, const char* key) { return where + "." + key; }
std::string at(const std::string& where, int i) { return where + "[" + std::to_string(i) + "]"; }
std::string at(const std::string& where, std::size_t i) { return where + "[" + std::to_string(i) + "]"; }

channel::ChannelModel parse_channel(const json& c, const std::string& where,
                                    channel::InitialRule& initial, int edge_count) {
  require_object(c, where);
  const std::string type = as_string(require(c, "type", where), at(where, "type"));
  if (auto it = c.find("initial_state"); it != c.end()) {
    initial.fixed_state = as_int(*it, at(where, "initial_state"));
  }
  try {
    if (type == "iid") {
      if (c.contains("mean") || c.contains("variance")) {
        check_keys(c, where, {"type", "mean", "variance"});
        return channel::IidChannel::with_moments(as_number(require(c, "mean", where), at(where, "mean")),
                                                 as_number(require(c, "variance", where), at(where, "variance")));
      }
      check_keys(c, where, {"type", "p"});
      return channel::IidChannel::bernoulli(as_number(require(c, "p", where), at(where, "p")));
    }
    if (type == "markov2") {
      check_keys(c, where, {"type", "p", "q", "initial_state"});
      return channel::TwoStateChannel::make(as_number(require(c, "p", where), at(where, "p")),
                                            as_number(require(c, "q", where), at(where, "q")));
    }
    if (type == "markov-edge") {
      check_keys(c, where, {"type", "states", "Q", "initial_state"});
      const json& states = require(c, "states", where);
      const std::string sw = at(where, "states");
      if (!states.is_array() || states.empty()) fail(sw, "expected a non-empty array of 0/1 rows");
      std::vector<std::vector<int>> rows;
      for (std::size_t i = 0; i < states.size(); ++i) {
        if (!states[i].is_array()) fail(at(sw, i), "expected an array");
        std::vector<int> row;
        for (std::size_t j = 0; j < states[i].size(); ++j) row.push_back(as_int(states[i][j], at(at(sw, i), j)));
        rows.push_back(std::move(row));
      }
      const Matrix Q = parse_matrix(require(c, "Q", where), at(where, "Q"));
      return channel::EdgeChannel::make(edge_count, std::move(rows), Q);
    }
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind("$", 0) == 0) throw;
    fail(where, msg);
  } catch (const DimensionMismatch& e) {
    fail(where, e.what());
  }
  fail(at(where, "type"), "unknown channel type \"" + type + "\" (expected iid, markov2 or markov-edge)");
}

}  // namespace

const std::vector<std::string>& theorem_names() {
  static const std::vector<std::string> names{"all",           "iid",       "markov-iff", "markov-lmi",
                                              "markov-analytic", "necessary", "scalar",     "nonidentical"};
  return names;
}

Matrix parse_matrix(const json& value, const std::string& where) {
  if (!value.is_array() || value.empty()) fail(where, "expected a non-empty array of rows");
  const std::size_t rows = value.size();
  std::size_t cols = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!value[i].is_array() || value[i].empty()) fail(at(where, i), "expected a non-empty row array");
    if (i == 0) cols = value[i].size();
    if (value[i].size() != cols) {
      fail(at(where, i), "row has " + std::to_string(value[i].size()) + " entries, expected " + std::to_string(cols));
    }
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = as_number(value[i][j], at(at(where, i), j));
  return m;
}

Scenario parse(const json& doc) {
  const std::string root = "$";
  require_object(doc, root);
  check_keys(doc, root, {"model", "topology", "channel", "gain", "analysis", "synthesis", "simulation"});

  const json& m = require(doc, "model", root);
  const std::string mw = at(root, "model");
  require_object(m, mw);
  check_keys(m, mw, {"A", "B"});
  const Matrix A = parse_matrix(require(m, "A", mw), at(mw, "A"));
  const Matrix B = parse_matrix(require(m, "B", mw), at(mw, "B"));
  std::optional<mjls::AgentModel> model;
  try {
    model = mjls::AgentModel::make(A, B);
  } catch (const std::invalid_argument& e) {
    fail(mw, e.what());
  }

  const json& t = require(doc, "topology", root);
  const std::string tw = at(root, "topology");
  require_object(t, tw);
  check_keys(t, tw, {"n", "edges", "reversed_edges", "tree_rule"});
  const int n = as_int(require(t, "n", tw), at(tw, "n"));
  const json& edges = require(t, "edges", tw);
  const std::string ew = at(tw, "edges");
  if (!edges.is_array()) fail(ew, "expected an array of [u, v] pairs");
  std::vector<graph::Edge> edge_list;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!edges[i].is_array() || edges[i].size() != 2) fail(at(ew, i), "expected a [u, v] pair");
    edge_list.push_back({as_int(edges[i][0], at(at(ew, i), 0)), as_int(edges[i][1], at(at(ew, i), 1))});
  }
  std::optional<graph::Topology> topology;
  try {
    topology = graph::Topology::build(n, edge_list);
  } catch (const ValidationError& e) {
    fail(tw, e.what());
  }
  graph::OrientationRule orientation;
  if (auto it = t.find("reversed_edges"); it != t.end()) {
    const std::string rw = at(tw, "reversed_edges");
    if (!it->is_array()) fail(rw, "expected an array of 1-based edge indices");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const int k = as_int((*it)[i], at(rw, i));
      if (k < 1 || k > topology->edge_count()) fail(at(rw, i), "edge index out of range");
      orientation.reversed_edges.push_back(k - 1);
    }
  }
  graph::TreeRule tree_rule = graph::TreeRule::BreadthFirst;
  if (auto it = t.find("tree_rule"); it != t.end()) {
    const std::string r = as_string(*it, at(tw, "tree_rule"));
    if (r == "breadth-first") {
      tree_rule = graph::TreeRule::BreadthFirst;
    } else if (r == "first-fit") {
      tree_rule = graph::TreeRule::FirstFit;
    } else {
      fail(at(tw, "tree_rule"), "expected \"breadth-first\" or \"first-fit\"");
    }
  }

  channel::InitialRule initial;
  auto channel = parse_channel(require(doc, "channel", root), at(root, "channel"), initial, topology->edge_count());

  std::optional<mjls::GainMatrix> gain;
  if (auto it = doc.find("gain"); it != doc.end()) {
    try {
      gain = mjls::GainMatrix(parse_matrix(*it, at(root, "gain")));
      gain->check_shape(*model);
    } catch (const DimensionMismatch& e) {
      fail(at(root, "gain"), e.what());
    }
  }

  Scenario s{*model, *topology, orientation, tree_rule, std::move(channel), initial, gain, {"all"}, {}, {}};

  if (auto it = doc.find("analysis"); it != doc.end()) {
    const std::string aw = at(root, "analysis");
    require_object(*it, aw);
    check_keys(*it, aw, {"theorems"});
    if (auto th = it->find("theorems"); th != it->end()) {
      const std::string thw = at(aw, "theorems");
      if (!th->is_array() || th->empty()) fail(thw, "expected a non-empty array of theorem names");
      s.theorems.clear();
      for (std::size_t i = 0; i < th->size(); ++i) {
        const std::string name = as_string((*th)[i], at(thw, i));
        const auto& names = theorem_names();
        if (std::find(names.begin(), names.end(), name) == names.end()) fail(at(thw, i), "unknown theorem \"" + name + "\"");
        s.theorems.push_back(name);
      }
    }
  }

  if (auto it = doc.find("synthesis"); it != doc.end()) {
    const std::string sw = at(root, "synthesis");
    require_object(*it, sw);
    check_keys(*it, sw, {"method", "lmi_max_iterations", "kappa_max", "kappa_grid"});
    if (auto v = it->find("method"); v != it->end()) {
      s.synthesis.method = as_string(*v, at(sw, "method"));
      static const std::set<std::string> methods{"auto", "lmi", "analytic", "scalar", "iid", "kappa"};
      if (!methods.count(s.synthesis.method)) fail(at(sw, "method"), "unknown synthesis method");
    }
    if (auto v = it->find("lmi_max_iterations"); v != it->end()) {
      s.synthesis.lmi_max_iterations = as_int(*v, at(sw, "lmi_max_iterations"));
      if (s.synthesis.lmi_max_iterations < 1) fail(at(sw, "lmi_max_iterations"), "must be positive");
    }
    if (auto v = it->find("kappa_max"); v != it->end()) {
      s.synthesis.kappa_max = as_number(*v, at(sw, "kappa_max"));
      if (!(*s.synthesis.kappa_max > 0.0)) fail(at(sw, "kappa_max"), "must be positive");
    }
    if (auto v = it->find("kappa_grid"); v != it->end()) {
      s.synthesis.kappa_grid = as_int(*v, at(sw, "kappa_grid"));
      if (s.synthesis.kappa_grid < 3) fail(at(sw, "kappa_grid"), "must be at least 3");
    }
  }

  if (auto it = doc.find("simulation"); it != doc.end()) {
    const std::string sw = at(root, "simulation");
    require_object(*it, sw);
    check_keys(*it, sw, {"horizon", "runs", "seed", "init_box", "form", "exclude_diverged"});
    auto& o = s.simulation;
    if (auto v = it->find("horizon"); v != it->end()) {
      o.horizon = as_int(*v, at(sw, "horizon"));
      if (o.horizon < 1) fail(at(sw, "horizon"), "must be at least 1");
    }
    if (auto v = it->find("runs"); v != it->end()) {
      o.runs = as_int(*v, at(sw, "runs"));
      if (o.runs < 1) fail(at(sw, "runs"), "must be at least 1");
    }
    if (auto v = it->find("seed"); v != it->end()) {
      const bool ok = v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0);
      if (!ok) fail(at(sw, "seed"), "expected a non-negative integer");
      o.seed = v->get<std::uint64_t>();
    }
    if (auto v = it->find("init_box"); v != it->end()) {
      const std::string bw = at(sw, "init_box");
      if (!v->is_array() || v->size() != 2) fail(bw, "expected [lo, hi]");
      o.init.lo = as_number((*v)[0], at(bw, 0));
      o.init.hi = as_number((*v)[1], at(bw, 1));
      if (!(o.init.lo <= o.init.hi)) fail(bw, "needs lo <= hi");
    }
    if (auto v = it->find("form"); v != it->end()) {
      o.form = as_string(*v, at(sw, "form"));
      if (o.form != "auto" && o.form != "vertex" && o.form != "edge") {
        fail(at(sw, "form"), "expected \"auto\", \"vertex\" or \"edge\"");
      }
    }
    if (auto v = it->find("exclude_diverged"); v != it->end()) {
      if (!v->is_boolean()) fail(at(sw, "exclude_diverged"), "expected true or false");
      o.exclude_diverged = v->get<bool>();
    }
  }
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json parse_text(const std::string& text, const std::string& path) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
}

}  // namespace

Scenario load(const std::string& path) {
  const json doc = parse_text(read_file(path), path);
  try {
    return parse(doc);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

mjls::GainMatrix load_gain(const std::string& path) {
  const json doc = parse_text(read_file(path), path);
  try {
    if (doc.is_object()) {
      check_keys(doc, "$", {"K"});
      return mjls::GainMatrix(parse_matrix(require(doc, "K", "$"), "$.K"));
    }
    return mjls::GainMatrix(parse_matrix(doc, "$"));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

sim::SimScenario to_sim(const Scenario& s, const mjls::GainMatrix& gain) {
  return sim::SimScenario{.model = s.model,
                          .topology = s.topology,
                          .channel = s.channel,
                          .gain = gain,
                          .horizon = s.simulation.horizon,
                          .runs = s.simulation.runs,
                          .seed = s.simulation.seed,
                          .init = s.simulation.init,
                          .channel_initial = s.channel_initial,
                          .orientation = s.orientation,
                          .tree_rule = s.tree_rule,
                          .exclude_diverged = s.simulation.exclude_diverged};
}

}  // namespace consensus_kit::scenario
