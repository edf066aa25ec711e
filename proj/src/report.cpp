#include "consensus_kit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace consensus_kit::report {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const criteria::Verdict& v) {
  json cert = json::object();
  cert["gain"] = v.certificate.gain ? matrix_json(*v.certificate.gain) : json(nullptr);
  json lyap = json::array();
  for (const auto& P : v.certificate.lyapunov) lyap.push_back(matrix_json(P));
  cert["lyapunov"] = std::move(lyap);
  cert["radii"] = v.certificate.radii;
  cert["scalars"] = json::object();
  for (const auto& [k, x] : v.certificate.scalars) cert["scalars"][k] = x;
  json curve = json::array();
  for (const auto& [k, g] : v.certificate.kappa_curve) curve.push_back({k, g});
  cert["kappa_curve"] = std::move(curve);
  return json{{"criterion", criteria::to_string(v.criterion)},
              {"decision", criteria::to_string(v.decision)},
              {"boundary", v.boundary},
              {"detail", v.detail},
              {"certificate", std::move(cert)}};
}

json to_json(const graph::SpectrumSummary& s) {
  std::vector<double> eig(s.eigenvalues.data(), s.eigenvalues.data() + s.eigenvalues.size());
  return json{{"eigenvalues", eig}, {"lambda2", s.lambda2}, {"lambdaN", s.lambdaN}, {"c", s.c}};
}

json to_json(const riccati::CriticalValue& cv) {
  return json{{"gamma_c", cv.gamma_c},
              {"method", riccati::to_string(cv.method)},
              {"lower", cv.lower},
              {"upper", cv.upper},
              {"bracket_width", cv.bracket_width}};
}

json summary_json(const sim::SimResult& r) {
  return json{{"form", r.form},
              {"horizon", static_cast<int>(r.mse_total.size()) - 1},
              {"runs", r.run_seeds.size()},
              {"averaged_runs", r.averaged_runs},
              {"diverged_runs", r.diverged_runs},
              {"decay_ratio", r.decay_ratio},
              {"mse_total_initial", r.mse_total.front()},
              {"mse_total_final", r.mse_total.back()},
              {"seed", r.seed},
              {"run_seeds", r.run_seeds}};
}

namespace {

void write(const json& j, std::string& out, int indent) {
  const std::string pad(indent + 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        write(it.value(), out, indent + 2);
      }
      out += "\n" + std::string(indent, ' ') + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      out += flat ? "[" : "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",\n";
        first = false;
        if (!flat) out += pad;
        write(e, out, indent + 2);
      }
      out += flat ? "]" : "\n" + std::string(indent, ' ') + "]";
      return;
    }
    case json::value_t::number_float: {
      const double x = j.get<double>();
      if (!std::isfinite(x)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump(const json& j) {
  std::string out;
  write(j, out, 0);
  out += '\n';
  return out;
}

}  // namespace consensus_kit::report
