#include "varsim/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace varsim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

double scaled_value(const json& obj, const char* plain, const char* kilo,
                    const std::string& ctx) {
  const bool has_plain = obj.contains(plain);
  const bool has_kilo = obj.contains(kilo);
  if (has_plain && has_kilo) {
    throw ValidationError(ctx + ": give exactly one of " + plain + " and " +
                          kilo);
  }
  if (has_plain) return obj.at(plain).get<double>();
  if (has_kilo) return obj.at(kilo).get<double>() * 1000.0;
  throw ValidationError(ctx + ": missing " + plain + " (or " + kilo + ")");
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

double band(const Eigen::VectorXd& v, double mu) {
  return v.size() == 0 ? 0.0 : (v.array() - mu).abs().maxCoeff();
}

// Per-node ratings and injections from the document, densified to 1..n.
void collect_node_data(const ScenarioDoc& doc, int n, Eigen::VectorXd& p,
                       Eigen::VectorXd& s_bar, Eigen::VectorXd& p_tilde) {
  p = Eigen::VectorXd::Zero(n);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const auto& [node, watts] : doc.loads_w) {
    if (node < 1 || node > n) {
      throw ValidationError("loads: unknown node " + std::to_string(node));
    }
    if (seen[static_cast<std::size_t>(node - 1)]) {
      throw ValidationError("loads: duplicate node " + std::to_string(node));
    }
    seen[static_cast<std::size_t>(node - 1)] = true;
    p(node - 1) = watts;
  }

  s_bar.resize(n);
  seen.assign(static_cast<std::size_t>(n), false);
  for (const auto& [node, va] : doc.inverters_va) {
    if (node < 1 || node > n) {
      throw ValidationError("inverters: unknown node " + std::to_string(node));
    }
    if (seen[static_cast<std::size_t>(node - 1)]) {
      throw ValidationError("inverters: duplicate node " +
                            std::to_string(node));
    }
    seen[static_cast<std::size_t>(node - 1)] = true;
    s_bar(node - 1) = va;
  }
  for (int i = 0; i < n; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) {
      throw ValidationError("inverters: missing rating for node " +
                            std::to_string(i + 1));
    }
  }

  p_tilde = p.cwiseAbs();
  seen.assign(static_cast<std::size_t>(n), false);
  for (const auto& [node, watts] : doc.p_tilde_w) {
    if (node < 1 || node > n) {
      throw ValidationError("inverters: unknown p_tilde node " +
                            std::to_string(node));
    }
    if (seen[static_cast<std::size_t>(node - 1)]) {
      throw ValidationError("inverters: duplicate p_tilde for node " +
                            std::to_string(node));
    }
    seen[static_cast<std::size_t>(node - 1)] = true;
    p_tilde(node - 1) = watts;
  }
}

}  // namespace

ScenarioDoc parse_scenario_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }

  ScenarioDoc doc;
  try {
    const json& f = j.at("feeder");
    if (f.contains("substation") && f.at("substation").get<int>() != 0) {
      throw ValidationError("feeder.substation: must be node 0");
    }
    for (const json& e : f.at("edges")) {
      RawEdge re;
      re.a = e.at("from").get<int>();
      re.b = e.at("to").get<int>();
      re.r_ohm = e.at("r_ohm").get<double>();
      re.x_ohm = e.at("x_ohm").get<double>();
      doc.edges.push_back(re);
    }

    for (const json& e : j.at("inverters")) {
      const int node = e.at("node").get<int>();
      doc.inverters_va.emplace_back(
          node, scaled_value(e, "s_bar_va", "s_bar_kva", "inverters"));
      if (e.contains("p_tilde_w") || e.contains("p_tilde_kw")) {
        doc.p_tilde_w.emplace_back(
            node, scaled_value(e, "p_tilde_w", "p_tilde_kw", "inverters"));
      }
    }

    for (const json& e : j.at("loads")) {
      doc.loads_w.emplace_back(e.at("node").get<int>(),
                               scaled_value(e, "p_w", "p_kw", "loads"));
    }

    const json& v = j.at("voltage");
    doc.v0_volt = v.at("v0_volt").get<double>();
    doc.mu_volt = v.at("mu_volt").get<double>();

    if (j.contains("solver")) {
      const json& s = j.at("solver");
      if (s.contains("alpha")) doc.alpha = s.at("alpha").get<double>();
      if (s.contains("tau_var") || s.contains("tau_kvar")) {
        doc.tau_var = scaled_value(s, "tau_var", "tau_kvar", "solver");
      }
      doc.window = s.value("window", doc.window);
      doc.max_iterations = s.value("max_iterations", doc.max_iterations);
    }
    if (!(doc.tau_var > 0.0)) {
      throw ValidationError("solver.tau: must be positive");
    }
    if (doc.window < 1) throw ValidationError("solver.window: must be >= 1");
    if (doc.max_iterations < 0) {
      throw ValidationError("solver.max_iterations: must be >= 0");
    }
    if (doc.alpha && !(*doc.alpha > 0.0)) {
      throw ValidationError("solver.alpha: must be positive");
    }

    if (j.contains("attack")) {
      const json& a = j.at("attack");
      AttackSpec atk;
      atk.attacker = a.at("node").get<int>();
      atk.start_iteration = a.at("start_iteration").get<int>();
      if (atk.start_iteration < 1) {
        throw ValidationError("attack.start_iteration: must be >= 1");
      }
      atk.offset_up = a.value("offset_up", 0.0);
      atk.offset_lo = a.value("offset_lo", 0.0);
      atk.tamper_internal = a.value("tamper_internal", false);
      doc.attack = atk;
    }

    if (j.contains("output")) {
      const json& o = j.at("output");
      doc.trace_csv = o.value("trace_csv", std::string());
      doc.summary_json = o.value("summary_json", std::string());
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  return doc;
}

ScenarioDoc load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read scenario: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

std::string serialize_scenario(const ScenarioDoc& doc) {
  ordered_json j;
  j["feeder"]["substation"] = 0;
  j["feeder"]["edges"] = ordered_json::array();
  for (const RawEdge& e : doc.edges) {
    j["feeder"]["edges"].push_back(
        {{"from", e.a}, {"to", e.b}, {"r_ohm", e.r_ohm}, {"x_ohm", e.x_ohm}});
  }
  j["inverters"] = ordered_json::array();
  for (const auto& [node, va] : doc.inverters_va) {
    ordered_json inv{{"node", node}, {"s_bar_va", va}};
    for (const auto& [pt_node, pt] : doc.p_tilde_w) {
      if (pt_node == node) inv["p_tilde_w"] = pt;
    }
    j["inverters"].push_back(inv);
  }
  j["loads"] = ordered_json::array();
  for (const auto& [node, w] : doc.loads_w) {
    j["loads"].push_back({{"node", node}, {"p_w", w}});
  }
  j["voltage"] = {{"v0_volt", doc.v0_volt}, {"mu_volt", doc.mu_volt}};
  if (doc.alpha) j["solver"]["alpha"] = *doc.alpha;
  j["solver"]["tau_var"] = doc.tau_var;
  j["solver"]["window"] = doc.window;
  j["solver"]["max_iterations"] = doc.max_iterations;
  if (doc.attack) {
    j["attack"] = {{"node", doc.attack->attacker},
                   {"start_iteration", doc.attack->start_iteration},
                   {"offset_up", doc.attack->offset_up},
                   {"offset_lo", doc.attack->offset_lo},
                   {"tamper_internal", doc.attack->tamper_internal}};
  }
  if (!doc.trace_csv.empty() || !doc.summary_json.empty()) {
    if (!doc.trace_csv.empty()) j["output"]["trace_csv"] = doc.trace_csv;
    if (!doc.summary_json.empty()) {
      j["output"]["summary_json"] = doc.summary_json;
    }
  }
  return j.dump(2) + "\n";
}

SimulationConfig build_config(const ScenarioDoc& doc) {
  SimulationConfig cfg;
  cfg.feeder = parse_feeder(doc.edges);
  const int n = cfg.feeder.node_count;
  cfg.mats = build_grid_matrices(cfg.feeder, doc.alpha);

  Eigen::VectorXd s_bar, p_tilde;
  collect_node_data(doc, n, cfg.p, s_bar, p_tilde);
  cfg.bounds.Q.resize(n);
  for (int i = 0; i < n; ++i) {
    cfg.bounds.Q(i) = reactive_capability(InverterSpec{s_bar(i), p_tilde(i)});
  }

  cfg.v0 = doc.v0_volt;
  cfg.mu = doc.mu_volt;
  cfg.stop.tau = doc.tau_var;
  cfg.stop.window = doc.window;
  cfg.stop.max_iterations = doc.max_iterations;
  if (doc.attack) {
    if (doc.attack->attacker < 1 || doc.attack->attacker > n) {
      throw ValidationError("attack: unknown node " +
                            std::to_string(doc.attack->attacker));
    }
    cfg.attack = doc.attack;
  }
  return cfg;
}

void write_trace_csv(const std::string& path, const SimulationTrace& trace) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw ValidationError("cannot write trace: " + path);
  std::fputs(
      "iteration,node,q_var,v_volt,lambda_up,lambda_lo,theta_up,theta_lo,"
      "omega\n",
      f);
  char buf[512];
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const SimulationRecord& r = trace.records[k];
    for (int i = 0; i < r.q.size(); ++i) {
      std::snprintf(buf, sizeof buf,
                    "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    k + 1, i + 1, r.q(i), r.v(i), r.lambda_up(i),
                    r.lambda_lo(i), r.theta_up(i), r.theta_lo(i), r.omega);
      std::fputs(buf, f);
    }
  }
  std::fclose(f);
}

std::string make_summary(const SimulationConfig& cfg,
                         const SimulationTrace& trace,
                         const std::vector<AgentState>& agents) {
  ordered_json j;
  if (trace.converged_at) {
    j["converged_at"] = *trace.converged_at;
  } else {
    j["converged_at"] = nullptr;
  }
  j["stop_reason"] = trace.stop_reason;
  j["iterations"] = trace.records.size();
  j["alpha"] = cfg.mats.alpha;
  j["tau_var"] = cfg.stop.tau;
  j["window"] = cfg.stop.window;
  j["node_count"] = cfg.feeder.node_count;

  if (!trace.records.empty()) {
    const SimulationRecord& last = trace.records.back();
    j["q_var"] = to_std(last.q);
    j["q_cap_var"] = to_std(cfg.bounds.Q);
    j["v_volt"] = to_std(last.v);
    j["max_v_dev_volt"] = band(last.v, cfg.mu);
    j["lambda_up"] = to_std(last.lambda_up);
    j["lambda_lo"] = to_std(last.lambda_lo);
    std::vector<double> views;
    views.reserve(agents.size());
    for (const AgentState& a : agents) views.push_back(a.q);
    j["agent_q_view_var"] = views;

    const DualPoint d{last.lambda_up / 1000.0, last.lambda_lo / 1000.0};
    const QpBounds kb{cfg.bounds.Q / 1000.0};
    const KktReport rep =
        kkt_residuals(cfg.mats, last.q / 1000.0, d, cfg.p / 1000.0, kb);
    j["kkt"]["primal_violation_kvar"] = rep.primal_violation;
    j["kkt"]["stationarity_residual"] = rep.stationarity_residual;
    j["kkt"]["comp_slack_up"] = rep.comp_slack_up;
    j["kkt"]["comp_slack_lo"] = rep.comp_slack_lo;
  }

  if (cfg.attack) {
    const AttackSpec& a = *cfg.attack;
    j["attack"]["node"] = a.attacker;
    j["attack"]["start_iteration"] = a.start_iteration;
    j["attack"]["offset_up"] = a.offset_up;
    j["attack"]["offset_lo"] = a.offset_lo;
    j["attack"]["tamper_internal"] = a.tamper_internal;
    const int idx = a.start_iteration - 2;
    if (idx >= 0 && idx < static_cast<int>(trace.records.size())) {
      j["attack"]["pre_attack_band_volt"] =
          band(trace.records[static_cast<std::size_t>(idx)].v, cfg.mu);
    } else {
      j["attack"]["pre_attack_band_volt"] = nullptr;
    }
  }
  return j.dump(2) + "\n";
}

namespace {

double probe_offset(const SimulationConfig& base, const AttackSpec& proto,
                    int node, double offset, int& evaluations) {
  SimulationConfig cfg = base;
  AttackSpec atk = proto;
  atk.attacker = node;
  atk.offset_up = offset;
  atk.offset_lo = 0.0;
  cfg.attack = atk;
  const SimulationTrace tr = run_simulation(cfg);
  ++evaluations;
  if (tr.records.empty()) {
    throw ValidationError("search: simulation produced no iterations");
  }
  return tr.records.back().q(node - 1);
}

}  // namespace

OffsetSearchResult search_attack_offset(const SimulationConfig& cfg, int node,
                                        double target_q_var) {
  if (node < 1 || node > cfg.feeder.node_count) {
    throw ValidationError("search: node " + std::to_string(node) +
                          " out of range");
  }
  const AttackSpec proto =
      cfg.attack ? *cfg.attack : AttackSpec{node, 1500, 0.0, 0.0, false};
  const double stop_tol = 25.0;
  const double success_tol = 50.0;

  OffsetSearchResult res;
  const double q0 = probe_offset(cfg, proto, node, 0.0, res.evaluations);
  res.offset = 0.0;
  res.achieved_q = q0;
  double best_err = std::abs(q0 - target_q_var);
  if (best_err <= success_tol) {
    res.success = true;
    return res;
  }
  auto note = [&](double offset, double q) {
    const double err = std::abs(q - target_q_var);
    if (err < best_err) {
      best_err = err;
      res.offset = offset;
      res.achieved_q = q;
    }
  };

  const double side0 = q0 >= target_q_var ? 1.0 : -1.0;
  bool bracketed = false;
  double lo = 0.0;
  double hi = 0.0;
  for (const double dir : {1.0, -1.0}) {
    lo = 0.0;
    hi = dir * 1000.0;
    while (std::abs(hi) <= 1.0e6) {
      const double qh = probe_offset(cfg, proto, node, hi, res.evaluations);
      note(hi, qh);
      if ((qh >= target_q_var ? 1.0 : -1.0) != side0) {
        bracketed = true;
        break;
      }
      lo = hi;
      hi *= 2.0;
    }
    if (bracketed) break;
  }

  if (bracketed) {
    for (int it = 0;
         it < 60 && best_err > stop_tol && std::abs(hi - lo) > 1e-6; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double qm = probe_offset(cfg, proto, node, mid, res.evaluations);
      note(mid, qm);
      if ((qm >= target_q_var ? 1.0 : -1.0) == side0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
  }
  res.success = best_err <= success_tol;
  return res;
}

TraceData read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read trace: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line !=
          "iteration,node,q_var,v_volt,lambda_up,lambda_lo,theta_up,theta_lo,"
          "omega") {
    throw ValidationError("trace: missing or unexpected header");
  }

  TraceData td;
  std::vector<double> qrow, vrow;
  int cur_iter = 0;
  auto flush = [&]() {
    if (qrow.empty()) return;
    if (td.node_count == 0) {
      td.node_count = static_cast<int>(qrow.size());
    } else if (static_cast<int>(qrow.size()) != td.node_count) {
      throw ValidationError("trace: truncated iteration block");
    }
    td.q.push_back(Eigen::Map<Eigen::VectorXd>(qrow.data(),
                                               static_cast<int>(qrow.size())));
    td.v.push_back(Eigen::Map<Eigen::VectorXd>(vrow.data(),
                                               static_cast<int>(vrow.size())));
    qrow.clear();
    vrow.clear();
  };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int iter = 0, node = 0;
    double q, v, lu, ll, tu, tl, om;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &iter,
                    &node, &q, &v, &lu, &ll, &tu, &tl, &om) != 9) {
      throw ValidationError("trace: malformed row: " + line);
    }
    if (iter != cur_iter) {
      if (iter != cur_iter + 1) {
        throw ValidationError("trace: iterations out of order at row: " + line);
      }
      flush();
      cur_iter = iter;
    }
    if (node != static_cast<int>(qrow.size()) + 1) {
      throw ValidationError("trace: nodes out of order at row: " + line);
    }
    qrow.push_back(q);
    vrow.push_back(v);
  }
  flush();
  return td;
}

std::string summarize_trace(const TraceData& td, double tau, int window,
                            double mu,
                            const std::optional<ScenarioDoc>& scenario) {
  const int n = td.node_count;
  const int steps = static_cast<int>(td.q.size());
  ordered_json j;
  j["iterations"] = steps;
  j["node_count"] = n;

  int streak = 0;
  std::optional<int> fired;
  for (int k = 1; k < steps && !fired; ++k) {
    const double d = (td.q[static_cast<std::size_t>(k)] -
                      td.q[static_cast<std::size_t>(k - 1)])
                         .cwiseAbs()
                         .maxCoeff();
    if (d <= tau) {
      if (++streak >= window) fired = k + 1;
    } else {
      streak = 0;
    }
  }
  if (fired) {
    j["converged_at"] = *fired;
  } else {
    j["converged_at"] = nullptr;
  }

  std::vector<ordered_json> settle(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int last_bad = 0;
    for (int k = 1; k < steps; ++k) {
      const double d = std::abs(td.q[static_cast<std::size_t>(k)](i) -
                                td.q[static_cast<std::size_t>(k - 1)](i));
      if (d > tau) last_bad = k + 1;
    }
    if (last_bad + 1 <= steps) {
      settle[static_cast<std::size_t>(i)] = last_bad + 1;
    } else {
      settle[static_cast<std::size_t>(i)] = nullptr;  // still moving at the end
    }
  }
  j["settle_iteration"] = settle;

  if (steps > 0) {
    j["final_q_var"] = to_std(td.q.back());
    j["final_v_volt"] = to_std(td.v.back());
    double worst = 0.0;
    for (const Eigen::VectorXd& v : td.v) worst = std::max(worst, band(v, mu));
    j["max_v_excursion_volt"] = worst;
  }

  if (scenario) {
    const SimulationConfig cfg = build_config(*scenario);
    if (cfg.feeder.node_count != n) {
      throw ValidationError("summarize: scenario node count " +
                            std::to_string(cfg.feeder.node_count) +
                            " does not match trace " + std::to_string(n));
    }
    Eigen::VectorXd p, s_bar, p_tilde;
    collect_node_data(*scenario, n, p, s_bar, p_tilde);
    if (steps > 0) {
      std::vector<double> p_out(static_cast<std::size_t>(n));
      std::vector<double> delta(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const CurtailmentResult cr =
            apply_var_priority(s_bar(i), td.q.back()(i), p_tilde(i));
        p_out[static_cast<std::size_t>(i)] = cr.p_out;
        delta[static_cast<std::size_t>(i)] = cr.delta;
      }
      j["curtailment"]["p_out_w"] = p_out;
      j["curtailment"]["delta_w"] = delta;
    }
    if (scenario->attack) {
      j["attack"]["node"] = scenario->attack->attacker;
      j["attack"]["start_iteration"] = scenario->attack->start_iteration;
    }
  }
  return j.dump(2) + "\n";
}

}  // namespace varsim
