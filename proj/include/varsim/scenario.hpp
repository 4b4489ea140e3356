#pragma once

#include "varsim/agents.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace varsim {

// A scenario document after unit normalization (everything in W/VA/var/V).
// Per-node entries keep their file order so documents round-trip.
struct ScenarioDoc {
  std::vector<RawEdge> edges;
  std::vector<std::pair<int, double>> loads_w;        // (node, p)
  std::vector<std::pair<int, double>> inverters_va;   // (node, s_bar)
  std::vector<std::pair<int, double>> p_tilde_w;      // optional overrides
  double v0_volt = 0.0;
  double mu_volt = 0.0;
  std::optional<double> alpha;
  double tau_var = 0.1;
  int window = 1000;
  int max_iterations = 50000;
  std::optional<AttackSpec> attack;
  std::string trace_csv;
  std::string summary_json;
};

ScenarioDoc parse_scenario_text(const std::string& text);
ScenarioDoc load_scenario(const std::string& path);
std::string serialize_scenario(const ScenarioDoc& doc);

// Validates the document against the feeder (every node needs an inverter
// rating, loads default to zero, p_tilde defaults to |p|) and assembles the
// ready-to-run configuration.
SimulationConfig build_config(const ScenarioDoc& doc);

void write_trace_csv(const std::string& path, const SimulationTrace& trace);

// Full run summary as a JSON document. KKT residuals are evaluated on
// kilo-scaled quantities (kW/kvar and multipliers divided by 1000), matching
// the voltage presentation in the trace.
std::string make_summary(const SimulationConfig& cfg,
                         const SimulationTrace& trace,
                         const std::vector<AgentState>& agents);

struct OffsetSearchResult {
  double offset = 0.0;
  double achieved_q = 0.0;  // traced q at the target node, vars
  int evaluations = 0;
  bool success = false;
};

// Expanding bracket plus bisection on the post-run traced q at `node` as a
// function of the upper offset (lower offset held at zero). Each probe is a
// full simulation; near the root the stop rule leaves O(10 var) of noise, so
// the bisection stops at 25 var and success means within 50 var.
OffsetSearchResult search_attack_offset(const SimulationConfig& cfg, int node,
                                        double target_q_var);

struct TraceData {
  int node_count = 0;
  std::vector<Eigen::VectorXd> q;  // vars, one entry per iteration
  std::vector<Eigen::VectorXd> v;  // volts
};

TraceData read_trace_csv(const std::string& path);

// Post-hoc trace digest: per-node settling iterations, final values, the
// worst per-iteration voltage excursion from mu, and (when the scenario is
// supplied) the active-power curtailment implied by the final q.
std::string summarize_trace(const TraceData& td, double tau, int window,
                            double mu,
                            const std::optional<ScenarioDoc>& scenario);

}  // namespace varsim
