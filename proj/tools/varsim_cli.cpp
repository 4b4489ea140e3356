#include "varsim/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

int cmd_run(const std::string& scenario_path, std::optional<double> tau,
            std::optional<int> window, std::optional<int> max_iter,
            std::optional<double> alpha, std::optional<std::string> trace_path,
            std::optional<std::string> summary_path) {
  varsim::ScenarioDoc doc = varsim::load_scenario(scenario_path);
  if (tau) doc.tau_var = *tau;
  if (window) doc.window = *window;
  if (max_iter) doc.max_iterations = *max_iter;
  if (alpha) doc.alpha = *alpha;
  if (!(doc.tau_var > 0.0)) throw varsim::ValidationError("--tau must be positive");
  if (doc.window < 1) throw varsim::ValidationError("--window must be >= 1");
  if (doc.max_iterations < 0) {
    throw varsim::ValidationError("--max-iter must be >= 0");
  }
  if (doc.alpha && !(*doc.alpha > 0.0)) {
    throw varsim::ValidationError("--alpha must be positive");
  }

  const varsim::SimulationConfig cfg = varsim::build_config(doc);
  std::vector<varsim::AgentState> agents;
  const varsim::SimulationTrace trace = varsim::run_simulation(cfg, &agents);

  const std::string trace_out = trace_path ? *trace_path : doc.trace_csv;
  if (!trace_out.empty()) varsim::write_trace_csv(trace_out, trace);

  const std::string summary = varsim::make_summary(cfg, trace, agents);
  const std::string summary_out = summary_path ? *summary_path : doc.summary_json;
  if (!summary_out.empty()) {
    std::ofstream out(summary_out);
    if (!out) {
      throw varsim::ValidationError("cannot write summary: " + summary_out);
    }
    out << summary;
  }
  std::cout << summary;
  if (!trace.converged_at) {
    std::cerr << "not converged after " << trace.records.size()
              << " iterations\n";
    return 2;
  }
  return 0;
}

int cmd_search(const std::string& scenario_path, int node, double target_q) {
  const varsim::ScenarioDoc doc = varsim::load_scenario(scenario_path);
  const varsim::SimulationConfig cfg = varsim::build_config(doc);
  const varsim::OffsetSearchResult res =
      varsim::search_attack_offset(cfg, node, target_q);
  std::printf(
      "{\n  \"node\": %d,\n  \"target_q_var\": %.17g,\n  \"offset_up\": "
      "%.17g,\n  \"achieved_q_var\": %.17g,\n  \"evaluations\": %d,\n  "
      "\"success\": %s\n}\n",
      node, target_q, res.offset, res.achieved_q, res.evaluations,
      res.success ? "true" : "false");
  if (!res.success) {
    std::cerr << "target not reached within tolerance; best offset reported\n";
    return 1;
  }
  return 0;
}

int cmd_summarize(const std::string& trace_path, double tau, int window,
                  double mu, std::optional<std::string> scenario_path) {
  const varsim::TraceData td = varsim::read_trace_csv(trace_path);
  std::optional<varsim::ScenarioDoc> doc;
  if (scenario_path) doc = varsim::load_scenario(*scenario_path);
  std::cout << varsim::summarize_trace(td, tau, window, mu, doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed inverter VAR control on radial feeders"};
  app.require_subcommand(1);

  std::string scenario_path;
  double tau = 0.0, alpha = 0.0;
  int window = 0, max_iter = 0;
  std::string trace_path, summary_path;

  CLI::App* run = app.add_subcommand("run", "Simulate a scenario end to end");
  run->add_option("scenario", scenario_path, "Scenario JSON document")
      ->required();
  CLI::Option* o_tau =
      run->add_option("--tau", tau, "Stop threshold override, vars");
  CLI::Option* o_window =
      run->add_option("--window", window, "Stop window override, iterations");
  CLI::Option* o_max =
      run->add_option("--max-iter", max_iter, "Iteration cap override");
  CLI::Option* o_alpha = run->add_option("--alpha", alpha, "Step size override");
  CLI::Option* o_trace =
      run->add_option("--trace", trace_path, "Trace CSV output path");
  CLI::Option* o_summary =
      run->add_option("--summary", summary_path, "Summary JSON output path");

  std::string s_scenario;
  int s_node = 0;
  double s_target = 0.0;
  CLI::App* search = app.add_subcommand(
      "search-offset", "Find the broadcast offset steering one node's output");
  search->add_option("scenario", s_scenario, "Scenario JSON document")
      ->required();
  search->add_option("--node", s_node, "Node whose output to steer")
      ->required();
  search->add_option("--target-q", s_target, "Target reactive output, vars")
      ->required();

  std::string z_trace, z_scenario;
  double z_tau = 0.1, z_mu = 220.0;
  int z_window = 1000;
  CLI::App* summarize =
      app.add_subcommand("summarize", "Digest a previously written trace CSV");
  summarize->add_option("trace", z_trace, "Trace CSV path")->required();
  summarize->add_option("--tau", z_tau, "Stop threshold, vars");
  summarize->add_option("--window", z_window, "Stop window, iterations");
  summarize->add_option("--mu", z_mu, "Desired voltage for excursions, volts");
  CLI::Option* o_zscen = summarize->add_option(
      "--scenario", z_scenario,
      "Scenario JSON for curtailment and attack context");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(
          scenario_path,
          *o_tau ? std::optional<double>(tau) : std::nullopt,
          *o_window ? std::optional<int>(window) : std::nullopt,
          *o_max ? std::optional<int>(max_iter) : std::nullopt,
          *o_alpha ? std::optional<double>(alpha) : std::nullopt,
          *o_trace ? std::optional<std::string>(trace_path) : std::nullopt,
          *o_summary ? std::optional<std::string>(summary_path) : std::nullopt);
    }
    if (search->parsed()) return cmd_search(s_scenario, s_node, s_target);
    if (summarize->parsed()) {
      return cmd_summarize(
          z_trace, z_tau, z_window, z_mu,
          *o_zscen ? std::optional<std::string>(z_scenario) : std::nullopt);
    }
  } catch (const varsim::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
