#pragma once

#include "varsim/feeder.hpp"
#include "varsim/gridmodel.hpp"
#include "varsim/optim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace varsim {

struct AttackSpec {
  int attacker = 0;
  int start_iteration = 1;
  double offset_up = 0.0;  // added to the broadcast upper block
  double offset_lo = 0.0;  // added to the broadcast lower block
  bool tamper_internal = false;
};

// One broadcast frame. The multiplier pair rides along for bookkeeping only;
// the optimization update consumes just the theta fields.
struct Message {
  int sender = 0;
  int iteration = 0;
  double theta_up = 0.0;
  double theta_lo = 0.0;
  double lambda_up = 0.0;
  double lambda_lo = 0.0;
};

struct AgentState {
  int node = 0;
  double p = 0.0;  // local active injection, watts
  double Q = 0.0;  // local capability bound, vars
  std::vector<int> support;        // sorted node ids: two-hop neighbors plus self
  std::vector<double> btilde_row;  // Btilde(node, .) aligned with support

  double lambda_up = 0.0;
  double lambda_lo = 0.0;
  double lambda_up_prev = 0.0;
  double lambda_lo_prev = 0.0;
  double theta_up = 0.0;
  double theta_lo = 0.0;
  double omega = 1.0;

  // Last multiplier pair received from each support member (self slot mirrors
  // the agent's own current pair).
  std::vector<double> known_lambda_up;
  std::vector<double> known_lambda_lo;
  double q = 0.0;  // local primal view recovered from the stored multipliers
};

struct SimulationRecord {
  Eigen::VectorXd q;  // engine recovery from the true multipliers, vars
  Eigen::VectorXd v;  // volts
  Eigen::VectorXd lambda_up;
  Eigen::VectorXd lambda_lo;
  Eigen::VectorXd theta_up;  // the point this round's gradients were taken at
  Eigen::VectorXd theta_lo;
  double omega = 1.0;  // incoming omega(k)
};

struct SimulationTrace {
  std::vector<SimulationRecord> records;
  std::optional<int> converged_at;
  std::string stop_reason;  // "converged" or "iteration_cap"
};

struct SimulationConfig {
  FeederGraph feeder;
  GridMatrices mats;
  Eigen::VectorXd p;  // watts
  QpBounds bounds;
  double v0 = 0.0;  // volts
  double mu = 0.0;  // volts
  StopRule stop;
  std::optional<AttackSpec> attack;
};

std::vector<AgentState> init_agents(const GridMatrices& m, const FeederGraph& g,
                                    const Eigen::VectorXd& p, const QpBounds& b);

// Honest nodes send their state verbatim; the attacker adds its offsets to
// both the theta and the attached lambda fields once k reaches
// start_iteration.
Message broadcast(const AgentState& a, const std::optional<AttackSpec>& atk,
                  int k);

// One FISTA step of agent a from its own state and the round's inbox. The
// self term always uses the agent's true theta unless tamper_internal is set
// on an active attacker. Also refreshes the stored neighbor multipliers and
// the agent's local primal view.
void local_update(AgentState& a, const std::vector<Message>& inbox,
                  double alpha, double xi, const std::optional<AttackSpec>& atk,
                  int k);

// Synchronous round k: gather every broadcast, then apply every update, then
// append the trace record (true-multiplier recovery plus voltages).
void step_round(std::vector<AgentState>& agents, const SimulationConfig& cfg,
                int k, SimulationTrace& trace);

// Post-hoc stop-rule scan over a finished trace: first iteration at which
// max_i |q_i(k) - q_i(k-1)| <= tau has held for `window` consecutive
// iterations.
std::optional<int> converged(const SimulationTrace& trace, double tau,
                             int window);

// Runs rounds until the stop rule fires or the cap is hit. With an attack
// configured, firing is suppressed until past start_iteration and the
// below-tau streak restarts there, so the run always continues through the
// injection and settles again afterwards. Final agent states are copied out
// through final_agents when provided.
SimulationTrace run_simulation(const SimulationConfig& cfg,
                               std::vector<AgentState>* final_agents = nullptr);

}  // namespace varsim
