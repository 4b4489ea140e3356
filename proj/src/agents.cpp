#include "varsim/agents.hpp"

#include <algorithm>
#include <stdexcept>

namespace varsim {

std::vector<AgentState> init_agents(const GridMatrices& m, const FeederGraph& g,
                                    const Eigen::VectorXd& p,
                                    const QpBounds& b) {
  const int n = g.node_count;
  if (m.Btilde.rows() != n || m.Btilde.cols() != n || p.size() != n ||
      b.Q.size() != n) {
    throw std::logic_error("init_agents: dimension mismatch");
  }
  std::vector<AgentState> agents(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    AgentState& a = agents[static_cast<std::size_t>(i)];
    a.node = i + 1;
    a.p = p(i);
    a.Q = b.Q(i);
    for (int j = 0; j < n; ++j) {
      if (j == i || m.Btilde(i, j) != 0.0) {
        a.support.push_back(j + 1);
        a.btilde_row.push_back(m.Btilde(i, j));
      }
    }
    std::vector<int> allowed = two_hop_neighbors(g, i + 1);
    allowed.push_back(i + 1);
    std::sort(allowed.begin(), allowed.end());
    for (int s : a.support) {
      if (!std::binary_search(allowed.begin(), allowed.end(), s)) {
        throw std::logic_error("init_agents: row support outside two-hop set");
      }
    }
    a.known_lambda_up.assign(a.support.size(), 0.0);
    a.known_lambda_lo.assign(a.support.size(), 0.0);
  }
  return agents;
}

Message broadcast(const AgentState& a, const std::optional<AttackSpec>& atk,
                  int k) {
  Message m;
  m.sender = a.node;
  m.iteration = k;
  m.theta_up = a.theta_up;
  m.theta_lo = a.theta_lo;
  m.lambda_up = a.lambda_up;
  m.lambda_lo = a.lambda_lo;
  if (atk && atk->attacker == a.node && k >= atk->start_iteration) {
    m.theta_up += atk->offset_up;
    m.theta_lo += atk->offset_lo;
    m.lambda_up += atk->offset_up;
    m.lambda_lo += atk->offset_lo;
  }
  return m;
}

void local_update(AgentState& a, const std::vector<Message>& inbox,
                  double alpha, double xi, const std::optional<AttackSpec>& atk,
                  int k) {
  const bool self_tamper = atk && atk->tamper_internal &&
                           atk->attacker == a.node &&
                           k >= atk->start_iteration;
  double s = 0.0;
  for (std::size_t idx = 0; idx < a.support.size(); ++idx) {
    const int j = a.support[idx];
    double tu, tl;
    if (j == a.node) {
      tu = a.theta_up;
      tl = a.theta_lo;
      if (self_tamper) {
        tu += atk->offset_up;
        tl += atk->offset_lo;
      }
    } else {
      const Message* msg = nullptr;
      for (const Message& cand : inbox) {
        if (cand.sender == j) {
          msg = &cand;
          break;
        }
      }
      if (msg == nullptr) {
        throw std::logic_error(
            "local_update: missing message from node " + std::to_string(j));
      }
      tu = msg->theta_up;
      tl = msg->theta_lo;
      a.known_lambda_up[idx] = msg->lambda_up;
      a.known_lambda_lo[idx] = msg->lambda_lo;
    }
    const double w = a.btilde_row[idx];
    if (w == 0.0) continue;
    s += w * (tu - tl);
  }

  const double xi_p = xi * a.p;
  const double new_up =
      prox_entry(a.theta_up, alpha, grad_entry_up(s, xi_p, a.Q));
  const double new_lo =
      prox_entry(a.theta_lo, alpha, grad_entry_lo(s, xi_p, a.Q));
  const double omega_next = momentum_next(a.omega);
  const double coeff = (a.omega - 1.0) / omega_next;
  const double next_theta_up = extrapolate_entry(new_up, a.lambda_up, coeff);
  const double next_theta_lo = extrapolate_entry(new_lo, a.lambda_lo, coeff);

  a.lambda_up_prev = a.lambda_up;
  a.lambda_lo_prev = a.lambda_lo;
  a.lambda_up = new_up;
  a.lambda_lo = new_lo;
  a.theta_up = next_theta_up;
  a.theta_lo = next_theta_lo;
  a.omega = omega_next;

  double acc = 0.0;
  for (std::size_t idx = 0; idx < a.support.size(); ++idx) {
    double lu, ll;
    if (a.support[idx] == a.node) {
      lu = a.lambda_up;
      ll = a.lambda_lo;
      a.known_lambda_up[idx] = lu;
      a.known_lambda_lo[idx] = ll;
    } else {
      lu = a.known_lambda_up[idx];
      ll = a.known_lambda_lo[idx];
    }
    const double w = a.btilde_row[idx];
    if (w == 0.0) continue;
    acc += w * (lu - ll);
  }
  a.q = recover_entry(acc, xi_p);
}

void step_round(std::vector<AgentState>& agents, const SimulationConfig& cfg,
                int k, SimulationTrace& trace) {
  const int n = static_cast<int>(agents.size());
  SimulationRecord rec;
  rec.theta_up.resize(n);
  rec.theta_lo.resize(n);
  rec.omega = agents.empty() ? 1.0 : agents.front().omega;
  for (int i = 0; i < n; ++i) {
    rec.theta_up(i) = agents[static_cast<std::size_t>(i)].theta_up;
    rec.theta_lo(i) = agents[static_cast<std::size_t>(i)].theta_lo;
  }

  std::vector<Message> frames;
  frames.reserve(agents.size());
  for (const AgentState& a : agents) {
    frames.push_back(broadcast(a, cfg.attack, k));
  }
  for (AgentState& a : agents) {
    std::vector<Message> inbox;
    inbox.reserve(a.support.size());
    for (int j : a.support) {
      if (j != a.node) inbox.push_back(frames[static_cast<std::size_t>(j - 1)]);
    }
    local_update(a, inbox, cfg.mats.alpha, cfg.mats.xi, cfg.attack, k);
  }

  rec.lambda_up.resize(n);
  rec.lambda_lo.resize(n);
  for (int i = 0; i < n; ++i) {
    rec.lambda_up(i) = agents[static_cast<std::size_t>(i)].lambda_up;
    rec.lambda_lo(i) = agents[static_cast<std::size_t>(i)].lambda_lo;
  }
  rec.q.resize(n);
  for (int i = 0; i < n; ++i) {
    const double s = btilde_row_diff(cfg.mats.Btilde, i, rec.lambda_up,
                                     rec.lambda_lo);
    rec.q(i) = recover_entry(s, cfg.mats.xi * cfg.p(i));
  }

  GridCase c;
  c.p = cfg.p / 1000.0;
  c.q = rec.q / 1000.0;
  c.v0 = cfg.v0;
  c.mu = Eigen::VectorXd::Constant(n, cfg.mu);
  rec.v = nodal_voltages(cfg.mats, c);

  trace.records.push_back(std::move(rec));
}

std::optional<int> converged(const SimulationTrace& trace, double tau,
                             int window) {
  if (window < 1) throw std::logic_error("converged: window must be >= 1");
  int streak = 0;
  for (std::size_t k = 1; k < trace.records.size(); ++k) {
    const Eigen::VectorXd& cur = trace.records[k].q;
    const Eigen::VectorXd& prev = trace.records[k - 1].q;
    const double d =
        cur.size() == 0 ? 0.0 : (cur - prev).cwiseAbs().maxCoeff();
    if (d <= tau) {
      if (++streak >= window) return static_cast<int>(k) + 1;
    } else {
      streak = 0;
    }
  }
  return std::nullopt;
}

SimulationTrace run_simulation(const SimulationConfig& cfg,
                               std::vector<AgentState>* final_agents) {
  SimulationTrace trace;
  std::vector<AgentState> agents =
      init_agents(cfg.mats, cfg.feeder, cfg.p, cfg.bounds);
  const std::optional<AttackSpec>& atk = cfg.attack;
  int streak = 0;
  for (int k = 1; k <= cfg.stop.max_iterations; ++k) {
    step_round(agents, cfg, k, trace);
    if (atk && k == atk->start_iteration) streak = 0;
    bool below = false;
    if (trace.records.size() >= 2) {
      const Eigen::VectorXd& cur = trace.records.back().q;
      const Eigen::VectorXd& prev =
          trace.records[trace.records.size() - 2].q;
      const double d =
          cur.size() == 0 ? 0.0 : (cur - prev).cwiseAbs().maxCoeff();
      below = d <= cfg.stop.tau;
    }
    if (below) {
      ++streak;
      if (streak >= cfg.stop.window &&
          (!atk || k > atk->start_iteration)) {
        trace.converged_at = k;
        break;
      }
    } else {
      streak = 0;
    }
  }
  trace.stop_reason = trace.converged_at ? "converged" : "iteration_cap";
  if (final_agents != nullptr) *final_agents = std::move(agents);
  return trace;
}

}  // namespace varsim
