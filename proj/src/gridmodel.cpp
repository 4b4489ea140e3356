#include "varsim/gridmodel.hpp"

#include <cmath>

namespace varsim {

Eigen::VectorXd nodal_voltages(const GridMatrices& m, const GridCase& c) {
  const auto n = m.R.rows();
  if (c.p.size() != n || c.q.size() != n) {
    throw std::logic_error("nodal_voltages: dimension mismatch");
  }
  return m.R * c.p + m.X * c.q +
         c.v0 * Eigen::VectorXd::Ones(n);
}

std::vector<BranchFlow> branch_flows(const FeederGraph& g,
                                     const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& q) {
  const int n = g.node_count;
  if (p.size() != n || q.size() != n) {
    throw std::logic_error("branch_flows: dimension mismatch");
  }
  // Subtree sums by scanning children before parents. A child's subtree is
  // finished once every deeper node has been folded in, so process nodes in
  // decreasing BFS depth.
  std::vector<int> depth(n + 1, 0);
  for (const auto& e : g.edges) depth[e.child] = 0;
  // depths via repeated relaxation (tree is tiny; avoids recursion)
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& e : g.edges) {
      int d = (e.parent == 0) ? 1 : depth[e.parent] + 1;
      if (depth[e.child] != d) {
        depth[e.child] = d;
        changed = true;
      }
    }
  }
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i + 1;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return depth[a] > depth[b]; });

  std::vector<double> sub_p(n + 1, 0.0), sub_q(n + 1, 0.0);
  for (int node : order) {
    sub_p[node] += p(node - 1);
    sub_q[node] += q(node - 1);
    int par = g.edges[node - 1].parent;
    if (par != 0) {
      sub_p[par] += sub_p[node];
      sub_q[par] += sub_q[node];
    }
  }
  std::vector<BranchFlow> flows(n);
  for (int child = 1; child <= n; ++child) {
    flows[child - 1] = BranchFlow{-sub_p[child], -sub_q[child]};
  }
  return flows;
}

double reactive_capability(const InverterSpec& inv) {
  if (inv.p_tilde < 0.0 || !(inv.s_bar > 0.0)) {
    throw ValidationError("inverter: require s_bar > 0 and p_tilde >= 0");
  }
  if (inv.p_tilde > inv.s_bar) {
    throw ValidationError("inverter: active output exceeds the apparent rating");
  }
  return std::sqrt(inv.s_bar * inv.s_bar - inv.p_tilde * inv.p_tilde);
}

CurtailmentResult apply_var_priority(double s_bar, double q_cmd,
                                     double p_avail) {
  if (std::abs(q_cmd) > s_bar) {
    throw ValidationError("curtailment: reactive command exceeds the rating");
  }
  if (p_avail < 0.0) {
    throw ValidationError("curtailment: available active power must be >= 0");
  }
  if (p_avail * p_avail + q_cmd * q_cmd <= s_bar * s_bar) {
    return {p_avail, 0.0};
  }
  const double p_out = std::sqrt(s_bar * s_bar - q_cmd * q_cmd);
  return {p_out, p_avail - p_out};
}

}  // namespace varsim
