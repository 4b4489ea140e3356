#include "varsim/feeder.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <utility>

namespace varsim {

namespace {

int find_root(std::vector<int>& uf, int v) {
  while (uf[v] != v) {
    uf[v] = uf[uf[v]];
    v = uf[v];
  }
  return v;
}

}  // namespace

FeederGraph parse_feeder(const std::vector<RawEdge>& raw_edges) {
  if (raw_edges.empty()) {
    throw ValidationError("feeder: no edges given");
  }
  int max_id = 0;
  for (const auto& e : raw_edges) {
    if (e.a < 0 || e.b < 0) {
      throw ValidationError("feeder: negative node id on edge (" +
                            std::to_string(e.a) + "," + std::to_string(e.b) + ")");
    }
    if (e.a == e.b) {
      throw ValidationError("feeder: self-loop at node " + std::to_string(e.a));
    }
    if (!(e.r_ohm > 0.0) || !(e.x_ohm > 0.0)) {
      throw ValidationError("feeder: nonpositive impedance on edge (" +
                            std::to_string(e.a) + "," + std::to_string(e.b) + ")");
    }
    max_id = std::max({max_id, e.a, e.b});
  }

  // An exactly repeated listing is a duplicate; a reversed re-listing closes
  // a two-edge loop and is reported as a cycle below.
  std::set<std::pair<int, int>> seen;
  for (const auto& e : raw_edges) {
    if (!seen.insert({e.a, e.b}).second) {
      throw ValidationError("feeder: duplicate edge (" + std::to_string(e.a) +
                            "," + std::to_string(e.b) + ")");
    }
  }

  // Union-find first so a cycle is reported as a cycle even when the
  // component containing it is also detached from the substation.
  std::vector<int> uf(max_id + 1);
  for (int v = 0; v <= max_id; ++v) uf[v] = v;
  for (const auto& e : raw_edges) {
    int ra = find_root(uf, e.a);
    int rb = find_root(uf, e.b);
    if (ra == rb) {
      throw ValidationError("feeder: cycle detected through edge (" +
                            std::to_string(e.a) + "," + std::to_string(e.b) + ")");
    }
    uf[ra] = rb;
  }

  std::vector<std::vector<std::pair<int, const RawEdge*>>> adj(max_id + 1);
  for (const auto& e : raw_edges) {
    adj[e.a].push_back({e.b, &e});
    adj[e.b].push_back({e.a, &e});
  }

  // BFS from the substation orients every edge parent -> child.
  std::vector<int> parent_of(max_id + 1, -1);
  std::vector<const RawEdge*> via(max_id + 1, nullptr);
  std::vector<bool> reached(max_id + 1, false);
  reached[0] = true;
  std::queue<int> frontier;
  frontier.push(0);
  while (!frontier.empty()) {
    int v = frontier.front();
    frontier.pop();
    for (auto [w, e] : adj[v]) {
      if (!reached[w]) {
        reached[w] = true;
        parent_of[w] = v;
        via[w] = e;
        frontier.push(w);
      }
    }
  }
  for (int v = 1; v <= max_id; ++v) {
    if (!reached[v]) {
      throw ValidationError("feeder: node " + std::to_string(v) +
                            " not reachable from the substation");
    }
  }
  // Every id 1..max_id was reachable, so ids are contiguous exactly when the
  // edge count matches.
  if (static_cast<int>(raw_edges.size()) != max_id) {
    throw ValidationError("feeder: expected " + std::to_string(max_id) +
                          " edges for nodes 1.." + std::to_string(max_id) +
                          ", got " + std::to_string(raw_edges.size()));
  }

  FeederGraph g;
  g.node_count = max_id;
  g.edges.resize(max_id);
  for (int child = 1; child <= max_id; ++child) {
    g.edges[child - 1] = Edge{parent_of[child], child, via[child]->r_ohm,
                              via[child]->x_ohm};
  }
  return g;
}

Eigen::MatrixXd reduced_incidence(const FeederGraph& g) {
  const int n = g.node_count;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges) {
    A(e.child - 1, e.child - 1) = -1.0;
    if (e.parent != FeederGraph::substation_id) {
      A(e.child - 1, e.parent - 1) = 1.0;
    }
  }
  return A;
}

double homogeneity_ratio(const Eigen::MatrixXd& R, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd M = X.partialPivLu().solve(R);
  const double xi = M.diagonal().mean();
  const Eigen::MatrixXd dev =
      M - xi * Eigen::MatrixXd::Identity(M.rows(), M.cols());
  if (dev.cwiseAbs().maxCoeff() > 1e-9 * xi) {
    throw ValidationError(
        "feeder: not homogeneous (X^-1 R deviates from a scalar multiple of I)");
  }
  return xi;
}

double homogeneity_ratio(const GridMatrices& m) {
  return homogeneity_ratio(m.R, m.X);
}

namespace {

double spectral_max(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

GridMatrices build_grid_matrices(const FeederGraph& g,
                                 std::optional<double> step_override) {
  const int n = g.node_count;
  GridMatrices m;
  m.A_reduced = reduced_incidence(g);

  const Eigen::MatrixXd F = (-m.A_reduced).partialPivLu().inverse();
  Eigen::VectorXd r(n), x(n);
  for (const auto& e : g.edges) {
    r(e.child - 1) = e.r_ohm;
    x(e.child - 1) = e.x_ohm;
  }
  m.R = 2.0 * F * r.asDiagonal() * F.transpose();
  m.X = 2.0 * F * x.asDiagonal() * F.transpose();

  m.B = 0.5 * m.A_reduced.transpose() *
        x.cwiseInverse().asDiagonal() * m.A_reduced;
  m.Btilde = m.B * m.B;

  m.xi = homogeneity_ratio(m.R, m.X);
  m.alpha = step_override ? *step_override : 1.0 / (2.0 * spectral_max(m.Btilde));
  if (!(m.alpha > 0.0)) {
    throw ValidationError("feeder: step size must be positive");
  }
  return m;
}

std::vector<int> two_hop_neighbors(const FeederGraph& g, int i) {
  if (i < 1 || i > g.node_count) {
    throw std::logic_error("two_hop_neighbors: unknown node id " +
                           std::to_string(i));
  }
  std::vector<std::vector<int>> adj(g.node_count + 1);
  for (const auto& e : g.edges) {
    adj[e.parent].push_back(e.child);
    adj[e.child].push_back(e.parent);
  }
  std::set<int> out;
  for (int j : adj[i]) {
    out.insert(j);
    for (int k : adj[j]) out.insert(k);
  }
  out.erase(i);
  out.erase(FeederGraph::substation_id);
  return {out.begin(), out.end()};
}

}  // namespace varsim
