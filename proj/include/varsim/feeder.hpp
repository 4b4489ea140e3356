#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace varsim {

// Raised for anything a scenario author can get wrong. The CLI maps it to
// exit code 1; contract violations inside the library throw std::logic_error.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// An edge as it appears in an input document. Orientation is free; the parser
// re-roots everything at the substation.
struct RawEdge {
  int a = 0;
  int b = 0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
};

// Directed tree edge after validation. Edges are indexed by their child node:
// edges[i] is the unique edge whose child is node i+1.
struct Edge {
  int parent = 0;
  int child = 0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
};

struct FeederGraph {
  static constexpr int substation_id = 0;
  int node_count = 0;  // N, substation excluded
  std::vector<Edge> edges;
};

// Coupling matrices shared by every solver path.
//
//   R = 2 F diag(r) F^T,  X = 2 F diag(x) F^T,  F = (-A)^-1
//   B = X^-1, Btilde = B^2, xi = the scalar with X^-1 R = xi I
//
// B is assembled structurally (0.5 A^T diag(1/x) A), which is algebraically
// X^-1 but carries exact zeros outside the one-hop pattern, so Btilde has
// exact zeros outside the two-hop pattern. The sparse agent rows and the
// dense loops then see identical coefficient sequences.
struct GridMatrices {
  Eigen::MatrixXd R;
  Eigen::MatrixXd X;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Btilde;
  Eigen::MatrixXd A_reduced;
  double xi = 0.0;
  double alpha = 0.0;
};

// Validates and roots an edge list. Node ids must be 0 (substation) plus a
// contiguous 1..N; exactly one tree. Throws ValidationError with a distinct
// message per defect class (impedance, duplicate, cycle, disconnected, ids).
FeederGraph parse_feeder(const std::vector<RawEdge>& raw_edges);

// Rows indexed by edge (child node), columns by non-substation node.
// Entry -1 at the child, +1 at the parent when the parent is not node 0.
Eigen::MatrixXd reduced_incidence(const FeederGraph& g);

// xi = mean diagonal of X^-1 R; throws if the feeder is not homogeneous
// (off-diagonal mass of X^-1 R above 1e-9 * xi).
double homogeneity_ratio(const Eigen::MatrixXd& R, const Eigen::MatrixXd& X);
double homogeneity_ratio(const GridMatrices& m);

GridMatrices build_grid_matrices(const FeederGraph& g,
                                 std::optional<double> step_override = {});

// Nodes j != i at tree distance <= 2 from i, measured over the full tree
// including the substation vertex; the substation itself is never a member.
std::vector<int> two_hop_neighbors(const FeederGraph& g, int i);

}  // namespace varsim
