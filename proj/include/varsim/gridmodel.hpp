#pragma once

#include "varsim/feeder.hpp"

#include <utility>
#include <vector>

namespace varsim {

// Injections are signed: positive injects into the grid, negative consumes.
struct GridCase {
  Eigen::VectorXd p;   // active injections, watts
  Eigen::VectorXd q;   // reactive injections, vars
  double v0 = 0.0;     // substation voltage, volts
  Eigen::VectorXd mu;  // desired voltages, volts
};

struct InverterSpec {
  double s_bar = 0.0;    // rated apparent power, VA
  double p_tilde = 0.0;  // measured active output, W (>= 0)
};

struct CurtailmentResult {
  double p_out = 0.0;  // delivered active power, W
  double delta = 0.0;  // curtailed active power, W
};

struct BranchFlow {
  double P = 0.0;  // active flow on the edge into its child, W
  double Q = 0.0;  // reactive flow, var
};

// v = R p + X q + v0 * 1. Purely linear; the caller picks the unit system.
Eigen::VectorXd nodal_voltages(const GridMatrices& m, const GridCase& c);

// Lossless flows, one entry per edge in child order. The flow on the edge
// into node j equals minus the sum of injections over j's subtree (positive
// when the subtree consumes).
std::vector<BranchFlow> branch_flows(const FeederGraph& g,
                                     const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& q);

// Q = sqrt(s_bar^2 - p_tilde^2), the largest reactive magnitude the inverter
// can sustain at its current active output.
double reactive_capability(const InverterSpec& inv);

// Reactive power priority: the reactive command is held, active power is
// curtailed until the apparent-power circle is respected.
CurtailmentResult apply_var_priority(double s_bar, double q_cmd, double p_avail);

}  // namespace varsim
