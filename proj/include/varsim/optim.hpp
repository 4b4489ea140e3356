#pragma once

#include "varsim/feeder.hpp"

#include <optional>
#include <vector>

namespace varsim {

// Multiplier pair for the box constraint -Q <= q <= Q.
// "up" is the upper-bound block (q <= Q), "lo" the lower (-q <= Q).
struct DualPoint {
  Eigen::VectorXd lambda_up;
  Eigen::VectorXd lambda_lo;
};

struct ExtrapolationPoint {
  Eigen::VectorXd theta_up;
  Eigen::VectorXd theta_lo;
};

struct QpBounds {
  Eigen::VectorXd Q;  // capability bounds, vars, componentwise >= 0
};

struct KktReport {
  double primal_violation = 0.0;     // max_i max(|q_i| - Q_i, 0)
  double stationarity_residual = 0.0;  // inf-norm of X(Rp + Xq) + lu - ll
  double comp_slack_up = 0.0;        // max_i |lu_i (q_i - Q_i)|
  double comp_slack_lo = 0.0;        // max_i |ll_i (-q_i - Q_i)|
};

struct StopRule {
  double tau = 0.1;          // vars; per-node step threshold
  int window = 1000;         // consecutive iterations below tau
  int max_iterations = 50000;
};

struct IterationRecord {
  Eigen::VectorXd q;
  DualPoint lam;
  ExtrapolationPoint theta;  // the point the gradient was evaluated at
  double omega = 1.0;        // incoming omega(k)
};

struct FistaResult {
  DualPoint lam;
  Eigen::VectorXd q;
  int iterations = 0;                 // rounds actually executed
  std::optional<int> converged_at;    // iteration at which the window closed
  std::vector<IterationRecord> history;  // filled only on request
};

// Shared scalar kernels. The distributed agents and the centralized solver
// must produce bit-identical trajectories, so every floating-point expression
// that appears in both paths lives here exactly once.

// sum_j Btilde(i,j) * (a_j - b_j), ascending j, skipping exact zeros.
double btilde_row_diff(const Eigen::MatrixXd& Btilde, int i,
                       const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Same accumulation from a sparse row (entries aligned with sorted column
// indices); values[j] pair up with (a - b) at those columns.
double btilde_row_diff_sparse(const std::vector<int>& cols,
                              const std::vector<double>& values,
                              const std::vector<double>& diff);

inline double grad_entry_up(double s, double xi_p, double Qi) {
  return s + xi_p + Qi;
}
inline double grad_entry_lo(double s, double xi_p, double Qi) {
  return -s - xi_p + Qi;
}
inline double prox_entry(double theta, double alpha, double g) {
  const double h = theta - alpha * g;
  return h >= 0.0 ? h : 0.0;
}
inline double extrapolate_entry(double lam, double lam_prev, double coeff) {
  return lam + coeff * (lam - lam_prev);
}
inline double recover_entry(double s, double xi_p) { return -s - xi_p; }

// 0.5 * ||R p + X q||^2
double primal_value(const GridMatrices& m, const Eigen::VectorXd& p,
                    const Eigen::VectorXd& q);

// The (negated, minimized) dual objective
//   G(l) = 0.5 (lu-ll)^T Btilde (lu-ll) + xi (lu-ll)^T p + (lu+ll)^T Q
double dual_value(const GridMatrices& m, const DualPoint& d,
                  const Eigen::VectorXd& p, const QpBounds& b);

// Gradient of dual_value at theta, split into the up/lo blocks:
//   up = Btilde (tu-tl) + xi p + Q,   lo = -(Btilde (tu-tl)) - xi p + Q
void dual_gradient(const GridMatrices& m, const ExtrapolationPoint& t,
                   const Eigen::VectorXd& p, const QpBounds& b,
                   Eigen::VectorXd& grad_up, Eigen::VectorXd& grad_lo);

// Componentwise projection onto the nonnegative orthant.
DualPoint prox_project(const Eigen::VectorXd& h_up, const Eigen::VectorXd& h_lo);

// omega(k+1) = (1 + sqrt(1 + 4 omega(k)^2)) / 2
double momentum_next(double omega);

// theta(k+1) = lam(k) + ((omega(k)-1)/omega(k+1)) (lam(k) - lam(k-1))
ExtrapolationPoint extrapolate(const DualPoint& lam_k, const DualPoint& lam_prev,
                               double omega_k, double omega_next);

// q = -Btilde (lu - ll) - xi p
Eigen::VectorXd recover_q(const GridMatrices& m, const DualPoint& d,
                          const Eigen::VectorXd& p);

// 1 / (2 lambda_max(Btilde)); the stacked dual Hessian has spectrum
// {2 eig(Btilde)} union {0}.
double default_step_size(const GridMatrices& m);

// Accelerated proximal gradient on the dual from lambda = 0, omega = 1.
// Stops when max_i |q_i(k) - q_i(k-1)| <= tau for `window` consecutive
// iterations (reported at the closing iteration), or at the cap.
FistaResult fista_solve(const GridMatrices& m, const Eigen::VectorXd& p,
                        const QpBounds& b, const StopRule& stop,
                        bool keep_history = false);

// Projected gradient on the primal box QP, the ground-truth oracle.
// Stops once the componentwise iterate displacement drops to tol (vars).
Eigen::VectorXd solve_centralized(const GridMatrices& m,
                                  const Eigen::VectorXd& p, const QpBounds& b,
                                  double tol);

KktReport kkt_residuals(const GridMatrices& m, const Eigen::VectorXd& q,
                        const DualPoint& d, const Eigen::VectorXd& p,
                        const QpBounds& b);

}  // namespace varsim
