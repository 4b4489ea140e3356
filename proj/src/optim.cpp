#include "varsim/optim.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace varsim {

double btilde_row_diff(const Eigen::MatrixXd& Btilde, int i,
                       const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  const int n = static_cast<int>(Btilde.cols());
  for (int j = 0; j < n; ++j) {
    const double w = Btilde(i, j);
    if (w == 0.0) continue;
    s += w * (a(j) - b(j));
  }
  return s;
}

double btilde_row_diff_sparse(const std::vector<int>& cols,
                              const std::vector<double>& values,
                              const std::vector<double>& diff) {
  double s = 0.0;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (values[k] == 0.0) continue;
    s += values[k] * diff[k];
  }
  return s;
}

double primal_value(const GridMatrices& m, const Eigen::VectorXd& p,
                    const Eigen::VectorXd& q) {
  return 0.5 * (m.R * p + m.X * q).squaredNorm();
}

double dual_value(const GridMatrices& m, const DualPoint& d,
                  const Eigen::VectorXd& p, const QpBounds& b) {
  const Eigen::VectorXd diff = d.lambda_up - d.lambda_lo;
  return 0.5 * diff.dot(m.Btilde * diff) + m.xi * diff.dot(p) +
         (d.lambda_up + d.lambda_lo).dot(b.Q);
}

void dual_gradient(const GridMatrices& m, const ExtrapolationPoint& t,
                   const Eigen::VectorXd& p, const QpBounds& b,
                   Eigen::VectorXd& grad_up, Eigen::VectorXd& grad_lo) {
  const int n = static_cast<int>(p.size());
  grad_up.resize(n);
  grad_lo.resize(n);
  for (int i = 0; i < n; ++i) {
    const double s = btilde_row_diff(m.Btilde, i, t.theta_up, t.theta_lo);
    const double xi_p = m.xi * p(i);
    grad_up(i) = grad_entry_up(s, xi_p, b.Q(i));
    grad_lo(i) = grad_entry_lo(s, xi_p, b.Q(i));
  }
}

DualPoint prox_project(const Eigen::VectorXd& h_up,
                       const Eigen::VectorXd& h_lo) {
  DualPoint out;
  out.lambda_up = h_up.cwiseMax(0.0);
  out.lambda_lo = h_lo.cwiseMax(0.0);
  return out;
}

double momentum_next(double omega) {
  return (1.0 + std::sqrt(1.0 + 4.0 * omega * omega)) / 2.0;
}

ExtrapolationPoint extrapolate(const DualPoint& lam_k, const DualPoint& lam_prev,
                               double omega_k, double omega_next) {
  const int n = static_cast<int>(lam_k.lambda_up.size());
  const double coeff = (omega_k - 1.0) / omega_next;
  ExtrapolationPoint t;
  t.theta_up.resize(n);
  t.theta_lo.resize(n);
  for (int i = 0; i < n; ++i) {
    t.theta_up(i) =
        extrapolate_entry(lam_k.lambda_up(i), lam_prev.lambda_up(i), coeff);
    t.theta_lo(i) =
        extrapolate_entry(lam_k.lambda_lo(i), lam_prev.lambda_lo(i), coeff);
  }
  return t;
}

Eigen::VectorXd recover_q(const GridMatrices& m, const DualPoint& d,
                          const Eigen::VectorXd& p) {
  const int n = static_cast<int>(p.size());
  Eigen::VectorXd q(n);
  for (int i = 0; i < n; ++i) {
    const double s = btilde_row_diff(m.Btilde, i, d.lambda_up, d.lambda_lo);
    q(i) = recover_entry(s, m.xi * p(i));
  }
  return q;
}

double default_step_size(const GridMatrices& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.Btilde);
  return 1.0 / (2.0 * es.eigenvalues().maxCoeff());
}

FistaResult fista_solve(const GridMatrices& m, const Eigen::VectorXd& p,
                        const QpBounds& b, const StopRule& stop,
                        bool keep_history) {
  const int n = static_cast<int>(p.size());
  if (b.Q.size() != n || m.Btilde.rows() != n) {
    throw std::logic_error("fista_solve: dimension mismatch");
  }
  const double alpha = m.alpha;
  if (!(alpha > 0.0)) {
    throw std::logic_error("fista_solve: nonpositive step size");
  }

  DualPoint lam{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  ExtrapolationPoint theta{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  double omega = 1.0;

  FistaResult res;
  Eigen::VectorXd q(n), q_prev(n);
  Eigen::VectorXd new_up(n), new_lo(n);
  int streak = 0;
  int executed = 0;

  for (int k = 1; k <= stop.max_iterations; ++k) {
    executed = k;
    for (int i = 0; i < n; ++i) {
      const double s = btilde_row_diff(m.Btilde, i, theta.theta_up, theta.theta_lo);
      const double xi_p = m.xi * p(i);
      new_up(i) = prox_entry(theta.theta_up(i), alpha,
                             grad_entry_up(s, xi_p, b.Q(i)));
      new_lo(i) = prox_entry(theta.theta_lo(i), alpha,
                             grad_entry_lo(s, xi_p, b.Q(i)));
    }
    const double omega_next = momentum_next(omega);
    const double coeff = (omega - 1.0) / omega_next;
    ExtrapolationPoint theta_next;
    theta_next.theta_up.resize(n);
    theta_next.theta_lo.resize(n);
    for (int i = 0; i < n; ++i) {
      theta_next.theta_up(i) =
          extrapolate_entry(new_up(i), lam.lambda_up(i), coeff);
      theta_next.theta_lo(i) =
          extrapolate_entry(new_lo(i), lam.lambda_lo(i), coeff);
    }
    for (int i = 0; i < n; ++i) {
      const double s = btilde_row_diff(m.Btilde, i, new_up, new_lo);
      q(i) = recover_entry(s, m.xi * p(i));
    }
    if (keep_history) {
      res.history.push_back(
          IterationRecord{q, DualPoint{new_up, new_lo}, theta, omega});
    }
    bool done = false;
    if (k >= 2) {
      const double d = (q - q_prev).cwiseAbs().maxCoeff();
      if (d <= stop.tau) {
        if (++streak >= stop.window) {
          res.converged_at = k;
          done = true;
        }
      } else {
        streak = 0;
      }
    }
    q_prev = q;
    lam.lambda_up = new_up;
    lam.lambda_lo = new_lo;
    theta = theta_next;
    omega = omega_next;
    if (done) break;
  }

  res.lam = lam;
  res.q = q;
  res.iterations = executed;
  return res;
}

Eigen::VectorXd solve_centralized(const GridMatrices& m,
                                  const Eigen::VectorXd& p, const QpBounds& b,
                                  double tol) {
  const int n = static_cast<int>(p.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.X);
  const double lmax = es.eigenvalues().maxCoeff();
  const double step = 1.0 / (lmax * lmax);
  const Eigen::VectorXd base = m.R * p;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  const long cap = 5000000;
  for (long t = 0; t < cap; ++t) {
    const Eigen::VectorXd grad = m.X * (base + m.X * q);
    Eigen::VectorXd qn =
        (q - step * grad).cwiseMax(-b.Q).cwiseMin(b.Q);
    const double move = (qn - q).lpNorm<Eigen::Infinity>();
    q = qn;
    if (move <= tol) break;
  }
  return q;
}

KktReport kkt_residuals(const GridMatrices& m, const Eigen::VectorXd& q,
                        const DualPoint& d, const Eigen::VectorXd& p,
                        const QpBounds& b) {
  const int n = static_cast<int>(p.size());
  KktReport rep;
  const Eigen::VectorXd stat =
      m.X * (m.R * p + m.X * q) + d.lambda_up - d.lambda_lo;
  rep.stationarity_residual = stat.lpNorm<Eigen::Infinity>();
  for (int i = 0; i < n; ++i) {
    rep.primal_violation =
        std::max(rep.primal_violation, std::abs(q(i)) - b.Q(i));
    rep.comp_slack_up = std::max(rep.comp_slack_up,
                                 std::abs(d.lambda_up(i) * (q(i) - b.Q(i))));
    rep.comp_slack_lo = std::max(rep.comp_slack_lo,
                                 std::abs(d.lambda_lo(i) * (q(i) + b.Q(i))));
  }
  rep.primal_violation = std::max(rep.primal_violation, 0.0);
  return rep;
}

}  // namespace varsim
