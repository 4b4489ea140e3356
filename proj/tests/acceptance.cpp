// Acceptance suite. Runs the bundled scenarios end to end and checks the
// published behavior of every component: convergence speed, the saturation
// pattern, solver equivalence, exact decomposition, attack efficacy and
// stealth, the symmetric-offset cancellation, coupling-matrix structure, and
// the scalar kernels. Prints one PASS/FAIL line per criterion.
//
// usage: acceptance <scenarios-dir>

#include "varsim/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace varsim;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<RawEdge> random_tree(std::mt19937& rng, int n, double ratio) {
  std::uniform_real_distribution<double> xdist(0.1, 2.0);
  std::vector<RawEdge> edges;
  for (int child = 1; child <= n; ++child) {
    std::uniform_int_distribution<int> pdist(0, child - 1);
    const double x = xdist(rng);
    edges.push_back({pdist(rng), child, ratio * x, x});
  }
  return edges;
}

// child ids of the edges on the path from `node` up to the substation
std::vector<int> path_edges(const FeederGraph& g, int node) {
  std::vector<int> out;
  for (int cur = node; cur != 0;
       cur = g.edges[static_cast<std::size_t>(cur - 1)].parent) {
    out.push_back(cur);
  }
  return out;
}

double shared_path_sum(const FeederGraph& g, int i, int j, bool use_r) {
  const std::vector<int> pi = path_edges(g, i);
  const std::vector<int> pj = path_edges(g, j);
  double sum = 0.0;
  for (int e : pi) {
    for (int f : pj) {
      if (e == f) {
        const Edge& ed = g.edges[static_cast<std::size_t>(e - 1)];
        sum += use_r ? ed.r_ohm : ed.x_ohm;
      }
    }
  }
  return 2.0 * sum;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double band_of(const Eigen::VectorXd& v, double mu) {
  return (v.array() - mu).abs().maxCoeff();
}

int g_failures = 0;

void report(const char* id, const char* name, bool ok,
            const std::string& detail) {
  std::printf("%s %-28s %s  (%s)\n", id, name, ok ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

template <typename Fn>
void criterion(const char* id, const char* name, Fn fn) {
  try {
    auto [ok, detail] = fn();
    report(id, name, ok, detail);
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <scenarios-dir>\n");
    return 2;
  }
  const std::string dir = argv[1];
  const ScenarioDoc baseline_doc = load_scenario(dir + "/fig6_baseline.json");
  const ScenarioDoc attack_doc = load_scenario(dir + "/fig6_attack.json");

  // shared baseline run for criteria 1 and 2
  SimulationTrace base_trace;
  SimulationConfig base_cfg;
  double base_seconds = 0.0;
  bool base_ready = false;
  try {
    base_cfg = build_config(baseline_doc);
    const Clock::time_point t0 = Clock::now();
    base_trace = run_simulation(base_cfg);
    base_seconds = seconds_since(t0);
    base_ready = true;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "baseline run failed: %s\n", e.what());
  }

  criterion("C1", "case-study convergence", [&]() {
    if (!base_ready) return std::pair{false, std::string("baseline run failed")};
    const double tau = base_cfg.stop.tau;
    int last_bad = 1;
    for (std::size_t k = 1; k < base_trace.records.size(); ++k) {
      const double d = (base_trace.records[k].q - base_trace.records[k - 1].q)
                           .cwiseAbs()
                           .maxCoeff();
      if (d > tau) last_bad = static_cast<int>(k) + 1;
    }
    const int settle = last_bad + 1;
    const bool ok = base_trace.converged_at.has_value() && settle <= 2000 &&
                    base_seconds < 5.0;
    return std::pair{
        ok, fmt("settle=%d limit=2000, fired=%d, %.2fs", settle,
                base_trace.converged_at.value_or(-1), base_seconds)};
  });

  criterion("C2", "saturation pattern", [&]() {
    if (!base_ready) return std::pair{false, std::string("baseline run failed")};
    const Eigen::VectorXd& q = base_trace.records.back().q;
    const Eigen::VectorXd& Q = base_cfg.bounds.Q;
    const double e3 = std::abs(q(2) + Q(2));
    const double e4 = std::abs(q(3) + Q(3));
    const bool ok = e3 <= 1.0 && e4 <= 1.0 && q(4) <= -1000.0;
    return std::pair{ok, fmt("|q3+Q3|=%.3f var, |q4+Q4|=%.3f var (<=1), "
                             "q5=%.1f var (<=-1000)",
                             e3, e4, q(4))};
  });

  criterion("C3", "oracle equivalence", [&]() {
    const Clock::time_point t0 = Clock::now();
    const SimulationConfig cfg = build_config(baseline_doc);
    const double cap = 1e-4 * cfg.bounds.Q.maxCoeff();
    const FistaResult tight =
        fista_solve(cfg.mats, cfg.p, cfg.bounds, {0.0, 150000, 150000});
    const Eigen::VectorXd qc =
        solve_centralized(cfg.mats, cfg.p, cfg.bounds, 1e-9);
    const double fig6_err = (tight.q - qc).cwiseAbs().maxCoeff();

    const DualPoint kd{tight.lam.lambda_up / 1000.0,
                       tight.lam.lambda_lo / 1000.0};
    const KktReport kkt =
        kkt_residuals(cfg.mats, tight.q / 1000.0, kd, cfg.p / 1000.0,
                      QpBounds{cfg.bounds.Q / 1000.0});
    const double kkt_max =
        std::max(std::max(kkt.primal_violation, kkt.stationarity_residual),
                 std::max(kkt.comp_slack_up, kkt.comp_slack_lo));

    std::mt19937 rng(4077);
    std::uniform_real_distribution<double> inj(-4000.0, 4000.0);
    std::uniform_real_distribution<double> ratio_dist(1.0, 3.0);
    double tree_err = 0.0;
    bool trees_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 1 + static_cast<int>(rng() % 10);
      const GridMatrices m = build_grid_matrices(
          parse_feeder(random_tree(rng, n, ratio_dist(rng))));
      Eigen::VectorXd p(n), Q(n);
      for (int i = 0; i < n; ++i) {
        p(i) = inj(rng);
        const double pt = std::min(std::abs(p(i)), 4500.0);
        Q(i) = std::sqrt(5000.0 * 5000.0 - pt * pt);
      }
      const QpBounds b{Q};
      const FistaResult r = fista_solve(m, p, b, {1e-3, 200, 300000});
      const Eigen::VectorXd oracle = solve_centralized(m, p, b, 1e-9);
      const double err = (r.q - oracle).cwiseAbs().maxCoeff();
      tree_err = std::max(tree_err, err);
      if (err > 1e-4 * Q.maxCoeff()) trees_ok = false;
    }
    const double secs = seconds_since(t0);
    const bool ok =
        fig6_err <= cap && kkt_max <= 1e-4 && trees_ok && secs < 30.0;
    return std::pair{ok, fmt("fig6 err=%.2e var (cap %.2e), kkt=%.2e, "
                             "worst tree err=%.2e var, %.1fs",
                             fig6_err, cap, kkt_max, tree_err, secs)};
  });

  criterion("C4", "lockstep decomposition", [&]() {
    SimulationConfig cfg = build_config(baseline_doc);
    cfg.stop.max_iterations = 100;
    const SimulationTrace trace = run_simulation(cfg);
    const FistaResult ref =
        fista_solve(cfg.mats, cfg.p, cfg.bounds, cfg.stop, true);
    if (trace.records.size() != 100 || ref.history.size() != 100) {
      return std::pair{false, std::string("trajectory length mismatch")};
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
      const SimulationRecord& a = trace.records[k];
      const IterationRecord& b = ref.history[k];
      worst = std::max(worst, (a.q - b.q).cwiseAbs().maxCoeff());
      worst = std::max(worst,
                       (a.lambda_up - b.lam.lambda_up).cwiseAbs().maxCoeff());
      worst = std::max(worst,
                       (a.lambda_lo - b.lam.lambda_lo).cwiseAbs().maxCoeff());
      worst = std::max(worst,
                       (a.theta_up - b.theta.theta_up).cwiseAbs().maxCoeff());
      worst = std::max(worst,
                       (a.theta_lo - b.theta.theta_lo).cwiseAbs().maxCoeff());
      worst = std::max(worst, std::abs(a.omega - b.omega));
    }
    return std::pair{worst <= 1e-12,
                     fmt("max componentwise diff over 100 rounds = %.1e "
                         "(cap 1e-12)",
                         worst)};
  });

  criterion("C5", "attack efficacy", [&]() {
    SimulationConfig cfg = build_config(attack_doc);
    const int node = cfg.attack->attacker;
    const OffsetSearchResult found = search_attack_offset(cfg, node, 0.0);
    if (!found.success) {
      return std::pair{false, fmt("search failed: best |q|=%.1f var after %d "
                                  "evaluations",
                                  std::abs(found.achieved_q),
                                  found.evaluations)};
    }
    cfg.attack->offset_up = found.offset;
    cfg.attack->offset_lo = 0.0;
    std::vector<AgentState> agents;
    const SimulationTrace tr = run_simulation(cfg, &agents);
    const int pre_idx = cfg.attack->start_iteration - 2;
    if (!tr.converged_at ||
        pre_idx >= static_cast<int>(tr.records.size())) {
      return std::pair{false, std::string("attacked run did not settle")};
    }
    const double q5 = tr.records.back().q(node - 1);
    const double pre =
        band_of(tr.records[static_cast<std::size_t>(pre_idx)].v, cfg.mu);
    const double post = band_of(tr.records.back().v, cfg.mu);
    double view_excess = 0.0;
    for (int i = 0; i < cfg.feeder.node_count; ++i) {
      view_excess = std::max(view_excess,
                             std::abs(agents[static_cast<std::size_t>(i)].q) -
                                 cfg.bounds.Q(i));
    }
    const bool ok =
        std::abs(q5) <= 50.0 && post <= pre + 1.0 && view_excess <= 1.0;
    return std::pair{
        ok, fmt("offset=%.3f, |q5|=%.3f var (<=50), band %.2f V -> %.2f V "
                "(cap +1), view excess=%.2e var (<=1)",
                found.offset, std::abs(q5), pre, post, view_excess)};
  });

  criterion("C6", "symmetric-offset no-op", [&]() {
    SimulationConfig honest = build_config(baseline_doc);
    SimulationConfig shammed = honest;
    shammed.attack = AttackSpec{5, 1500, 777.0, 777.0, false};
    const SimulationTrace ta = run_simulation(honest);
    const SimulationTrace tb = run_simulation(shammed);
    const std::string pa = "/tmp/varsim_acceptance_c6_honest.csv";
    const std::string pb = "/tmp/varsim_acceptance_c6_offset.csv";
    write_trace_csv(pa, ta);
    write_trace_csv(pb, tb);
    const std::string ba = slurp(pa);
    const std::string bb = slurp(pb);
    std::remove(pa.c_str());
    std::remove(pb.c_str());
    const bool ok = !ba.empty() && ba == bb;
    return std::pair{ok, fmt("traces %zu bytes, byte-identical=%s",
                             ba.size(), ba == bb ? "yes" : "no")};
  });

  criterion("C7", "two-hop structure", [&]() {
    std::mt19937 rng(90210);
    std::uniform_real_distribution<double> ratio_dist(0.5, 3.0);
    double worst_rel = 0.0;
    bool support_ok = true;
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 1 + static_cast<int>(rng() % 30);
      const FeederGraph g = parse_feeder(random_tree(rng, n, ratio_dist(rng)));
      const GridMatrices m = build_grid_matrices(g);
      for (int i = 1; i <= n; ++i) {
        std::vector<int> hood = two_hop_neighbors(g, i);
        hood.push_back(i);
        for (int j = 1; j <= n; ++j) {
          const bool inside =
              std::find(hood.begin(), hood.end(), j) != hood.end();
          if (!inside && m.Btilde(i - 1, j - 1) != 0.0) support_ok = false;
        }
      }
      for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) {
          const double ro = shared_path_sum(g, i, j, true);
          const double xo = shared_path_sum(g, i, j, false);
          const double rerr = std::abs(m.R(i - 1, j - 1) - ro) /
                              std::max(1.0, std::abs(ro));
          const double xerr = std::abs(m.X(i - 1, j - 1) - xo) /
                              std::max(1.0, std::abs(xo));
          worst_rel = std::max(worst_rel, std::max(rerr, xerr));
        }
      }
    }
    const bool ok = support_ok && worst_rel <= 1e-10;
    return std::pair{ok, fmt("support exact-zero outside two-hop=%s, "
                             "path-sum rel err=%.1e (cap 1e-10)",
                             support_ok ? "yes" : "no", worst_rel)};
  });

  criterion("C8", "kernel correctness", [&]() {
    const SimulationConfig cfg = build_config(baseline_doc);
    const int n = cfg.feeder.node_count;
    std::mt19937 rng(31337);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    const double eps = 1e-3;
    double grad_worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      ExtrapolationPoint t;
      t.theta_up = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
      t.theta_lo = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
      Eigen::VectorXd gu, gl;
      dual_gradient(cfg.mats, t, cfg.p, cfg.bounds, gu, gl);
      for (int i = 0; i < n; ++i) {
        DualPoint hi{t.theta_up, t.theta_lo}, lo{t.theta_up, t.theta_lo};
        hi.lambda_up(i) += eps;
        lo.lambda_up(i) -= eps;
        double fd = (dual_value(cfg.mats, hi, cfg.p, cfg.bounds) -
                     dual_value(cfg.mats, lo, cfg.p, cfg.bounds)) /
                    (2.0 * eps);
        grad_worst = std::max(grad_worst,
                              std::abs(fd - gu(i)) / (1.0 + std::abs(gu(i))));
        hi = {t.theta_up, t.theta_lo};
        lo = {t.theta_up, t.theta_lo};
        hi.lambda_lo(i) += eps;
        lo.lambda_lo(i) -= eps;
        fd = (dual_value(cfg.mats, hi, cfg.p, cfg.bounds) -
              dual_value(cfg.mats, lo, cfg.p, cfg.bounds)) /
             (2.0 * eps);
        grad_worst = std::max(grad_worst,
                              std::abs(fd - gl(i)) / (1.0 + std::abs(gl(i))));
      }
    }

    // scalar proximal objective g*l + (l-theta)^2 / (2 alpha), minimized on a
    // grid over l >= 0; the kernel must sit within half a grid step
    const double alpha = 0.32;
    double prox_worst = 0.0;
    const double cases[][2] = {{1.0, 1.0}, {0.5, 2.0}, {0.0, -1.5},
                               {2.0, -0.3}, {0.25, 5.0}};
    for (const auto& c : cases) {
      const double theta = c[0], g = c[1];
      double best_l = 0.0, best_f = g * 0.0 + theta * theta / (2.0 * alpha);
      for (double l = 0.0; l <= 6.0; l += 1e-4) {
        const double f = g * l + (l - theta) * (l - theta) / (2.0 * alpha);
        if (f < best_f) {
          best_f = f;
          best_l = l;
        }
      }
      prox_worst =
          std::max(prox_worst, std::abs(best_l - prox_entry(theta, alpha, g)));
    }

    double w = 1.0;
    long double wl = 1.0L;
    double momentum_worst = 0.0;
    for (int k = 0; k < 5000; ++k) {
      w = momentum_next(w);
      wl = (1.0L + sqrtl(1.0L + 4.0L * wl * wl)) / 2.0L;
      momentum_worst =
          std::max(momentum_worst,
                   std::abs(w - static_cast<double>(wl)) /
                       static_cast<double>(wl));
    }

    const bool ok =
        grad_worst <= 1e-6 && prox_worst <= 5e-5 + 1e-12 &&
        momentum_worst <= 1e-14;
    return std::pair{ok, fmt("grad fd rel=%.1e (<=1e-6), prox grid gap=%.1e "
                             "(<=5e-5), momentum rel=%.1e (<=1e-14)",
                             grad_worst, prox_worst, momentum_worst)};
  });

  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criteria failed\n", g_failures);
  return 1;
}
