#include "pintoc/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace pintoc {

OptimizerConfig default_config(OptMethod method, BetaRule beta) {
  OptimizerConfig cfg;
  cfg.method = method;
  cfg.beta = beta;
  cfg.linesearch = method == OptMethod::sd ? LineSearchKind::armijo : LineSearchKind::strong_wolfe;
  return cfg;
}

void validate_config(const OptimizerConfig& cfg) {
  if (!(0.0 < cfg.c1 && cfg.c1 < cfg.c2 && cfg.c2 < 1.0))
    throw std::invalid_argument("optimizer: Wolfe constants must satisfy 0 < c1 < c2 < 1");
  if (cfg.max_opt_iters < 1 || cfg.max_ls_trials < 1 || cfg.initial_step <= 0.0)
    throw std::invalid_argument("optimizer: invalid iteration/step limits");
  if (cfg.method == OptMethod::ncg && cfg.linesearch != LineSearchKind::strong_wolfe)
    throw std::invalid_argument("optimizer: ncg requires the strong Wolfe line search");
}

double time_inner(const ControlTrajectory& v, const ControlTrajectory& w) {
  if (!v.compatible_with(w)) throw std::invalid_argument("time_inner: decomposition mismatch");
  const TimeDecomposition& td = v.decomposition();
  const int n = td.num_steps;
  const int r = td.num_workers;
  const int m_last = v.nodes_per_step() - 1;

  std::vector<double> partial(r, 0.0);
  for (int wk = 0; wk < r; ++wk)
    for (int s = wk; s < n; s += r) {
      const double gl = inner(v.at(s, 0), w.at(s, 0));
      const double gr = inner(v.at(s, m_last), w.at(s, m_last));
      partial[wk] += 0.5 * td.dt * (gl + gr);
    }
  double total = 0.0;
  for (int wk = 0; wk < r; ++wk) total += partial[wk];
  return total;
}

double time_norm(const ControlTrajectory& v) { return std::sqrt(time_inner(v, v)); }

std::optional<double> beta_value(const ControlTrajectory& g_new, const ControlTrajectory& g_old,
                                 const ControlTrajectory& d_old, BetaRule rule) {
  const double gg_new = time_inner(g_new, g_new);
  switch (rule) {
    case BetaRule::fr: {
      const double gg_old = time_inner(g_old, g_old);
      if (gg_old <= 0.0) return std::nullopt;
      return gg_new / gg_old;
    }
    case BetaRule::prp: {
      const double gg_old = time_inner(g_old, g_old);
      if (gg_old <= 0.0) return std::nullopt;
      ControlTrajectory diff = g_new;
      diff.axpy(-1.0, g_old);
      return time_inner(g_new, diff) / gg_old;
    }
    case BetaRule::dy: {
      ControlTrajectory diff = g_new;
      diff.axpy(-1.0, g_old);
      const double den = time_inner(d_old, diff);
      if (std::abs(den) < 1e-300 || !std::isfinite(den)) return std::nullopt;
      return gg_new / den;
    }
  }
  return std::nullopt;
}

namespace {

ControlTrajectory advance(const ControlTrajectory& u, double alpha, const ControlTrajectory& d) {
  ControlTrajectory out = u;
  out.axpy(alpha, d);
  return out;
}

LineSearchResult armijo_search(ObjectiveEvaluator& eval, const ControlTrajectory& u,
                               const ControlTrajectory& d, double j_u, double slope,
                               double initial_step, const OptimizerConfig& cfg) {
  LineSearchResult res;
  double alpha = initial_step;
  for (int trial = 0; trial < cfg.max_ls_trials; ++trial) {
    ControlTrajectory u_try = advance(u, alpha, d);
    const double j_try = eval.objective_only(u_try);
    res.trials += 1;
    res.state_solves += 1;
    if (j_try <= j_u + cfg.c1 * alpha * slope) {
      res.success = true;
      res.alpha = alpha;
      res.objective = j_try;
      res.gradient = eval.evaluate_archived(u_try);
      return res;
    }
    alpha *= 0.5;
  }
  return res;
}

LineSearchResult wolfe_search(ObjectiveEvaluator& eval, const ControlTrajectory& u,
                              const ControlTrajectory& d, double j_u, double slope,
                              double initial_step, const OptimizerConfig& cfg) {
  LineSearchResult res;
  const double c1 = cfg.c1, c2 = cfg.c2;

  auto phi = [&](double alpha, GradientResult& out) {
    ControlTrajectory u_try = advance(u, alpha, d);
    out = eval.evaluate(u_try);
    res.trials += 1;
    res.state_solves += 1;
    return std::pair<double, double>{out.objective, time_inner(out.gradient, d)};
  };
  auto zoom = [&](double lo, double j_lo, double hi) -> bool {
    GradientResult g;
    while (res.trials < cfg.max_ls_trials) {
      const double alpha = 0.5 * (lo + hi);
      auto [j, dj] = phi(alpha, g);
      if (j > j_u + c1 * alpha * slope || j >= j_lo) {
        hi = alpha;
        continue;
      }
      if (std::abs(dj) <= -c2 * slope) {
        res.success = true;
        res.alpha = alpha;
        res.objective = j;
        res.gradient = std::move(g);
        return true;
      }
      if (dj * (hi - lo) >= 0.0) hi = lo;
      lo = alpha;
      j_lo = j;
    }
    return false;
  };

  double alpha_prev = 0.0;
  double j_prev = j_u;
  double alpha = initial_step;
  GradientResult g;
  for (int i = 0; res.trials < cfg.max_ls_trials; ++i) {
    auto [j, dj] = phi(alpha, g);
    if (j > j_u + c1 * alpha * slope || (i > 0 && j >= j_prev)) {
      res.success = zoom(alpha_prev, j_prev, alpha);
      return res;
    }
    if (std::abs(dj) <= -c2 * slope) {
      res.success = true;
      res.alpha = alpha;
      res.objective = j;
      res.gradient = std::move(g);
      return res;
    }
    if (dj >= 0.0) {
      res.success = zoom(alpha, j, alpha_prev);
      return res;
    }
    alpha_prev = alpha;
    j_prev = j;
    alpha *= 2.0;
  }
  return res;
}

}  // namespace

LineSearchResult line_search(ObjectiveEvaluator& eval, const ControlTrajectory& u,
                             const ControlTrajectory& d, double j_u, double slope,
                             double initial_step, const OptimizerConfig& cfg) {
  if (slope >= 0.0) throw std::invalid_argument("line_search: direction is not a descent direction");
  return cfg.linesearch == LineSearchKind::armijo
             ? armijo_search(eval, u, d, j_u, slope, initial_step, cfg)
             : wolfe_search(eval, u, d, j_u, slope, initial_step, cfg);
}

OptimizeResult optimize(ObjectiveEvaluator& eval, const ControlTrajectory& u0,
                        const OptimizerConfig& cfg) {
  validate_config(cfg);
  const auto t_begin = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  };

  OptimizeResult out;
  out.u = u0;
  out.termination = "max_iters";

  GradientResult cur = eval.evaluate(out.u);
  if (!cur.report.converged()) {
    out.termination = "solver_failure";
    // fall through with partial history below
  }
  ControlTrajectory g = cur.gradient;
  ControlTrajectory d = g;
  d *= -1.0;
  double slope = -time_inner(g, g);

  long prev_state = eval.cumulative_state_sweeps();
  long prev_adjoint = eval.cumulative_adjoint_sweeps();
  IterationRecord rec0;
  rec0.iteration = 0;
  rec0.objective = cur.objective;
  rec0.grad_norm = time_norm(g);
  rec0.direction_slope = slope;
  rec0.state_sweeps = prev_state;
  rec0.adjoint_sweeps = prev_adjoint;
  rec0.wall_seconds = elapsed();
  out.history.push_back(rec0);
  if (out.termination == "solver_failure") return out;

  double alpha_accepted = cfg.initial_step;
  double slope_prev = slope;
  bool restarted_once = false;

  for (int k = 0; k < cfg.max_opt_iters; ++k) {
    if (out.history.back().grad_norm <= cfg.gradient_tol) {
      out.termination = "gradient_tol";
      break;
    }

    slope = time_inner(g, d);
    if (slope >= 0.0) {
      // not a descent direction: restart from steepest descent, no solve
      d = g;
      d *= -1.0;
      slope = -time_inner(g, g);
    }

    const double init_alpha =
        (k == 0) ? cfg.initial_step : std::max(1e-12, alpha_accepted * slope_prev / slope);

    auto ls = line_search(eval, out.u, d, out.history.back().objective, slope, init_alpha, cfg);
    if (!ls.success) {
      if (!restarted_once) {
        restarted_once = true;
        d = g;
        d *= -1.0;
        ls = line_search(eval, out.u, d, out.history.back().objective, -time_inner(g, g),
                         cfg.initial_step, cfg);
      }
      if (!ls.success) {
        out.termination = "line_search_failure";
        break;
      }
      slope = -time_inner(g, g);
    }

    out.u.axpy(ls.alpha, d);
    alpha_accepted = ls.alpha;
    slope_prev = slope;
    GradientResult next = *ls.gradient;

    double beta = 0.0;
    if (cfg.method == OptMethod::ncg) {
      auto b = beta_value(next.gradient, g, d, cfg.beta);
      beta = b.value_or(0.0);
      if (cfg.beta == BetaRule::prp && beta < 0.0) beta = 0.0;
    }
    ControlTrajectory d_next = next.gradient;
    d_next *= -1.0;
    d_next.axpy(beta, d);

    g = std::move(next.gradient);
    d = std::move(d_next);

    IterationRecord rec;
    rec.iteration = k + 1;
    rec.objective = ls.objective;
    rec.grad_norm = time_norm(g);
    rec.alpha = ls.alpha;
    rec.beta = beta;
    rec.direction_slope = time_inner(g, d);
    rec.state_sweeps = eval.cumulative_state_sweeps() - prev_state;
    rec.adjoint_sweeps = eval.cumulative_adjoint_sweeps() - prev_adjoint;
    prev_state = eval.cumulative_state_sweeps();
    prev_adjoint = eval.cumulative_adjoint_sweeps();
    rec.wall_seconds = elapsed();
    out.history.push_back(rec);

    if (!next.report.converged()) {
      out.termination = "solver_failure";
      break;
    }
    if (rec.grad_norm <= cfg.gradient_tol) {
      out.termination = "gradient_tol";
      break;
    }
  }
  return out;
}

void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history) {
  os << "iteration,objective,grad_norm,alpha,beta,state_sweeps,adjoint_sweeps,wall_seconds\n";
  for (const auto& r : history)
    os << r.iteration << ',' << r.objective << ',' << r.grad_norm << ',' << r.alpha << ',' << r.beta
       << ',' << r.state_sweeps << ',' << r.adjoint_sweeps << ',' << r.wall_seconds << '\n';
}

}  // namespace pintoc
