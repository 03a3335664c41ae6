#include "pintoc/sweeper.hpp"

#include <cmath>
#include <stdexcept>

namespace pintoc {

SpatialField StepRhs::eval_reaction(int node, const SpatialField& y) const {
  switch (reaction.kind) {
    case Reaction::Kind::none:
      return SpatialField(y.grid(), 0.0);
    case Reaction::Kind::cubic: {
      SpatialField r(y.grid());
      const double third = reaction.gamma / 3.0;
      for (int i = 0; i < y.size(); ++i) r[i] = -(third * y[i] * y[i] * y[i] - y[i]);
      return r;
    }
    case Reaction::Kind::linear_field: {
      const SpatialField& c = reaction.coeff.at(node);
      SpatialField r(y.grid());
      for (int i = 0; i < y.size(); ++i) r[i] = -c[i] * y[i];
      return r;
    }
  }
  throw std::logic_error("unreachable");
}

NodeTrajectory make_trajectory(int step_index, double t0, double dt, const QuadratureRule& rule,
                               const StepRhs& rhs, const SpatialField& y0) {
  NodeTrajectory traj;
  traj.step_index = step_index;
  traj.t0 = t0;
  traj.t1 = t0 + dt;
  traj.y.assign(rule.num_nodes, y0);
  traj.f_lin.assign(rule.num_nodes, SpatialField(y0.grid()));
  if (rhs.reaction.present()) traj.f_react.assign(rule.num_nodes, SpatialField(y0.grid()));
  evaluate_rhs(traj, rhs);
  return traj;
}

void evaluate_rhs_node(NodeTrajectory& traj, const StepRhs& rhs, int node) {
  const SpatialField& y = traj.y[node];
  SpatialField lin = rhs.kappa != 0.0 ? rhs.kappa * laplacian(y) : SpatialField(y.grid(), 0.0);
  if (rhs.shift != 0.0) lin.axpy(-rhs.shift, y);
  traj.f_lin[node] = std::move(lin);
  if (rhs.reaction.present()) traj.f_react[node] = rhs.eval_reaction(node, y);
}

void evaluate_rhs(NodeTrajectory& traj, const StepRhs& rhs) {
  for (int m = 0; m < traj.num_nodes(); ++m) evaluate_rhs_node(traj, rhs, m);
}

void set_initial_value(NodeTrajectory& traj, const StepRhs& rhs, const SpatialField& y0) {
  traj.y[0] = y0;
  evaluate_rhs_node(traj, rhs, 0);
}

namespace {

// Pointwise solve of y - a*r(y) = b for the reaction part of a MISDC
// substep. For the cubic reaction the lagged mode linearizes with the
// provisional y*, the newton mode runs damped Newton with the natural
// monotonicity test; the linear_field reaction is solved exactly either way.
SpatialField reaction_solve_impl(const StepRhs& rhs, int node, const SpatialField& b, double a,
                            const SpatialField& lag_state, const SpatialField& guess, SweeperKind kind,
                            int step_index) {
  switch (rhs.reaction.kind) {
    case Reaction::Kind::none:
      return b;
    case Reaction::Kind::linear_field: {
      const SpatialField& c = rhs.reaction.coeff.at(node);
      SpatialField y(b.grid());
      for (int i = 0; i < b.size(); ++i) y[i] = b[i] / (1.0 + a * c[i]);
      return y;
    }
    case Reaction::Kind::cubic:
      break;
  }

  const double third = rhs.reaction.gamma / 3.0;
  if (kind == SweeperKind::misdc_lagged) {
    SpatialField y(b.grid());
    for (int i = 0; i < b.size(); ++i) {
      const double q = third * lag_state[i] * lag_state[i] - 1.0;
      y[i] = b[i] / (1.0 + a * q);
    }
    return y;
  }

  // Damped Newton on g(y) = y + a*(gamma/3 y^3 - y) - b, pointwise-diagonal,
  // initial guess = previous-iterate node value. Correction tolerance 1e-12
  // in the discrete l2 norm, max 50 iterations, max 8 halvings per step.
  SpatialField y = guess;
  const int n = y.size();
  std::vector<double> delta(n);
  for (int it = 0; it < 50; ++it) {
    double norm2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = y[i] + a * (third * y[i] * y[i] * y[i] - y[i]) - b[i];
      const double gp = 1.0 + a * (rhs.reaction.gamma * y[i] * y[i] - 1.0);
      delta[i] = -g / gp;
      norm2 += delta[i] * delta[i];
    }
    const double dnorm = std::sqrt(norm2);
    if (!std::isfinite(dnorm)) throw std::runtime_error("misdc newton: non-finite iterate at step " +
                                                        std::to_string(step_index) + ", node " +
                                                        std::to_string(node));
    double lambda = 1.0;
    for (int half = 0; half < 8; ++half) {
      // Simplified-Newton correction at the trial point, same Jacobian.
      double trial2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double yt = y[i] + lambda * delta[i];
        const double g = yt + a * (third * yt * yt * yt - yt) - b[i];
        const double gp = 1.0 + a * (rhs.reaction.gamma * y[i] * y[i] - 1.0);
        const double d = -g / gp;
        trial2 += d * d;
      }
      if (std::sqrt(trial2) <= (1.0 - 0.5 * lambda) * dnorm || dnorm == 0.0) break;
      lambda *= 0.5;
    }
    for (int i = 0; i < n; ++i) y[i] += lambda * delta[i];
    if (lambda * dnorm <= 1e-12) return y;
  }
  // Report the worst point for diagnosis.
  int worst = 0;
  double worst_g = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = std::abs(y[i] + a * (third * y[i] * y[i] * y[i] - y[i]) - b[i]);
    if (g > worst_g) {
      worst_g = g;
      worst = i;
    }
  }
  throw std::runtime_error("misdc newton: no convergence after 50 iterations at step " +
                           std::to_string(step_index) + ", node " + std::to_string(node) + ", point " +
                           std::to_string(worst));
}

}  // namespace

SpatialField misdc_reaction_solve(const StepRhs& rhs, int node, const SpatialField& b, double a,
                                  const SpatialField& lag_state, const SpatialField& guess,
                                  SweeperKind kind, int step_index) {
  return reaction_solve_impl(rhs, node, b, a, lag_state, guess, kind, step_index);
}

void sweep(NodeTrajectory& traj, const QuadratureRule& rule, const StepRhs& rhs, double dt,
           SweeperKind kind) {
  const int m_max = rule.max_node();
  const bool react = rhs.reaction.present();
  const bool react_implicit = react && kind != SweeperKind::imex;
  const SpatialField& y0 = traj.y[0];

  // Old-iterate part of the substep right-hand sides (full-accuracy Q terms
  // minus the correction weights), assembled before any node is updated.
  std::vector<SpatialField> base;
  base.reserve(m_max);
  for (int m = 1; m <= m_max; ++m) {
    SpatialField acc = y0;
    if (!traj.tau.empty()) acc += traj.tau[m];
    for (int i = 0; i <= m_max; ++i) {
      acc.axpy(dt * (rule.Q(m, i) - rule.QI(m, i)), traj.f_lin[i]);
      if (react) {
        const double w = react_implicit ? rule.Q(m, i) - rule.QI(m, i) : rule.Q(m, i) - rule.QE(m, i);
        acc.axpy(dt * w, traj.f_react[i]);
      }
      if (!rhs.source.empty()) acc.axpy(dt * rule.Q(m, i), rhs.source[i]);
    }
    base.push_back(std::move(acc));
  }

  for (int m = 1; m <= m_max; ++m) {
    SpatialField sub = std::move(base[m - 1]);
    for (int i = 0; i < m; ++i) {
      sub.axpy(dt * rule.QI(m, i), traj.f_lin[i]);
      if (react) {
        const double w = react_implicit ? rule.QI(m, i) : rule.QE(m, i);
        sub.axpy(dt * w, traj.f_react[i]);
      }
    }
    const double a = dt * rule.QI(m, m);

    if (!react_implicit) {
      traj.y[m] = implicit_solve(sub, a, rhs.kappa, rhs.shift);
      // f_lin recovered algebraically; exact for the diagonal spectral solve.
      SpatialField flin = traj.y[m] - sub;
      flin *= 1.0 / a;
      traj.f_lin[m] = std::move(flin);
      if (react) traj.f_react[m] = rhs.eval_reaction(m, traj.y[m]);
    } else {
      // Diffusion pass with the lagged reaction value at this node, then the
      // pointwise reaction correction.
      SpatialField diff_rhs = sub;
      diff_rhs.axpy(a, traj.f_react[m]);
      SpatialField y_star = implicit_solve(diff_rhs, a, rhs.kappa, rhs.shift);
      SpatialField f_lin_star = y_star - diff_rhs;
      f_lin_star *= 1.0 / a;

      SpatialField b = sub;
      b.axpy(a, f_lin_star);
      traj.y[m] = reaction_solve_impl(rhs, m, b, a, y_star, traj.y[m], kind, traj.step_index);
      SpatialField fr = traj.y[m] - b;
      fr *= 1.0 / a;
      traj.f_react[m] = std::move(fr);
      // Keep f_lin consistent with the final node value.
      SpatialField flin = rhs.kappa != 0.0 ? rhs.kappa * laplacian(traj.y[m]) : SpatialField(traj.y[m].grid(), 0.0);
      if (rhs.shift != 0.0) flin.axpy(-rhs.shift, traj.y[m]);
      traj.f_lin[m] = std::move(flin);
    }
  }

  traj.residual_norm = residual(traj, rule, rhs, dt);
}

double residual(const NodeTrajectory& traj, const QuadratureRule& rule, const StepRhs& rhs, double dt) {
  const int m_max = rule.max_node();
  const bool react = rhs.reaction.present();
  double worst = 0.0;
  for (int m = 1; m <= m_max; ++m) {
    SpatialField r = traj.y[0];
    for (int i = 0; i <= m_max; ++i) {
      r.axpy(dt * rule.Q(m, i), traj.f_lin[i]);
      if (react) r.axpy(dt * rule.Q(m, i), traj.f_react[i]);
      if (!rhs.source.empty()) r.axpy(dt * rule.Q(m, i), rhs.source[i]);
    }
    if (!traj.tau.empty()) r += traj.tau[m];
    r -= traj.y[m];
    worst = std::max(worst, l2_norm(r));
  }
  return worst;
}

std::vector<SpatialField> apply_node_matrix(const DenseMatrix& m, const std::vector<SpatialField>& fields) {
  if (m.cols() != static_cast<int>(fields.size()))
    throw std::invalid_argument("apply_node_matrix: shape mismatch");
  std::vector<SpatialField> out;
  out.reserve(m.rows());
  for (int r = 0; r < m.rows(); ++r) {
    SpatialField acc(fields[0].grid(), 0.0);
    for (int c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0.0) acc.axpy(m(r, c), fields[c]);
    out.push_back(std::move(acc));
  }
  return out;
}

std::vector<SpatialField> fas_tau(const NodeTrajectory& fine, const StepRhs& fine_rhs,
                                  const QuadratureRule& fine_rule, const NodeTrajectory& coarse,
                                  const StepRhs& coarse_rhs, const QuadratureRule& coarse_rule,
                                  const DenseMatrix& node_restrict, const GridSpec& coarse_grid, double dt) {
  if (coarse.num_nodes() != coarse_rule.num_nodes || fine.num_nodes() != fine_rule.num_nodes)
    throw std::invalid_argument("fas_tau: trajectory/rule node count mismatch");

  const int mf = fine_rule.max_node();
  const int mc = coarse_rule.max_node();
  const bool react_f = fine_rhs.reaction.present();
  const bool react_c = coarse_rhs.reaction.present();

  // Fine node integrals dt * (Q_f F_f)_m, then restrict in time and space.
  std::vector<SpatialField> fine_int;
  fine_int.reserve(mf + 1);
  for (int m = 0; m <= mf; ++m) {
    SpatialField acc(fine.y[0].grid(), 0.0);
    for (int i = 0; i <= mf; ++i) {
      acc.axpy(dt * fine_rule.Q(m, i), fine.f_lin[i]);
      if (react_f) acc.axpy(dt * fine_rule.Q(m, i), fine.f_react[i]);
      if (!fine_rhs.source.empty()) acc.axpy(dt * fine_rule.Q(m, i), fine_rhs.source[i]);
    }
    fine_int.push_back(std::move(acc));
  }
  auto restricted = apply_node_matrix(node_restrict, fine_int);
  for (auto& f : restricted) f = transfer(f, coarse_grid);

  std::vector<SpatialField> tau;
  tau.reserve(mc + 1);
  for (int m = 0; m <= mc; ++m) {
    SpatialField t = std::move(restricted[m]);
    for (int i = 0; i <= mc; ++i) {
      t.axpy(-dt * coarse_rule.Q(m, i), coarse.f_lin[i]);
      if (react_c) t.axpy(-dt * coarse_rule.Q(m, i), coarse.f_react[i]);
      if (!coarse_rhs.source.empty()) t.axpy(-dt * coarse_rule.Q(m, i), coarse_rhs.source[i]);
    }
    tau.push_back(std::move(t));
  }

  if (!fine.tau.empty()) {
    auto tau_f = apply_node_matrix(node_restrict, fine.tau);
    for (int m = 0; m <= mc; ++m) tau[m] += transfer(tau_f[m], coarse_grid);
  }
  return tau;
}

SpatialField interpolate_in_step(const NodeTrajectory& traj, const QuadratureRule& rule, double theta) {
  auto p = lagrange_interpolation_matrix(rule.nodes, {theta});
  SpatialField acc(traj.y[0].grid(), 0.0);
  for (int i = 0; i < rule.num_nodes; ++i) acc.axpy(p(0, i), traj.y[i]);
  return acc;
}

}  // namespace pintoc
