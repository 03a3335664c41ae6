#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pintoc/field.hpp"
#include "pintoc/quadrature.hpp"

namespace pintoc {

enum class SweeperKind { imex, misdc_lagged, misdc_newton };

/// Reaction contribution r(y) to the split right-hand side
///   y' = kappa*Laplacian(y) - shift*y + r(y) + source(t).
/// cubic:        r(y) = -(gamma/3 y^3 - y)            (Nagumo state)
/// linear_field: r(y) = -coeff_m .* y                 (adjoint, per-node coeff)
struct Reaction {
  enum class Kind { none, cubic, linear_field };
  Kind kind = Kind::none;
  double gamma = 0.0;
  std::vector<SpatialField> coeff;  // per node, linear_field only

  bool present() const { return kind != Kind::none; }
};

/// Right-hand side data for one time step on one level. Sources are data
/// sampled at the quadrature nodes (control for the state equation, tracking
/// misfit for the adjoint) and stay fixed during a solve.
struct StepRhs {
  double kappa = 0.0;
  double shift = 0.0;  // implicit linear part is kappa*Laplacian - shift*I
  Reaction reaction;
  std::vector<SpatialField> source;  // per node; empty means zero

  /// r(y) for this step's reaction at node m.
  SpatialField eval_reaction(int node, const SpatialField& y) const;
};

/// Solution and per-term function evaluations at the quadrature nodes of one
/// time step on one level. Owned by exactly one worker at a time; sweeps
/// mutate in place.
struct NodeTrajectory {
  int step_index = 0;
  double t0 = 0.0, t1 = 0.0;
  std::vector<SpatialField> y;
  std::vector<SpatialField> f_lin;    // kappa*Laplacian(y_m) - shift*y_m
  std::vector<SpatialField> f_react;  // r(y_m); empty when no reaction
  std::vector<SpatialField> tau;      // FAS correction; empty on the finest level
  double residual_norm = 0.0;

  int num_nodes() const { return static_cast<int>(y.size()); }
};

/// Allocate a trajectory with all nodes set to y0 and consistent f arrays.
NodeTrajectory make_trajectory(int step_index, double t0, double dt, const QuadratureRule& rule,
                               const StepRhs& rhs, const SpatialField& y0);

/// Re-evaluate f_lin/f_react from the current node values.
void evaluate_rhs(NodeTrajectory& traj, const StepRhs& rhs);
void evaluate_rhs_node(NodeTrajectory& traj, const StepRhs& rhs, int node);

/// Install a new initial value: y[0] = y0 plus a node-0 re-evaluation.
void set_initial_value(NodeTrajectory& traj, const StepRhs& rhs, const SpatialField& y0);

/// One SDC sweep over nodes 1..M in place. IMEX advances the implicit linear
/// part with QI and everything else with QE; the MISDC kinds additionally
/// treat the reaction implicitly (lagged linearization or damped Newton).
/// residual_norm is refreshed after the sweep.
void sweep(NodeTrajectory& traj, const QuadratureRule& rule, const StepRhs& rhs, double dt,
           SweeperKind kind);

/// Max over nodes of the spatial L2 norm of the collocation defect
///   y0 + dt * sum_i Q(m,i) F_i + tau_m - y_m.
double residual(const NodeTrajectory& traj, const QuadratureRule& rule, const StepRhs& rhs, double dt);

/// Pointwise solve of y - a*r(y) = b used by the MISDC reaction correction.
/// lag_state feeds the lagged linearization, guess seeds Newton.
SpatialField misdc_reaction_solve(const StepRhs& rhs, int node, const SpatialField& b, double a,
                                  const SpatialField& lag_state, const SpatialField& guess,
                                  SweeperKind kind, int step_index = 0);

/// Apply a node-transfer matrix to a per-node field vector.
std::vector<SpatialField> apply_node_matrix(const DenseMatrix& m, const std::vector<SpatialField>& fields);

/// FAS correction for the coarse level:
///   tau_c = dt*[restrict(Q_f F_f(y_f)) - Q_c F_c(y_c)] + restrict(tau_f)
/// where y_c must already hold the restricted fine solution with consistent
/// f arrays. Restriction is node transfer followed by spatial transfer.
std::vector<SpatialField> fas_tau(const NodeTrajectory& fine, const StepRhs& fine_rhs,
                                  const QuadratureRule& fine_rule, const NodeTrajectory& coarse,
                                  const StepRhs& coarse_rhs, const QuadratureRule& coarse_rule,
                                  const DenseMatrix& node_restrict, const GridSpec& coarse_grid, double dt);

/// Dense-output evaluation of the collocation polynomial at unit-interval
/// time theta in [0,1].
SpatialField interpolate_in_step(const NodeTrajectory& traj, const QuadratureRule& rule, double theta);

}  // namespace pintoc
