#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pintoc/pfasst.hpp"
#include "pintoc/trajectory.hpp"

namespace pintoc {

/// Tracking objective J = 1/2 int ||y - y_d||^2 + lambda/2 int ||u||^2
/// (+ sigma/2 ||y(T) - y_d_T||^2 when sigma > 0).
struct ObjectiveSpec {
  double lambda = 0.0;
  double sigma = 0.0;
  std::optional<SpatialField> y_d_terminal;  // required when sigma > 0
};

/// A benchmark control problem: grids per level, physics of the state
/// equation, objective data, and whatever exact references exist.
struct ProblemDefinition {
  std::string name;
  std::vector<GridSpec> level_grids;  // coarse..fine
  double kappa = 1.0;
  double t_final = 0.0;
  double gamma = 0.0;  // cubic reaction strength (Nagumo)
  Reaction::Kind state_reaction = Reaction::Kind::none;
  SpatialField y0;  // fine grid
  ObjectiveSpec objective;

  /// Desired state at time t on the fine grid; null until available
  /// (the Nagumo target needs y_nat first).
  std::function<SpatialField(double)> y_d_time;

  /// Adjoint reaction coefficient f_y(y) evaluated pointwise; null for
  /// linear state equations (f_y = 0).
  std::function<SpatialField(const SpatialField&)> adjoint_coeff;

  /// Exact references where known (heat: closed forms; Nagumo: u_exact for
  /// lambda = 0). Null when unavailable.
  std::function<SpatialField(double)> y_exact;
  std::function<SpatialField(double)> p_exact;
  std::function<SpatialField(double)> u_exact;

  bool linear_state() const { return state_reaction == Reaction::Kind::none; }
  const GridSpec& fine_grid() const { return level_grids.back(); }
};

/// 3-D heat control problem on [0,1]^3 with periodic boundaries,
/// y_t - Laplacian(y) = u, and the tracking data that admits closed-form
/// state/adjoint/control references.
ProblemDefinition make_heat_problem(std::vector<GridSpec> level_grids, double lambda, double t_final);

/// 1-D Nagumo reaction-diffusion control problem on (0,20) with homogeneous
/// Neumann boundaries, reaction gamma/3 y^3 - y, T = 5. The tracking target
/// y_d and u_exact become available after attach_y_nat.
ProblemDefinition make_nagumo_problem(std::vector<GridSpec> level_grids, double gamma, double lambda);

/// Natural (u = 0) Nagumo evolution stored at all fine nodes.
struct YNatStore {
  TimeDecomposition td;
  QuadratureRule rule;
  std::vector<std::vector<SpatialField>> nodes;  // per step, per node
  SpatialField at_halftime;                      // y_nat(., T/2)

  SpatialField at_time(double t) const;  // collocation dense output
  void save(const std::string& path) const;
  static YNatStore load(const std::string& path, const TimeDecomposition& td, const QuadratureRule& rule);
};

/// Sequential MLSDC solve of the Nagumo equation with u = 0 at the given
/// discretization. Throws on solver failure.
YNatStore compute_y_nat(const ProblemDefinition& prob, const Hierarchy& h, const TimeDecomposition& td,
                        double tol);

/// Install y_d (y_nat up to T/2, frozen afterwards) and u_exact.
void attach_y_nat(ProblemDefinition& prob, YNatStore store);

/// J evaluated by the per-step trapezoidal rule over step-boundary values of
/// the spatial inner products; per-worker partial sums are reduced in fixed
/// worker order. state holds the finest-level trajectories per step.
double objective_value(const std::vector<NodeTrajectory>& state, const ControlTrajectory& u,
                       const ProblemDefinition& prob, const TimeDecomposition& td);

}  // namespace pintoc
