#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pintoc/quadrature.hpp"
#include "pintoc/sweeper.hpp"

namespace pintoc {

/// One discretization level: spatial grid, collocation rule, sweeper kind.
struct LevelSpec {
  GridSpec grid;
  QuadratureRule rule;
  SweeperKind sweeper = SweeperKind::imex;
  int sweeps_per_visit = 1;
};

/// Level stack ordered coarse to fine with cached node-transfer operators.
class Hierarchy {
 public:
  explicit Hierarchy(std::vector<LevelSpec> levels);

  int num_levels() const { return static_cast<int>(levels_.size()); }
  int finest() const { return num_levels() - 1; }
  const LevelSpec& level(int l) const { return levels_.at(l); }

  /// Node restriction from level l to level l-1 / interpolation back.
  const DenseMatrix& restrict_nodes(int l) const { return restrict_.at(l - 1); }
  const DenseMatrix& interp_nodes(int l) const { return interp_.at(l - 1); }

 private:
  std::vector<LevelSpec> levels_;
  std::vector<DenseMatrix> restrict_;  // entry l-1: level l -> l-1
  std::vector<DenseMatrix> interp_;    // entry l-1: level l-1 -> l
};

/// Block decomposition of N time steps over R workers: worker w owns steps
/// w, w+R, w+2R, ... processed block by block (N must be a multiple of R).
struct TimeDecomposition {
  int num_steps = 1;
  int num_workers = 1;
  double t_start = 0.0;
  double dt = 0.0;

  int owner(int step) const { return step % num_workers; }
  int num_blocks() const { return num_steps / num_workers; }
  double step_t0(int step) const { return t_start + step * dt; }
};

void validate_decomposition(const TimeDecomposition& td);

enum class StepStatus { iterating, converged, diverged, maxed_out };

struct StepReport {
  int step = 0;
  std::vector<int> sweeps;  // per level, coarse..fine
  int iterations = 0;
  double final_residual = std::numeric_limits<double>::infinity();
  bool converged = false;
};

struct SolveReport {
  std::vector<StepReport> steps;
  double wall_seconds = 0.0;

  bool all_converged() const;
  long total_sweeps() const;
  long total_fine_sweeps() const;
  double mean_iterations() const;
  /// CSV: step, level, sweeps, final residual, converged.
  void write_csv(std::ostream& os) const;
};

/// Fine-level node values kept from a previous solve, used to warm start the
/// next one (function evaluations are recomputed on load).
struct TrajectoryStore {
  std::vector<std::vector<SpatialField>> steps;  // per step: fine node values

  bool has(int step) const {
    return step < static_cast<int>(steps.size()) && !steps[step].empty();
  }
};

struct SolveOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_iters = 100;
  const TrajectoryStore* warm = nullptr;  // null or empty entries = predictor
};

/// Convergence rule: a step reports converged only when its own residual test
/// passes (absolute OR relative) and its predecessor in the pipeline has
/// converged.
bool residual_test(double resid, double y0_norm, double abs_tol, double rel_tol);
bool convergence_rule(double resid, double y0_norm, bool predecessor_converged, double abs_tol,
                      double rel_tol);

/// Per-step right-hand sides on every level, coarse..fine.
using StepRhsStack = std::vector<StepRhs>;

struct PfasstResult {
  std::vector<NodeTrajectory> trajectories;  // finest level, one per step
  SolveReport report;
};

/// Pipelined time-parallel solve. rhs_per_step[s] holds the per-level data
/// for step s; all steps advance the same equation from y_initial at
/// t_start. Workers run as threads; R = 1 degenerates to the sequential
/// MLSDC loop (bitwise identical code path).
PfasstResult pfasst_solve(const Hierarchy& h, const TimeDecomposition& td, const SpatialField& y_initial,
                          const std::vector<StepRhsStack>& rhs_per_step, const SolveOptions& opts);

/// One MLSDC step (V-cycles to tolerance); the single-step special case of
/// the block machinery.
std::pair<NodeTrajectory, SolveReport> mlsdc_step(const Hierarchy& h, const SpatialField& y0,
                                                  const StepRhsStack& rhs, double t0, double dt,
                                                  const SolveOptions& opts,
                                                  const std::vector<SpatialField>* warm_nodes = nullptr);

/// Simultaneous forward/backward solve: each worker owns one forward step and
/// the reflected step over the same interval; state and adjoint are swept in
/// the same iteration with forward and backward neighbor communication.
/// Requires R = N. The adjoint right-hand side for a reflected step is
/// rebuilt from the current state iterate each iteration by the callback.
struct SimultaneousProblem {
  const std::vector<StepRhsStack>* state_rhs = nullptr;
  // build adjoint rhs stack for reflected step js given the state trajectory
  // on the same interval (fine level)
  std::function<StepRhsStack(int reflected_step, const NodeTrajectory& state_fine)> adjoint_rhs;
  SpatialField adjoint_initial;  // value at s = 0, i.e. p(T)
};

struct SimultaneousResult {
  std::vector<NodeTrajectory> state;    // per forward step, finest level
  std::vector<NodeTrajectory> adjoint;  // per reflected step, finest level
  SolveReport state_report;
  SolveReport adjoint_report;
};

SimultaneousResult simultaneous_solve(const Hierarchy& h, const TimeDecomposition& td,
                                      const SpatialField& y_initial, const SimultaneousProblem& prob,
                                      const SolveOptions& opts);

}  // namespace pintoc
