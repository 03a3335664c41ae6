#pragma once

#include <vector>

#include "pintoc/problems.hpp"

namespace pintoc {

enum class GradientStrategy { sequential_reference, first_state_then_adjoint, simultaneous, mixed };

struct GradientEvalReport {
  SolveReport state;
  SolveReport adjoint;
  bool state_converged = false;
  bool adjoint_converged = false;
  bool converged() const { return state_converged && adjoint_converged; }
};

struct GradientResult {
  double objective = 0.0;
  ControlTrajectory gradient;
  GradientEvalReport report;
};

/// Contract the optimizer drives: objective-only solves for line-search
/// trials plus full gradient evaluations, with the archived-state shortcut
/// for the accepted trial.
class ObjectiveEvaluator {
 public:
  virtual ~ObjectiveEvaluator() = default;
  virtual double objective_only(const ControlTrajectory& u, SolveReport* report = nullptr) = 0;
  virtual GradientResult evaluate(const ControlTrajectory& u) = 0;
  virtual GradientResult evaluate_archived(const ControlTrajectory& u) = 0;
  virtual long cumulative_state_sweeps() const { return 0; }
  virtual long cumulative_adjoint_sweeps() const { return 0; }
};

/// Reduced-gradient evaluation: state solve (archived at the fine nodes),
/// adjoint solve per strategy, gradient assembly lambda*u - p at every node.
/// Holds the warm-start stores across calls when warm starting is enabled.
class GradientEvaluator : public ObjectiveEvaluator {
 public:
  GradientEvaluator(const ProblemDefinition& prob, const Hierarchy& h, const TimeDecomposition& td,
                    GradientStrategy strategy, const SolveOptions& opts, bool warm_start);

  /// State solve only; archives the trajectory and returns the objective.
  double objective_only(const ControlTrajectory& u, SolveReport* report = nullptr) override;

  /// Full gradient evaluation (fresh state solve).
  GradientResult evaluate(const ControlTrajectory& u) override;

  /// Gradient reusing the archived state from the previous objective_only
  /// call with the same control (accepted line-search trial).
  GradientResult evaluate_archived(const ControlTrajectory& u) override;

  ControlTrajectory zero_control() const;
  const std::vector<NodeTrajectory>& archive() const { return archive_; }
  const TimeDecomposition& decomposition() const { return td_; }
  const ProblemDefinition& problem() const { return prob_; }
  GradientStrategy strategy() const { return strategy_; }

  long cumulative_state_sweeps() const override { return state_sweeps_; }
  long cumulative_adjoint_sweeps() const override { return adjoint_sweeps_; }
  void reset_warm_stores();

  /// Adjoint node values in forward time: p at state node (step, node).
  /// Valid after evaluate()/evaluate_archived().
  const std::vector<std::vector<SpatialField>>& adjoint_nodes() const { return p_nodes_; }

 private:
  std::vector<StepRhsStack> build_state_rhs(const ControlTrajectory& u) const;
  StepRhsStack build_adjoint_stack(int reflected_step, const NodeTrajectory& state_fine) const;
  SpatialField adjoint_terminal_value() const;
  void run_state_solve(const ControlTrajectory& u, SolveReport* report);
  GradientResult finish_gradient(const ControlTrajectory& u);
  void adjoint_first_state_then_adjoint();
  void adjoint_mixed();

  const ProblemDefinition& prob_;
  const Hierarchy& h_;
  TimeDecomposition td_;
  GradientStrategy strategy_;
  SolveOptions opts_;
  bool warm_;

  std::vector<NodeTrajectory> archive_;
  bool archive_valid_ = false;
  SolveReport last_state_report_;
  SolveReport last_adjoint_report_;
  std::vector<std::vector<SpatialField>> p_nodes_;  // forward-time adjoint values

  TrajectoryStore state_store_;
  TrajectoryStore adjoint_store_;
  TrajectoryStore ptilde_store_;
  long state_sweeps_ = 0;
  long adjoint_sweeps_ = 0;
};

/// Restrict per-node fine-level data down a hierarchy (node transfer, then
/// spatial transfer). Returns per-level stacks, coarse..fine.
std::vector<std::vector<SpatialField>> restrict_node_stack(const Hierarchy& h,
                                                           std::vector<SpatialField> fine_nodes);

}  // namespace pintoc
