#pragma once

#include <string>
#include <vector>

#include "pintoc/config.hpp"
#include "pintoc/gradient.hpp"
#include "pintoc/optimizer.hpp"

namespace pintoc {

/// Fully resolved experiment description. Everything a run needs is in here
/// and is serialized into every output for provenance.
struct ExperimentConfig {
  std::string mode = "optimize";  // optimize | solve | gamma-table | imex-euler | study
  std::string problem = "heat";   // heat | nagumo

  double lambda = 0.05;
  double gamma = 1.0;
  double sigma = 0.0;
  double t_final = 2.0;  // nagumo is fixed at 5

  std::vector<int> level_points;  // coarse..fine, per-dimension counts
  std::vector<int> level_nodes;
  SweeperKind sweeper = SweeperKind::imex;
  int sweeps_per_visit = 1;

  int num_steps = 20;
  int num_workers = 1;

  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_iters = 100;

  GradientStrategy strategy = GradientStrategy::first_state_then_adjoint;
  bool warm = false;

  OptimizerConfig opt;
  unsigned seed = 0;

  // mode-specific extras
  std::vector<double> study_dts;
  std::vector<double> table_gammas{1.0};
  std::vector<int> table_steps{32};
  std::vector<int> table_workers{1};
  std::vector<std::string> table_variants{"imex", "misdc_lagged", "misdc_newton"};
  double baseline_dt = 1e-3;
  std::string control_file;  // solve mode: initial control snapshot sequence
  std::string y_nat_cache;   // optional cache path for the Nagumo target

  std::string out_dir = "out";

  static ExperimentConfig from(const Config& cfg);
  Config resolved() const;
};

/// Problem + hierarchy + decomposition assembled from a config (the Nagumo
/// target is computed or loaded from the cache here).
struct BuiltExperiment {
  ProblemDefinition prob;
  Hierarchy hierarchy;
  TimeDecomposition td;
  SolveOptions solver;
};

BuiltExperiment build_experiment(const ExperimentConfig& cfg);

/// Exact control sampled at the trajectory nodes; for the Nagumo problem the
/// discontinuity at T/2 is sampled with the step-ownership convention (steps
/// starting at or after T/2 take the right limit).
ControlTrajectory exact_control(const ProblemDefinition& prob, const TimeDecomposition& td,
                                const QuadratureRule& rule);

/// sqrt((u - u_exact, u - u_exact) / (u_exact, u_exact)) in the trapezoid
/// time inner product; requires prob.u_exact.
double relative_control_error(const ControlTrajectory& u, const ProblemDefinition& prob);

struct ExperimentSummary {
  bool converged = true;
  double final_objective = 0.0;
  double final_grad_norm = 0.0;
  double final_control_error = -1.0;  // -1 when no exact control
  long state_sweeps = 0;
  long adjoint_sweeps = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> artifact_paths;
};

/// Run the configured experiment, writing history/report/summary CSVs and
/// snapshots into cfg.out_dir. Throws ConfigError for invalid
/// configurations. converged=false is reported, not thrown.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

/// First-order IMEX Euler reference: diffusion implicit, reaction explicit,
/// control and target held constant on each step. Drives the same optimizer.
class ImexEulerEvaluator : public ObjectiveEvaluator {
 public:
  ImexEulerEvaluator(const ProblemDefinition& prob, const TimeDecomposition& td);

  double objective_only(const ControlTrajectory& u, SolveReport* report = nullptr) override;
  GradientResult evaluate(const ControlTrajectory& u) override;
  GradientResult evaluate_archived(const ControlTrajectory& u) override;
  long cumulative_state_sweeps() const override { return state_steps_; }
  long cumulative_adjoint_sweeps() const override { return adjoint_steps_; }

  ControlTrajectory zero_control() const;
  const std::vector<SpatialField>& boundary_states() const { return y_; }

 private:
  void march_state(const ControlTrajectory& u);

  const ProblemDefinition& prob_;
  TimeDecomposition td_;
  QuadratureRule rule_;  // two boundary nodes per step
  std::vector<SpatialField> y_;  // boundary values, size N+1
  long state_steps_ = 0;
  long adjoint_steps_ = 0;
};

/// One IMEX-Euler update y -> y_next over dt for y' = kappa*Lap(y) - shift*y
/// + r(y) + u with the diffusion part implicit.
SpatialField imex_euler_step(const SpatialField& y, const StepRhs& rhs, double dt,
                             const SpatialField* u = nullptr);

struct StudyRow {
  double dt = 0.0;
  double error = 0.0;
  double observed_order = 0.0;  // vs previous row; NaN for the first
  bool in_fit = false;
};

struct StudyResult {
  std::vector<StudyRow> rows;
  double fitted_order = 0.0;  // NaN when fewer than 2 usable rows
};

/// Single-step state solves across dt values against the exact solution
/// (heat) or a finer self-converged reference; rows at the residual-tolerance
/// error floor are reported but excluded from the order fit.
StudyResult convergence_study(const ProblemDefinition& prob, const Hierarchy& h,
                              const std::vector<double>& dts, const SolveOptions& opts);

/// Shipped presets reproducing the benchmark tables.
std::vector<std::string> preset_names();
Config preset_config(const std::string& name);
std::string preset_description(const std::string& name);

}  // namespace pintoc
