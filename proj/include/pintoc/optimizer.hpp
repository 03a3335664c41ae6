#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pintoc/gradient.hpp"

namespace pintoc {

enum class OptMethod { sd, ncg };
enum class BetaRule { fr, prp, dy };
enum class LineSearchKind { armijo, strong_wolfe };

struct OptimizerConfig {
  OptMethod method = OptMethod::sd;
  BetaRule beta = BetaRule::dy;  // ncg only
  LineSearchKind linesearch = LineSearchKind::armijo;
  double c1 = 1e-4;
  double c2 = 0.1;
  int max_opt_iters = 50;
  double gradient_tol = 0.0;
  double initial_step = 1.0;
  int max_ls_trials = 30;
};

/// Defaults per method: sd pairs with Armijo, ncg with strong Wolfe.
OptimizerConfig default_config(OptMethod method, BetaRule beta = BetaRule::dy);
void validate_config(const OptimizerConfig& cfg);

/// L2(0,T;L2) inner product by the per-step trapezoidal rule over
/// step-boundary values; per-worker partial sums reduced in fixed worker
/// order.
double time_inner(const ControlTrajectory& v, const ControlTrajectory& w);
double time_norm(const ControlTrajectory& v);

/// Conjugate-direction weight; nullopt on a degenerate denominator (the
/// caller restarts with beta = 0).
std::optional<double> beta_value(const ControlTrajectory& g_new, const ControlTrajectory& g_old,
                                 const ControlTrajectory& d_old, BetaRule rule);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double direction_slope = 0.0;  // (g, d) for the next direction
  long state_sweeps = 0;         // this iteration
  long adjoint_sweeps = 0;
  double wall_seconds = 0.0;  // cumulative
};

struct LineSearchResult {
  bool success = false;
  double alpha = 0.0;
  double objective = 0.0;
  int trials = 0;
  int state_solves = 0;
  std::optional<GradientResult> gradient;  // at the accepted point
};

/// Line search along d from u. Armijo mode backtracks with objective-only
/// trial solves and evaluates the gradient once at the accepted point
/// (reusing the trial's state archive); strong Wolfe brackets and zooms with
/// full gradient evaluations per trial. Requires (g,d) < 0 on entry.
LineSearchResult line_search(ObjectiveEvaluator& eval, const ControlTrajectory& u,
                             const ControlTrajectory& d, double j_u, double slope,
                             double initial_step, const OptimizerConfig& cfg);

struct OptimizeResult {
  ControlTrajectory u;
  std::vector<IterationRecord> history;
  std::string termination;  // max_iters | gradient_tol | line_search_failure | solver_failure
};

OptimizeResult optimize(ObjectiveEvaluator& eval, const ControlTrajectory& u0,
                        const OptimizerConfig& cfg);

/// History CSV: iteration, J, ||grad j||, alpha, beta, state sweeps, adjoint
/// sweeps, cumulative wall time.
void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history);

}  // namespace pintoc
