#include "pintoc/gradient.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace pintoc {

std::vector<std::vector<SpatialField>> restrict_node_stack(const Hierarchy& h,
                                                           std::vector<SpatialField> fine_nodes) {
  std::vector<std::vector<SpatialField>> stack(h.num_levels());
  stack[h.finest()] = std::move(fine_nodes);
  for (int l = h.finest(); l >= 1; --l) {
    auto coarse = apply_node_matrix(h.restrict_nodes(l), stack[l]);
    for (auto& f : coarse) f = transfer(f, h.level(l - 1).grid);
    stack[l - 1] = std::move(coarse);
  }
  return stack;
}

GradientEvaluator::GradientEvaluator(const ProblemDefinition& prob, const Hierarchy& h,
                                     const TimeDecomposition& td, GradientStrategy strategy,
                                     const SolveOptions& opts, bool warm_start)
    : prob_(prob), h_(h), td_(td), strategy_(strategy), opts_(opts), warm_(warm_start) {
  validate_decomposition(td_);
  if (strategy_ == GradientStrategy::simultaneous && td_.num_workers != td_.num_steps)
    throw std::invalid_argument("gradient: the simultaneous strategy requires R = N");
  if (strategy_ == GradientStrategy::mixed && !prob_.linear_state())
    throw std::invalid_argument("gradient: the mixed strategy requires a linear state equation (f_y = 0)");
  if (strategy_ == GradientStrategy::simultaneous && prob_.objective.sigma > 0.0)
    throw std::invalid_argument("gradient: simultaneous strategy does not support terminal cost");
}

ControlTrajectory GradientEvaluator::zero_control() const {
  return ControlTrajectory(td_, h_.level(h_.finest()).rule, prob_.fine_grid());
}

void GradientEvaluator::reset_warm_stores() {
  state_store_ = {};
  adjoint_store_ = {};
  ptilde_store_ = {};
}

std::vector<StepRhsStack> GradientEvaluator::build_state_rhs(const ControlTrajectory& u) const {
  std::vector<StepRhsStack> rhs(td_.num_steps);
  for (int s = 0; s < td_.num_steps; ++s) {
    auto sources = restrict_node_stack(h_, u.step_nodes(s));
    StepRhsStack stack(h_.num_levels());
    for (int l = 0; l < h_.num_levels(); ++l) {
      stack[l].kappa = prob_.kappa;
      if (prob_.state_reaction == Reaction::Kind::cubic) {
        stack[l].reaction.kind = Reaction::Kind::cubic;
        stack[l].reaction.gamma = prob_.gamma;
      }
      stack[l].source = std::move(sources[l]);
    }
    rhs[s] = std::move(stack);
  }
  return rhs;
}

StepRhsStack GradientEvaluator::build_adjoint_stack(int reflected_step,
                                                    const NodeTrajectory& state_fine) const {
  const int j = td_.num_steps - 1 - reflected_step;
  const QuadratureRule& rule = h_.level(h_.finest()).rule;
  const int m_max = rule.max_node();

  std::vector<SpatialField> source;
  source.reserve(rule.num_nodes);
  std::vector<SpatialField> coeff;
  const bool nonlinear = static_cast<bool>(prob_.adjoint_coeff);
  for (int mh = 0; mh <= m_max; ++mh) {
    const int m = m_max - mh;  // reflected node pairing by Lobatto symmetry
    const double t = td_.step_t0(j) + td_.dt * rule.nodes[m];
    source.push_back(prob_.y_d_time(t) - state_fine.y[m]);  // -(y - y_d)
    if (nonlinear) coeff.push_back(prob_.adjoint_coeff(state_fine.y[m]));
  }

  auto src_stack = restrict_node_stack(h_, std::move(source));
  std::vector<std::vector<SpatialField>> coeff_stack;
  if (nonlinear) coeff_stack = restrict_node_stack(h_, std::move(coeff));

  StepRhsStack stack(h_.num_levels());
  for (int l = 0; l < h_.num_levels(); ++l) {
    stack[l].kappa = prob_.kappa;
    stack[l].source = std::move(src_stack[l]);
    if (nonlinear) {
      stack[l].reaction.kind = Reaction::Kind::linear_field;
      stack[l].reaction.coeff = std::move(coeff_stack[l]);
    }
  }
  return stack;
}

SpatialField GradientEvaluator::adjoint_terminal_value() const {
  const GridSpec& g = prob_.fine_grid();
  if (prob_.objective.sigma <= 0.0) return SpatialField(g, 0.0);
  if (!prob_.objective.y_d_terminal)
    throw std::runtime_error("gradient: sigma > 0 requires a terminal target");
  SpatialField p_t = archive_.back().y.back() - *prob_.objective.y_d_terminal;
  p_t *= -prob_.objective.sigma;
  return p_t;
}

void GradientEvaluator::run_state_solve(const ControlTrajectory& u, SolveReport* report) {
  auto rhs = build_state_rhs(u);
  TimeDecomposition td = td_;
  if (strategy_ == GradientStrategy::sequential_reference) td.num_workers = 1;
  SolveOptions opts = opts_;
  opts.warm = (warm_ && !state_store_.steps.empty()) ? &state_store_ : nullptr;

  auto res = pfasst_solve(h_, td, prob_.y0, rhs, opts);
  last_state_report_ = std::move(res.report);
  state_sweeps_ += last_state_report_.total_fine_sweeps();
  archive_ = std::move(res.trajectories);
  archive_valid_ = true;
  if (warm_) {
    state_store_.steps.assign(td_.num_steps, {});
    for (int s = 0; s < td_.num_steps; ++s) state_store_.steps[s] = archive_[s].y;
  }
  if (report != nullptr) *report = last_state_report_;
}

double GradientEvaluator::objective_only(const ControlTrajectory& u, SolveReport* report) {
  run_state_solve(u, report);
  return objective_value(archive_, u, prob_, td_);
}

void GradientEvaluator::adjoint_first_state_then_adjoint() {
  const int n = td_.num_steps;
  std::vector<StepRhsStack> rhs(n);
  for (int jh = 0; jh < n; ++jh) rhs[jh] = build_adjoint_stack(jh, archive_[n - 1 - jh]);

  TimeDecomposition td = td_;
  if (strategy_ == GradientStrategy::sequential_reference) td.num_workers = 1;
  SolveOptions opts = opts_;
  opts.warm = (warm_ && !adjoint_store_.steps.empty()) ? &adjoint_store_ : nullptr;

  auto res = pfasst_solve(h_, td, adjoint_terminal_value(), rhs, opts);
  last_adjoint_report_ = std::move(res.report);
  adjoint_sweeps_ += last_adjoint_report_.total_fine_sweeps();
  if (warm_) {
    adjoint_store_.steps.assign(n, {});
    for (int jh = 0; jh < n; ++jh) adjoint_store_.steps[jh] = res.trajectories[jh].y;
  }

  const int m_max = h_.level(h_.finest()).rule.max_node();
  p_nodes_.assign(n, {});
  for (int j = 0; j < n; ++j) {
    const NodeTrajectory& adj = res.trajectories[n - 1 - j];
    p_nodes_[j].clear();
    for (int m = 0; m <= m_max; ++m) p_nodes_[j].push_back(adj.y[m_max - m]);
  }
}

void GradientEvaluator::adjoint_mixed() {
  const int n = td_.num_steps;
  const QuadratureRule& rule = h_.level(h_.finest()).rule;
  const int m_max = rule.max_node();
  const GridSpec& g = prob_.fine_grid();

  // Step 1: per-step inhomogeneous solves with homogeneous terminal values,
  // no communication; workers handle their owned steps independently.
  std::vector<NodeTrajectory> ptilde(n);
  std::vector<StepRhsStack> rhs(n);
  std::vector<SolveReport> reports(n);
  for (int j = 0; j < n; ++j) rhs[j] = build_adjoint_stack(n - 1 - j, archive_[j]);

  auto worker = [&](int w) {
    for (int j = w; j < n; j += td_.num_workers) {
      const std::vector<SpatialField>* warm_nodes =
          (warm_ && ptilde_store_.has(j)) ? &ptilde_store_.steps[j] : nullptr;
      auto [traj, rep] = mlsdc_step(h_, SpatialField(g, 0.0), rhs[j], 0.0, td_.dt, opts_, warm_nodes);
      ptilde[j] = std::move(traj);
      reports[j] = std::move(rep);
    }
  };
  if (td_.num_workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < td_.num_workers; ++w) threads.emplace_back(worker, w);
    for (auto& t : threads) t.join();
  }

  last_adjoint_report_ = SolveReport{};
  for (int j = 0; j < n; ++j) {
    StepReport sr = reports[j].steps[0];
    sr.step = j;
    last_adjoint_report_.steps.push_back(std::move(sr));
  }
  adjoint_sweeps_ += last_adjoint_report_.total_fine_sweeps();
  if (warm_) {
    ptilde_store_.steps.assign(n, {});
    for (int j = 0; j < n; ++j) ptilde_store_.steps[j] = ptilde[j].y;
  }

  // Step 2: backward relay of defects by exact operator exponentials.
  // delta^j(t_{j+1}) arrives from step j+1; interior nodes are reached by
  // propagating over dt*(1 - tau_m).
  p_nodes_.assign(n, {});
  SpatialField delta_right = adjoint_terminal_value();
  for (int j = n - 1; j >= 0; --j) {
    p_nodes_[j].assign(m_max + 1, SpatialField(g, 0.0));
    for (int m = 0; m <= m_max; ++m) {
      SpatialField delta = exp_propagate(delta_right, prob_.kappa, td_.dt * (1.0 - rule.nodes[m]));
      // p-tilde of step j at forward node m is its reflected node M - m.
      p_nodes_[j][m] = ptilde[j].y[m_max - m] + delta;
    }
    // message to the owner of step j-1
    SpatialField delta_left = exp_propagate(delta_right, prob_.kappa, td_.dt);
    delta_right = ptilde[j].y[m_max] + delta_left;
  }
}

GradientResult GradientEvaluator::finish_gradient(const ControlTrajectory& u) {
  GradientResult res;
  res.objective = objective_value(archive_, u, prob_, td_);
  res.gradient = u;
  const double lambda = prob_.objective.lambda;
  for (int s = 0; s < td_.num_steps; ++s)
    for (int m = 0; m < u.nodes_per_step(); ++m) {
      SpatialField& g = res.gradient.at(s, m);
      g *= lambda;
      g -= p_nodes_[s][m];
    }
  res.report.state = last_state_report_;
  res.report.adjoint = last_adjoint_report_;
  res.report.state_converged = last_state_report_.all_converged();
  res.report.adjoint_converged = last_adjoint_report_.all_converged();
  return res;
}

GradientResult GradientEvaluator::evaluate(const ControlTrajectory& u) {
  if (strategy_ == GradientStrategy::simultaneous) {
    auto state_rhs = build_state_rhs(u);
    SimultaneousProblem sp;
    sp.state_rhs = &state_rhs;
    sp.adjoint_initial = SpatialField(prob_.fine_grid(), 0.0);
    sp.adjoint_rhs = [this](int reflected, const NodeTrajectory& state_fine) {
      return build_adjoint_stack(reflected, state_fine);
    };
    auto res = simultaneous_solve(h_, td_, prob_.y0, sp, opts_);
    last_state_report_ = std::move(res.state_report);
    last_adjoint_report_ = std::move(res.adjoint_report);
    state_sweeps_ += last_state_report_.total_fine_sweeps();
    adjoint_sweeps_ += last_adjoint_report_.total_fine_sweeps();
    archive_ = std::move(res.state);
    archive_valid_ = true;

    const int n = td_.num_steps;
    const int m_max = h_.level(h_.finest()).rule.max_node();
    p_nodes_.assign(n, {});
    for (int j = 0; j < n; ++j) {
      const NodeTrajectory& adj = res.adjoint[n - 1 - j];
      for (int m = 0; m <= m_max; ++m) p_nodes_[j].push_back(adj.y[m_max - m]);
    }
    return finish_gradient(u);
  }

  run_state_solve(u, nullptr);
  return evaluate_archived(u);
}

GradientResult GradientEvaluator::evaluate_archived(const ControlTrajectory& u) {
  if (strategy_ == GradientStrategy::simultaneous) return evaluate(u);
  if (!archive_valid_) throw std::runtime_error("gradient: no archived state to reuse");
  if (strategy_ == GradientStrategy::mixed)
    adjoint_mixed();
  else
    adjoint_first_state_then_adjoint();
  return finish_gradient(u);
}

}  // namespace pintoc
