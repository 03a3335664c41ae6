#include "pintoc/problems.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "pintoc/snapshot.hpp"

namespace pintoc {

namespace {

constexpr double pi = std::numbers::pi;

SpatialField sine_mode(const GridSpec& g) {
  return field_from_function(g, [](double x, double y, double z) {
    return std::sin(2 * pi * x) * std::sin(2 * pi * y) * std::sin(2 * pi * z);
  });
}

}  // namespace

ProblemDefinition make_heat_problem(std::vector<GridSpec> level_grids, double lambda, double t_final) {
  if (level_grids.empty()) throw std::invalid_argument("heat problem: need at least one grid");
  for (const auto& g : level_grids)
    if (g.dims != 3 || g.basis != Basis::periodic_fourier)
      throw std::invalid_argument("heat problem: grids must be 3-D periodic");
  if (lambda <= 0.0) throw std::invalid_argument("heat problem: lambda must be positive");
  if (t_final <= 0.0) throw std::invalid_argument("heat problem: t_final must be positive");

  ProblemDefinition p;
  p.name = "heat";
  p.level_grids = std::move(level_grids);
  p.kappa = 1.0;
  p.t_final = t_final;
  p.state_reaction = Reaction::Kind::none;
  p.objective.lambda = lambda;
  p.objective.sigma = 0.0;

  const GridSpec fine = p.fine_grid();
  const double w = 12.0 * pi * pi;
  const double T = t_final;
  const SpatialField mode = sine_mode(fine);

  p.y0 = (1.0 / (w * lambda)) * (1.0 - T) * mode;

  p.y_d_time = [mode, w, lambda, T](double t) {
    const double c = (w + 1.0 / (w * lambda)) * (t - T) - (1.0 + 1.0 / (w * w * lambda));
    return c * mode;
  };

  // Closed forms for the optimality system at u = u*. The state driven by
  // u* = (t-T)/lambda * mode from the given y0 carries an exp(-w t) layer of
  // amplitude K; the adjoint of that state carries the matching response.
  const double K = 1.0 / (w * lambda) + 1.0 / (w * w * lambda);
  const double mu = -K / (2.0 * w);
  p.u_exact = [mode, lambda, T](double t) { return ((t - T) / lambda) * mode; };
  p.y_exact = [mode, w, lambda, T, K](double t) {
    const double c = t / (w * lambda) - T / (w * lambda) - 1.0 / (w * w * lambda) + K * std::exp(-w * t);
    return c * mode;
  };
  p.p_exact = [mode, w, T, mu](double t) {
    const double c = (t - T) + mu * (std::exp(-w * t) - std::exp(w * (t - 2.0 * T)));
    return c * mode;
  };
  return p;
}

ProblemDefinition make_nagumo_problem(std::vector<GridSpec> level_grids, double gamma, double lambda) {
  if (level_grids.empty()) throw std::invalid_argument("nagumo problem: need at least one grid");
  for (const auto& g : level_grids)
    if (g.dims != 1 || g.basis != Basis::neumann_cosine || std::abs(g.extents[0] - 20.0) > 1e-14)
      throw std::invalid_argument("nagumo problem: grids must be 1-D Neumann-cosine on (0,20)");
  if (lambda < 0.0) throw std::invalid_argument("nagumo problem: lambda must be nonnegative");

  ProblemDefinition p;
  p.name = "nagumo";
  p.level_grids = std::move(level_grids);
  p.kappa = 1.0;
  p.t_final = 5.0;
  p.gamma = gamma;
  p.state_reaction = Reaction::Kind::cubic;
  p.objective.lambda = lambda;
  p.objective.sigma = 0.0;

  const double plateau = 1.2 * std::sqrt(3.0);
  p.y0 = field_from_function(p.fine_grid(), [plateau](double x, double, double) {
    return x <= 9.0 ? plateau : 0.0;
  });

  p.adjoint_coeff = [gamma](const SpatialField& y) {
    SpatialField c(y.grid());
    for (int i = 0; i < y.size(); ++i) c[i] = gamma * y[i] * y[i] - 1.0;
    return c;
  };
  // y_d_time and u_exact are installed by attach_y_nat.
  return p;
}

SpatialField YNatStore::at_time(double t) const {
  const int n = td.num_steps;
  int j = static_cast<int>(std::floor((t - td.t_start) / td.dt));
  j = std::max(0, std::min(j, n - 1));
  const double theta = (t - td.step_t0(j)) / td.dt;
  auto m = lagrange_interpolation_matrix(rule.nodes, {theta});
  SpatialField acc(nodes[j][0].grid(), 0.0);
  for (int i = 0; i < rule.num_nodes; ++i) acc.axpy(m(0, i), nodes[j][i]);
  return acc;
}

void YNatStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("y_nat store: cannot open " + path);
  for (const auto& step : nodes)
    for (const auto& f : step) write_field_snapshot(os, f);
}

YNatStore YNatStore::load(const std::string& path, const TimeDecomposition& td,
                          const QuadratureRule& rule) {
  auto fields = read_field_sequence(path);
  if (static_cast<int>(fields.size()) != td.num_steps * rule.num_nodes)
    throw std::runtime_error("y_nat store: record count does not match the discretization");
  YNatStore store;
  store.td = td;
  store.rule = rule;
  store.nodes.assign(td.num_steps, {});
  auto it = fields.begin();
  for (int s = 0; s < td.num_steps; ++s)
    for (int m = 0; m < rule.num_nodes; ++m) store.nodes[s].push_back(std::move(*it++));
  store.at_halftime = store.at_time(td.t_start + 0.5 * td.num_steps * td.dt);
  return store;
}

YNatStore compute_y_nat(const ProblemDefinition& prob, const Hierarchy& h, const TimeDecomposition& td,
                        double tol) {
  if (prob.state_reaction != Reaction::Kind::cubic)
    throw std::invalid_argument("compute_y_nat: not a Nagumo problem");

  // u = 0: no sources on any level.
  std::vector<StepRhsStack> rhs(td.num_steps);
  for (auto& stack : rhs)
    for (int l = 0; l < h.num_levels(); ++l) {
      StepRhs r;
      r.kappa = prob.kappa;
      r.reaction.kind = Reaction::Kind::cubic;
      r.reaction.gamma = prob.gamma;
      stack.push_back(std::move(r));
    }

  TimeDecomposition seq = td;
  seq.num_workers = 1;
  SolveOptions opts;
  opts.abs_tol = tol;
  opts.rel_tol = tol;
  auto res = pfasst_solve(h, seq, prob.y0, rhs, opts);
  if (!res.report.all_converged())
    throw std::runtime_error("compute_y_nat: sequential MLSDC solve did not converge");

  YNatStore store;
  store.td = td;
  store.rule = h.level(h.finest()).rule;
  store.nodes.reserve(td.num_steps);
  for (auto& traj : res.trajectories) store.nodes.push_back(std::move(traj.y));
  store.at_halftime = store.at_time(td.t_start + 0.5 * td.num_steps * td.dt);
  return store;
}

void attach_y_nat(ProblemDefinition& prob, YNatStore store) {
  auto shared = std::make_shared<const YNatStore>(std::move(store));
  const double t_half = shared->td.t_start + 0.5 * shared->td.num_steps * shared->td.dt;

  prob.y_d_time = [shared, t_half](double t) {
    return t <= t_half ? shared->at_time(t) : shared->at_halftime;
  };

  // u_exact (lambda = 0): zero until T/2, then the forcing that freezes the
  // state at y_nat(T/2).
  const SpatialField& yh = shared->at_halftime;
  SpatialField u_plus(yh.grid());
  {
    SpatialField yxx = laplacian(yh);
    const double third = prob.gamma / 3.0;
    for (int i = 0; i < yh.size(); ++i)
      u_plus[i] = third * yh[i] * yh[i] * yh[i] - yh[i] - yxx[i];
  }
  const GridSpec grid = yh.grid();
  prob.u_exact = [u_plus, grid, t_half](double t) {
    return t <= t_half ? SpatialField(grid, 0.0) : u_plus;
  };
}

double objective_value(const std::vector<NodeTrajectory>& state, const ControlTrajectory& u,
                       const ProblemDefinition& prob, const TimeDecomposition& td) {
  if (!prob.y_d_time) throw std::runtime_error("objective_value: tracking target not available");
  if (static_cast<int>(state.size()) != td.num_steps)
    throw std::invalid_argument("objective_value: state trajectory count mismatch");
  const int n = td.num_steps;
  const int r = td.num_workers;
  const int m_last = u.nodes_per_step() - 1;
  const double lambda = prob.objective.lambda;

  auto integrand = [&](const SpatialField& y, const SpatialField& uu, double t) {
    SpatialField misfit = y - prob.y_d_time(t);
    return 0.5 * inner(misfit, misfit) + 0.5 * lambda * inner(uu, uu);
  };

  // Per-worker partial sums over owned steps, reduced in fixed worker order.
  std::vector<double> partial(r, 0.0);
  for (int w = 0; w < r; ++w)
    for (int s = w; s < n; s += r) {
      const double gl = integrand(state[s].y.front(), u.at(s, 0), td.step_t0(s));
      const double gr = integrand(state[s].y.back(), u.at(s, m_last), td.step_t0(s + 1));
      partial[w] += 0.5 * td.dt * (gl + gr);
    }
  double total = 0.0;
  for (int w = 0; w < r; ++w) total += partial[w];

  if (prob.objective.sigma > 0.0) {
    if (!prob.objective.y_d_terminal) throw std::runtime_error("objective_value: terminal target missing");
    SpatialField misfit = state.back().y.back() - *prob.objective.y_d_terminal;
    total += 0.5 * prob.objective.sigma * inner(misfit, misfit);
  }
  return total;
}

}  // namespace pintoc
