#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pintoc/sweeper.hpp"

using namespace pintoc;
constexpr double pi = std::numbers::pi;

namespace {

GridSpec tiny_grid() { return make_grid_1d(4, 1.0, Basis::periodic_fourier); }

// Direct collocation solve for y' = lambda*y (+ tau) on one step: the shared
// fixed point every sweeper must reach.
std::vector<double> dahlquist_collocation(const QuadratureRule& rule, double lambda, double dt, double y0,
                                          const std::vector<double>& tau = {}) {
  const int m = rule.max_node();
  DenseMatrix a(m, m);
  std::vector<double> b(m, 0.0);
  const double z = dt * lambda;
  for (int r = 1; r <= m; ++r) {
    for (int c = 1; c <= m; ++c) a(r - 1, c - 1) = (r == c ? 1.0 : 0.0) - z * rule.Q(r, c);
    b[r - 1] = y0 * (1.0 + z * rule.Q(r, 0));
    if (!tau.empty()) b[r - 1] += tau[r];
  }
  auto x = solve_dense(a, b);
  std::vector<double> y(rule.num_nodes, y0);
  for (int r = 1; r <= m; ++r) y[r] = x[r - 1];
  return y;
}

// Scalar Dahlquist y' = -y realized through the implicit linear shift.
StepRhs dahlquist_rhs() {
  StepRhs rhs;
  rhs.kappa = 0.0;
  rhs.shift = 1.0;
  return rhs;
}

double node_value(const NodeTrajectory& t, int m) { return t.y[m][0]; }

}  // namespace

TEST_CASE("zero right-hand side keeps all nodes at y0 with zero residual") {
  auto rule = build_lobatto_rule(4);
  StepRhs rhs;  // kappa = 0, shift = 0, no reaction, no source
  SpatialField y0(tiny_grid(), 2.5);
  auto traj = make_trajectory(0, 0.0, 0.3, rule, rhs, y0);
  sweep(traj, rule, rhs, 0.3, SweeperKind::imex);
  for (int m = 0; m < rule.num_nodes; ++m)
    CHECK(std::abs(node_value(traj, m) - 2.5) < 1e-14);
  CHECK(traj.residual_norm < 1e-14);
}

TEST_CASE("imex sweeps converge to the Dahlquist collocation solution") {
  auto rule = build_lobatto_rule(3);
  auto rhs = dahlquist_rhs();
  const double dt = 0.1;
  SpatialField y0(tiny_grid(), 1.0);
  auto traj = make_trajectory(0, 0.0, dt, rule, rhs, y0);

  double prev_res = traj.residual_norm;
  bool contracted = true;
  for (int k = 0; k < 20; ++k) {
    sweep(traj, rule, rhs, dt, SweeperKind::imex);
    if (traj.residual_norm > prev_res && prev_res > 1e-14) contracted = false;
    prev_res = traj.residual_norm;
  }
  CHECK(contracted);  // contraction in the stable regime
  CHECK(std::abs(node_value(traj, 2) - std::exp(-dt)) < 1e-6);
  auto exact = dahlquist_collocation(rule, -1.0, dt, 1.0);
  for (int m = 0; m < 3; ++m) CHECK(std::abs(node_value(traj, m) - exact[m]) < 1e-12);
}

TEST_CASE("a sweep never touches node zero") {
  auto rule = build_lobatto_rule(5);
  StepRhs rhs;
  rhs.kappa = 1.0;
  auto g = make_grid_1d(16, 1.0, Basis::periodic_fourier);
  auto y0 = field_from_function(g, [](double x, double, double) { return std::sin(2 * pi * x) + 0.2; });
  auto traj = make_trajectory(0, 0.0, 0.05, rule, rhs, y0);
  for (int k = 0; k < 3; ++k) sweep(traj, rule, rhs, 0.05, SweeperKind::imex);
  for (int i = 0; i < y0.size(); ++i) CHECK(traj.y[0][i] == y0[i]);
}

TEST_CASE("misdc without a reaction equals imex") {
  auto rule = build_lobatto_rule(3);
  auto rhs = dahlquist_rhs();
  SpatialField y0(tiny_grid(), 1.0);
  auto a = make_trajectory(0, 0.0, 0.2, rule, rhs, y0);
  auto b = make_trajectory(0, 0.0, 0.2, rule, rhs, y0);
  for (int k = 0; k < 4; ++k) {
    sweep(a, rule, rhs, 0.2, SweeperKind::imex);
    sweep(b, rule, rhs, 0.2, SweeperKind::misdc_lagged);
  }
  for (int m = 0; m < 3; ++m) CHECK(std::abs(node_value(a, m) - node_value(b, m)) < 1e-14);
}

TEST_CASE("newton reaction solve matches a bisection oracle") {
  // y + a*(gamma/3 y^3 - y) = b, the pointwise MISDC correction equation.
  const double gamma = 1.0, a = 0.04;
  auto g = tiny_grid();
  SpatialField b(g);
  b[0] = 1.9;
  b[1] = -0.3;
  b[2] = 0.0;
  b[3] = 2.3;
  StepRhs rhs;
  rhs.reaction.kind = Reaction::Kind::cubic;
  rhs.reaction.gamma = gamma;
  SpatialField guess(g, 0.5);
  auto y = misdc_reaction_solve(rhs, 0, b, a, guess, guess, SweeperKind::misdc_newton);

  for (int i = 0; i < 4; ++i) {
    auto f = [&](double v) { return v + a * (gamma / 3.0 * v * v * v - v) - b[i]; };
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
    }
    CHECK(std::abs(y[i] - 0.5 * (lo + hi)) < 1e-10);
  }
}

TEST_CASE("misdc lagged and newton agree at the collocation fixed point") {
  // Cubic reaction with diffusion on a small periodic grid; all kinds must
  // converge to the same trajectory.
  auto g = make_grid_1d(16, 1.0, Basis::periodic_fourier);
  auto rule = build_lobatto_rule(4);
  StepRhs rhs;
  rhs.kappa = 0.02;
  rhs.reaction.kind = Reaction::Kind::cubic;
  rhs.reaction.gamma = 1.0;
  rhs.source.assign(rule.num_nodes, field_from_function(g, [](double x, double, double) {
    return 0.3 * std::cos(2 * pi * x);
  }));
  auto y0 = field_from_function(g, [](double x, double, double) { return 1.0 + 0.5 * std::sin(2 * pi * x); });

  const double dt = 0.1;
  auto run = [&](SweeperKind kind) {
    auto traj = make_trajectory(0, 0.0, dt, rule, rhs, y0);
    for (int k = 0; k < 60 && traj.residual_norm > 1e-13; ++k) sweep(traj, rule, rhs, dt, kind);
    CHECK(traj.residual_norm < 1e-12);
    return traj;
  };
  auto ti = run(SweeperKind::imex);
  auto tl = run(SweeperKind::misdc_lagged);
  auto tn = run(SweeperKind::misdc_newton);
  for (int m = 0; m < rule.num_nodes; ++m) {
    CHECK(l2_norm(tl.y[m] - tn.y[m]) < 1e-12);
    CHECK(l2_norm(ti.y[m] - tn.y[m]) < 1e-12);
  }
}

TEST_CASE("residual") {
  auto rule = build_lobatto_rule(3);
  auto rhs = dahlquist_rhs();
  const double dt = 0.4;

  SUBCASE("exact collocation solution gives zero residual") {
    auto exact = dahlquist_collocation(rule, -1.0, dt, 1.0);
    SpatialField y0(tiny_grid(), 1.0);
    auto traj = make_trajectory(0, 0.0, dt, rule, rhs, y0);
    for (int m = 0; m < 3; ++m) traj.y[m].fill(exact[m]);
    evaluate_rhs(traj, rhs);
    CHECK(residual(traj, rule, rhs, dt) < 1e-13);
  }

  SUBCASE("zero rhs with constant nodes gives zero") {
    StepRhs zero;
    SpatialField y0(tiny_grid(), 1.7);
    auto traj = make_trajectory(0, 0.0, dt, rule, zero, y0);
    CHECK(residual(traj, rule, zero, dt) < 1e-15);
  }

  SUBCASE("a 1e-3 perturbation at node 2 is seen at the right scale") {
    auto exact = dahlquist_collocation(rule, -1.0, dt, 1.0);
    SpatialField y0(tiny_grid(), 1.0);
    auto traj = make_trajectory(0, 0.0, dt, rule, rhs, y0);
    for (int m = 0; m < 3; ++m) traj.y[m].fill(exact[m]);
    traj.y[2].fill(exact[2] + 1e-3);
    evaluate_rhs(traj, rhs);
    const double r = residual(traj, rule, rhs, dt);
    CHECK(r >= 1e-4);
    CHECK(r <= 1e-2);
  }
}

TEST_CASE("fas tau") {
  SUBCASE("identical levels give zero tau") {
    auto rule = build_lobatto_rule(4);
    auto g = make_grid_1d(16, 1.0, Basis::periodic_fourier);
    StepRhs rhs;
    rhs.kappa = 0.5;
    auto y0 = field_from_function(g, [](double x, double, double) { return std::sin(2 * pi * x); });
    auto traj = make_trajectory(0, 0.0, 0.3, rule, rhs, y0);
    sweep(traj, rule, rhs, 0.3, SweeperKind::imex);
    auto coarse = traj;
    auto tau = fas_tau(traj, rhs, rule, coarse, rhs, rule, DenseMatrix::identity(4), g, 0.3);
    for (const auto& t : tau) CHECK(l2_norm(t) < 1e-13);
  }

  SUBCASE("linear problem, band-limited field, nested nodes: tau vanishes") {
    auto fine_rule = build_lobatto_rule(5);
    auto coarse_rule = build_lobatto_rule(3);
    auto fg = make_grid_1d(64, 1.0, Basis::periodic_fourier);
    auto cg = make_grid_1d(32, 1.0, Basis::periodic_fourier);
    StepRhs rhs;
    rhs.kappa = 1.0;
    auto mode = field_from_function(fg, [](double x, double, double) { return std::sin(2 * pi * x); });

    // Node values sampling a quadratic-in-time polynomial: both levels
    // integrate it exactly, so the FAS mismatch is zero.
    auto fine = make_trajectory(0, 0.0, 0.7, fine_rule, rhs, mode);
    for (int m = 0; m < 5; ++m) {
      const double tm = fine_rule.nodes[m];
      fine.y[m] = (1.0 + 0.5 * tm + 2.0 * tm * tm) * mode;
    }
    evaluate_rhs(fine, rhs);

    auto restrict_t = node_restriction_matrix(fine_rule, coarse_rule);
    auto coarse_y = apply_node_matrix(restrict_t, fine.y);
    NodeTrajectory coarse;
    coarse.y.clear();
    for (auto& f : coarse_y) coarse.y.push_back(transfer(f, cg));
    coarse.f_lin.assign(3, SpatialField(cg));
    evaluate_rhs(coarse, rhs);

    auto tau = fas_tau(fine, rhs, fine_rule, coarse, rhs, coarse_rule, restrict_t, cg, 0.7);
    for (const auto& t : tau) CHECK(l2_norm(t) < 1e-12);
  }

  SUBCASE("coarse collocation with tau reproduces the fine solution at coarse nodes") {
    auto fine_rule = build_lobatto_rule(5);
    auto coarse_rule = build_lobatto_rule(3);
    auto g = tiny_grid();
    auto rhs = dahlquist_rhs();
    const double dt = 0.5;

    auto yf = dahlquist_collocation(fine_rule, -1.0, dt, 1.0);
    SpatialField y0(g, 1.0);
    auto fine = make_trajectory(0, 0.0, dt, fine_rule, rhs, y0);
    for (int m = 0; m < 5; ++m) fine.y[m].fill(yf[m]);
    evaluate_rhs(fine, rhs);

    auto restrict_t = node_restriction_matrix(fine_rule, coarse_rule);
    auto cy = apply_node_matrix(restrict_t, fine.y);
    NodeTrajectory coarse;
    coarse.y = cy;
    coarse.f_lin.assign(3, SpatialField(g));
    evaluate_rhs(coarse, rhs);

    auto tau = fas_tau(fine, rhs, fine_rule, coarse, rhs, coarse_rule, restrict_t, g, dt);
    std::vector<double> tau_scalar(3, 0.0);
    for (int m = 0; m < 3; ++m) tau_scalar[m] = tau[m][0];
    auto yc = dahlquist_collocation(coarse_rule, -1.0, dt, 1.0, tau_scalar);
    // Lobatto-3 nodes sit inside Lobatto-5 at indices 0, 2, 4.
    CHECK(std::abs(yc[1] - yf[2]) < 1e-10);
    CHECK(std::abs(yc[2] - yf[4]) < 1e-10);
  }
}

TEST_CASE("dense output reproduces polynomial node data") {
  auto rule = build_lobatto_rule(4);
  auto g = tiny_grid();
  StepRhs rhs;
  SpatialField y0(g, 1.0);
  auto traj = make_trajectory(0, 0.0, 1.0, rule, rhs, y0);
  for (int m = 0; m < 4; ++m) {
    const double tm = rule.nodes[m];
    traj.y[m].fill(1.0 + tm + tm * tm * tm);
  }
  const double th = 0.37;
  auto v = interpolate_in_step(traj, rule, th);
  CHECK(v[0] == doctest::Approx(1.0 + th + th * th * th).epsilon(1e-13));
}
