#pragma once

#include <vector>

#include "pintoc/field.hpp"
#include "pintoc/pfasst.hpp"
#include "pintoc/quadrature.hpp"

namespace pintoc {

/// Control (or gradient/direction) values at all fine-level quadrature nodes
/// of every time step. Node values at shared step boundaries are stored on
/// both neighbors and kept equal by the nodewise arithmetic.
class ControlTrajectory {
 public:
  ControlTrajectory() = default;
  ControlTrajectory(const TimeDecomposition& td, const QuadratureRule& fine_rule, const GridSpec& grid);

  const TimeDecomposition& decomposition() const { return td_; }
  const QuadratureRule& rule() const { return rule_; }
  const GridSpec& grid() const { return grid_; }
  int num_steps() const { return td_.num_steps; }
  int nodes_per_step() const { return rule_.num_nodes; }

  SpatialField& at(int step, int node) { return steps_[step][node]; }
  const SpatialField& at(int step, int node) const { return steps_[step][node]; }
  std::vector<SpatialField>& step_nodes(int step) { return steps_[step]; }
  const std::vector<SpatialField>& step_nodes(int step) const { return steps_[step]; }

  double node_time(int step, int node) const { return td_.step_t0(step) + td_.dt * rule_.nodes[node]; }

  /// this += a * o (nodewise)
  void axpy(double a, const ControlTrajectory& o);
  ControlTrajectory& operator*=(double a);
  void fill(double v);

  bool compatible_with(const ControlTrajectory& o) const;

  /// Sample a function of (t, x, y, z) at every node.
  template <typename F>
  static ControlTrajectory from_function(const TimeDecomposition& td, const QuadratureRule& rule,
                                         const GridSpec& grid, F&& fn) {
    ControlTrajectory u(td, rule, grid);
    for (int s = 0; s < td.num_steps; ++s)
      for (int m = 0; m < rule.num_nodes; ++m) {
        const double t = u.node_time(s, m);
        u.at(s, m) = field_from_function(grid, [&](double x, double y, double z) { return fn(t, x, y, z); });
      }
    return u;
  }

 private:
  TimeDecomposition td_;
  QuadratureRule rule_;
  GridSpec grid_;
  std::vector<std::vector<SpatialField>> steps_;
};

}  // namespace pintoc
