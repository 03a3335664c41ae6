#include "pintoc/trajectory.hpp"

#include <stdexcept>

namespace pintoc {

ControlTrajectory::ControlTrajectory(const TimeDecomposition& td, const QuadratureRule& fine_rule,
                                     const GridSpec& grid)
    : td_(td), rule_(fine_rule), grid_(grid) {
  steps_.assign(td.num_steps, std::vector<SpatialField>(fine_rule.num_nodes, SpatialField(grid, 0.0)));
}

void ControlTrajectory::axpy(double a, const ControlTrajectory& o) {
  if (!compatible_with(o)) throw std::invalid_argument("ControlTrajectory: decomposition mismatch");
  for (size_t s = 0; s < steps_.size(); ++s)
    for (size_t m = 0; m < steps_[s].size(); ++m) steps_[s][m].axpy(a, o.steps_[s][m]);
}

ControlTrajectory& ControlTrajectory::operator*=(double a) {
  for (auto& s : steps_)
    for (auto& f : s) f *= a;
  return *this;
}

void ControlTrajectory::fill(double v) {
  for (auto& s : steps_)
    for (auto& f : s) f.fill(v);
}

bool ControlTrajectory::compatible_with(const ControlTrajectory& o) const {
  return td_.num_steps == o.td_.num_steps && td_.dt == o.td_.dt &&
         rule_.num_nodes == o.rule_.num_nodes && grid_ == o.grid_;
}

}  // namespace pintoc
