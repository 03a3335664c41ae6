#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pintoc {

enum class Basis : std::uint32_t { periodic_fourier = 0, neumann_cosine = 1 };

/// Tensor grid description. Periodic grids place points at x_j = j*h with
/// h = extent/points (no duplicated endpoint); Neumann-cosine grids use the
/// midpoint layout x_j = (j+1/2)*h so the cosine modes are exact
/// eigenfunctions of the discrete Laplacian and the uniform-weight inner
/// product is exact for resolvable modes.
struct GridSpec {
  int dims = 1;  // 1 or 3
  std::array<int, 3> points{1, 1, 1};
  std::array<double, 3> extents{1.0, 1.0, 1.0};
  Basis basis = Basis::periodic_fourier;

  int total_points() const { return points[0] * points[1] * points[2]; }
  double volume() const { return extents[0] * extents[1] * extents[2]; }
  double cell_volume() const { return volume() / total_points(); }
  /// Coordinate of grid point j along dimension d.
  double coord(int d, int j) const;

  bool operator==(const GridSpec& o) const {
    return dims == o.dims && points == o.points && extents == o.extents && basis == o.basis;
  }
  bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

GridSpec make_grid_1d(int points, double extent, Basis basis);
GridSpec make_grid_3d(int points_per_dim, double extent_per_dim, Basis basis);

/// Throws std::invalid_argument on invalid point counts or unsupported
/// basis/dimension combinations.
void validate_grid(const GridSpec& g);

/// Real-valued field on a tensor grid; values in row-major order with the
/// x index fastest. Value semantics throughout.
class SpatialField {
 public:
  SpatialField() = default;
  explicit SpatialField(const GridSpec& grid, double fill = 0.0);
  SpatialField(const GridSpec& grid, std::vector<double> values);

  const GridSpec& grid() const { return grid_; }
  int size() const { return static_cast<int>(values_.size()); }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double& operator[](int i) { return values_[i]; }
  double operator[](int i) const { return values_[i]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  SpatialField& operator+=(const SpatialField& o);
  SpatialField& operator-=(const SpatialField& o);
  SpatialField& operator*=(double a);
  /// this += a * o
  void axpy(double a, const SpatialField& o);
  void fill(double v);

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

SpatialField operator+(SpatialField a, const SpatialField& b);
SpatialField operator-(SpatialField a, const SpatialField& b);
SpatialField operator*(double a, SpatialField f);

/// Spectral Laplacian in the grid's basis.
SpatialField laplacian(const SpatialField& f);

/// Solve (I - a*kappa*Laplacian + a*shift*I) g = rhs by diagonal spectral
/// division. Throws if a mode's diagonal entry vanishes.
SpatialField implicit_solve(const SpatialField& rhs, double a, double kappa, double shift = 0.0);

/// exp(dt * kappa * Laplacian) f, exact for the discretized operator
/// (per-mode factor exp(-dt*kappa*|k|^2)).
SpatialField exp_propagate(const SpatialField& f, double kappa, double dt);

/// Spectral interpolation (mode zero-padding) or truncation between grids of
/// the same basis and extents with point counts related by an integer ratio.
SpatialField transfer(const SpatialField& f, const GridSpec& target);

/// Uniform-grid L2(Omega) inner product: cell_volume * sum f_i g_i.
double inner(const SpatialField& f, const SpatialField& g);
double l2_norm(const SpatialField& f);
double max_norm(const SpatialField& f);

/// Spectral-coefficient energy matching inner(f,f) (Parseval); test hook.
double spectral_energy(const SpatialField& f);

/// Evaluate a callable of coordinates on the grid.
template <typename F>
SpatialField field_from_function(const GridSpec& g, F&& fn) {
  SpatialField out(g);
  int idx = 0;
  for (int k = 0; k < g.points[2]; ++k)
    for (int j = 0; j < g.points[1]; ++j)
      for (int i = 0; i < g.points[0]; ++i) {
        const double x = g.coord(0, i);
        const double y = g.dims > 1 ? g.coord(1, j) : 0.0;
        const double z = g.dims > 2 ? g.coord(2, k) : 0.0;
        out[idx++] = fn(x, y, z);
      }
  return out;
}

}  // namespace pintoc
