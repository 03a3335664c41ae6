#include "pintoc/field.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace pintoc {

double GridSpec::coord(int d, int j) const {
  const double h = extents[d] / points[d];
  return basis == Basis::neumann_cosine ? (j + 0.5) * h : j * h;
}

GridSpec make_grid_1d(int points, double extent, Basis basis) {
  GridSpec g;
  g.dims = 1;
  g.points = {points, 1, 1};
  g.extents = {extent, 1.0, 1.0};
  g.basis = basis;
  validate_grid(g);
  return g;
}

GridSpec make_grid_3d(int points_per_dim, double extent_per_dim, Basis basis) {
  GridSpec g;
  g.dims = 3;
  g.points = {points_per_dim, points_per_dim, points_per_dim};
  g.extents = {extent_per_dim, extent_per_dim, extent_per_dim};
  g.basis = basis;
  validate_grid(g);
  return g;
}

void validate_grid(const GridSpec& g) {
  if (g.dims != 1 && g.dims != 3) throw std::invalid_argument("grid: dims must be 1 or 3");
  if (g.basis == Basis::neumann_cosine && g.dims != 1)
    throw std::invalid_argument("grid: Neumann-cosine basis is 1-D only");
  for (int d = 0; d < g.dims; ++d) {
    if (g.points[d] < 4) throw std::invalid_argument("grid: need at least 4 points per dimension");
    if (g.extents[d] <= 0.0) throw std::invalid_argument("grid: extents must be positive");
  }
  for (int d = g.dims; d < 3; ++d)
    if (g.points[d] != 1) throw std::invalid_argument("grid: unused dimensions must have 1 point");
}

SpatialField::SpatialField(const GridSpec& grid, double fill)
    : grid_(grid), values_(static_cast<size_t>(grid.total_points()), fill) {}

SpatialField::SpatialField(const GridSpec& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (static_cast<int>(values_.size()) != grid.total_points())
    throw std::invalid_argument("SpatialField: value count does not match grid");
}

namespace {
void require_same_grid(const SpatialField& a, const SpatialField& b) {
  if (a.grid() != b.grid()) throw std::invalid_argument("field operation: grid mismatch");
}
}  // namespace

SpatialField& SpatialField::operator+=(const SpatialField& o) {
  require_same_grid(*this, o);
  for (size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

SpatialField& SpatialField::operator-=(const SpatialField& o) {
  require_same_grid(*this, o);
  for (size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

SpatialField& SpatialField::operator*=(double a) {
  for (double& v : values_) v *= a;
  return *this;
}

void SpatialField::axpy(double a, const SpatialField& o) {
  require_same_grid(*this, o);
  for (size_t i = 0; i < values_.size(); ++i) values_[i] += a * o.values_[i];
}

void SpatialField::fill(double v) { values_.assign(values_.size(), v); }

SpatialField operator+(SpatialField a, const SpatialField& b) { return a += b; }
SpatialField operator-(SpatialField a, const SpatialField& b) { return a -= b; }
SpatialField operator*(double a, SpatialField f) { return f *= a; }

// ---------------------------------------------------------------------------
// Spectral backend. Plans are cached per grid under a mutex; execution uses
// the new-array interface on caller-owned buffers (plans are created with
// FFTW_UNALIGNED so any heap buffer is acceptable).
// ---------------------------------------------------------------------------

namespace {

struct GridKey {
  int dims;
  std::array<int, 3> points;
  Basis basis;
  bool operator<(const GridKey& o) const {
    if (dims != o.dims) return dims < o.dims;
    if (points != o.points) return points < o.points;
    return basis < o.basis;
  }
};

struct SpectralPlans {
  fftw_plan forward = nullptr;   // r2c or REDFT10
  fftw_plan backward = nullptr;  // c2r or REDFT01
  int complex_size = 0;          // number of spectral entries
};

std::mutex g_plan_mutex;
std::map<GridKey, SpectralPlans> g_plans;

const SpectralPlans& plans_for(const GridSpec& g) {
  GridKey key{g.dims, g.points, g.basis};
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto it = g_plans.find(key);
  if (it != g_plans.end()) return it->second;

  SpectralPlans p;
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  if (g.basis == Basis::neumann_cosine) {
    const int n = g.points[0];
    p.complex_size = n;
    std::vector<double> in(n), out(n);
    p.forward = fftw_plan_r2r_1d(n, in.data(), out.data(), FFTW_REDFT10, flags);
    p.backward = fftw_plan_r2r_1d(n, in.data(), out.data(), FFTW_REDFT01, flags);
  } else if (g.dims == 1) {
    const int n = g.points[0];
    p.complex_size = n / 2 + 1;
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(p.complex_size);
    p.forward = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), flags);
    p.backward = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(out.data()), in.data(), flags);
  } else {
    // Storage is x-fastest, so FFTW sees dimensions (nz, ny, nx) and the
    // halved spectral dimension is x.
    const int nx = g.points[0], ny = g.points[1], nz = g.points[2];
    p.complex_size = nz * ny * (nx / 2 + 1);
    std::vector<double> in(static_cast<size_t>(g.total_points()));
    std::vector<std::complex<double>> out(p.complex_size);
    p.forward =
        fftw_plan_dft_r2c_3d(nz, ny, nx, in.data(), reinterpret_cast<fftw_complex*>(out.data()), flags);
    p.backward =
        fftw_plan_dft_c2r_3d(nz, ny, nx, reinterpret_cast<fftw_complex*>(out.data()), in.data(), flags);
  }
  return g_plans.emplace(key, p).first->second;
}

// Laplacian symbol: eig[i] >= 0 with Laplacian = -eig per mode.
const std::vector<double>& eigenvalues_for(const GridSpec& g) {
  static std::mutex m;
  static std::map<GridKey, std::vector<double>> cache;
  GridKey key{g.dims, g.points, g.basis};
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  const double pi = std::numbers::pi;
  std::vector<double> eig;
  if (g.basis == Basis::neumann_cosine) {
    const int n = g.points[0];
    eig.resize(n);
    for (int k = 0; k < n; ++k) {
      const double kw = pi * k / g.extents[0];
      eig[k] = kw * kw;
    }
  } else if (g.dims == 1) {
    const int n = g.points[0];
    eig.resize(n / 2 + 1);
    for (int k = 0; k <= n / 2; ++k) {
      const double kw = 2.0 * pi * k / g.extents[0];
      eig[k] = kw * kw;
    }
  } else {
    const int nx = g.points[0], ny = g.points[1], nz = g.points[2];
    eig.resize(static_cast<size_t>(nz) * ny * (nx / 2 + 1));
    size_t idx = 0;
    for (int kz = 0; kz < nz; ++kz) {
      const int sz = kz <= nz / 2 ? kz : kz - nz;
      const double wz = 2.0 * pi * sz / g.extents[2];
      for (int ky = 0; ky < ny; ++ky) {
        const int sy = ky <= ny / 2 ? ky : ky - ny;
        const double wy = 2.0 * pi * sy / g.extents[1];
        for (int kx = 0; kx <= nx / 2; ++kx) {
          const double wx = 2.0 * pi * kx / g.extents[0];
          eig[idx++] = wx * wx + wy * wy + wz * wz;
        }
      }
    }
  }
  return cache.emplace(key, std::move(eig)).first->second;
}

// Forward transform to normalized coefficients.
std::vector<std::complex<double>> to_spectral_complex(const SpatialField& f) {
  const auto& p = plans_for(f.grid());
  std::vector<double> in(f.values());
  std::vector<std::complex<double>> out(p.complex_size);
  fftw_execute_dft_r2c(p.forward, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / f.grid().total_points();
  for (auto& c : out) c *= scale;
  return out;
}

SpatialField from_spectral_complex(const GridSpec& g, std::vector<std::complex<double>> coeff) {
  const auto& p = plans_for(g);
  SpatialField out(g);
  fftw_execute_dft_c2r(p.backward, reinterpret_cast<fftw_complex*>(coeff.data()), out.data());
  return out;
}

// Cosine coefficients a_k with f(x) = sum_k a_k cos(pi k x / L).
std::vector<double> to_spectral_cosine(const SpatialField& f) {
  const auto& p = plans_for(f.grid());
  const int n = f.grid().points[0];
  std::vector<double> in(f.values()), out(n);
  fftw_execute_r2r(p.forward, in.data(), out.data());
  out[0] /= 2.0 * n;
  for (int k = 1; k < n; ++k) out[k] /= n;
  return out;
}

SpatialField from_spectral_cosine(const GridSpec& g, std::vector<double> coeff) {
  const auto& p = plans_for(g);
  const int n = g.points[0];
  for (int k = 1; k < n; ++k) coeff[k] *= 0.5;
  SpatialField out(g);
  fftw_execute_r2r(p.backward, coeff.data(), out.data());
  return out;
}

template <typename MultiplierFn>
SpatialField apply_multiplier(const SpatialField& f, MultiplierFn&& mult) {
  const auto& eig = eigenvalues_for(f.grid());
  if (f.grid().basis == Basis::neumann_cosine) {
    auto c = to_spectral_cosine(f);
    for (size_t k = 0; k < c.size(); ++k) c[k] *= mult(eig[k]);
    return from_spectral_cosine(f.grid(), std::move(c));
  }
  auto c = to_spectral_complex(f);
  for (size_t k = 0; k < c.size(); ++k) c[k] *= mult(eig[k]);
  return from_spectral_complex(f.grid(), std::move(c));
}

}  // namespace

SpatialField laplacian(const SpatialField& f) {
  return apply_multiplier(f, [](double e) { return -e; });
}

SpatialField implicit_solve(const SpatialField& rhs, double a, double kappa, double shift) {
  const auto& eig = eigenvalues_for(rhs.grid());
  for (double e : eig) {
    const double d = 1.0 + a * (kappa * e + shift);
    if (std::abs(d) < 1e-300)
      throw std::runtime_error("implicit_solve: singular spectral mode (zero diagonal entry)");
  }
  return apply_multiplier(rhs, [a, kappa, shift](double e) { return 1.0 / (1.0 + a * (kappa * e + shift)); });
}

SpatialField exp_propagate(const SpatialField& f, double kappa, double dt) {
  if (dt < 0.0) throw std::invalid_argument("exp_propagate: dt must be nonnegative");
  if (dt == 0.0) return f;
  return apply_multiplier(f, [kappa, dt](double e) { return std::exp(-dt * kappa * e); });
}

SpatialField transfer(const SpatialField& f, const GridSpec& target) {
  const GridSpec& src = f.grid();
  if (src == target) return f;
  if (src.basis != target.basis || src.dims != target.dims || src.extents != target.extents)
    throw std::invalid_argument("transfer: incompatible grids (basis/dims/extents differ)");
  for (int d = 0; d < src.dims; ++d) {
    const int a = src.points[d], b = target.points[d];
    if ((a % b != 0) && (b % a != 0))
      throw std::invalid_argument("transfer: point counts must be related by an integer ratio");
  }

  if (src.basis == Basis::neumann_cosine) {
    const auto c = to_spectral_cosine(f);
    std::vector<double> ct(target.points[0], 0.0);
    const int keep = std::min(src.points[0], target.points[0]);
    for (int k = 0; k < keep; ++k) ct[k] = c[k];
    return from_spectral_cosine(target, std::move(ct));
  }

  const auto c = to_spectral_complex(f);
  const auto& pt = plans_for(target);
  std::vector<std::complex<double>> ct(pt.complex_size, 0.0);
  const int sxh = src.points[0] / 2 + 1;
  // Keep modes strictly below both Nyquists in every dimension.
  std::array<int, 3> half{};
  for (int d = 0; d < 3; ++d) half[d] = std::min(src.points[d], target.points[d]) / 2;

  if (src.dims == 1) {
    for (int k = 0; k < half[0]; ++k) ct[k] = c[k];
    return from_spectral_complex(target, std::move(ct));
  }

  const int tnx = target.points[0], tny = target.points[1], tnz = target.points[2];
  const int txh = tnx / 2 + 1;
  size_t idx = 0;
  for (int kz = 0; kz < tnz; ++kz) {
    const int sz = kz <= tnz / 2 ? kz : kz - tnz;
    for (int ky = 0; ky < tny; ++ky) {
      const int sy = ky <= tny / 2 ? ky : ky - tny;
      for (int kx = 0; kx < txh; ++kx, ++idx) {
        if (kx >= half[0] || std::abs(sy) >= half[1] || std::abs(sz) >= half[2]) continue;
        const int skz = sz >= 0 ? sz : sz + src.points[2];
        const int sky = sy >= 0 ? sy : sy + src.points[1];
        ct[idx] = c[(static_cast<size_t>(skz) * src.points[1] + sky) * sxh + kx];
      }
    }
  }
  return from_spectral_complex(target, std::move(ct));
}

double inner(const SpatialField& f, const SpatialField& g) {
  require_same_grid(f, g);
  double acc = 0.0;
  const double* a = f.data();
  const double* b = g.data();
  const int n = f.size();
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return f.grid().cell_volume() * acc;
}

double l2_norm(const SpatialField& f) { return std::sqrt(inner(f, f)); }

double max_norm(const SpatialField& f) {
  double m = 0.0;
  for (int i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i]));
  return m;
}

double spectral_energy(const SpatialField& f) {
  const double vol = f.grid().volume();
  if (f.grid().basis == Basis::neumann_cosine) {
    const auto c = to_spectral_cosine(f);
    double acc = c[0] * c[0];
    for (size_t k = 1; k < c.size(); ++k) acc += 0.5 * c[k] * c[k];
    return vol * acc;
  }
  const auto c = to_spectral_complex(f);
  const int nx = f.grid().points[0];
  const int xh = nx / 2 + 1;
  double acc = 0.0;
  for (size_t i = 0; i < c.size(); ++i) {
    const int kx = static_cast<int>(i % xh);
    const double w = (kx > 0 && kx < nx - kx) ? 2.0 : 1.0;
    acc += w * std::norm(c[i]);
  }
  return vol * acc;
}

}  // namespace pintoc
