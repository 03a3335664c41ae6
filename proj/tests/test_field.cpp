#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pintoc/field.hpp"
#include "pintoc/snapshot.hpp"

using namespace pintoc;
constexpr double pi = std::numbers::pi;

namespace {

SpatialField random_field(const GridSpec& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  SpatialField f(g);
  for (int i = 0; i < f.size(); ++i) f[i] = dist(rng);
  return f;
}

double rel_diff(const SpatialField& a, const SpatialField& b) {
  return l2_norm(a - b) / std::max(l2_norm(b), 1e-300);
}

}  // namespace

TEST_CASE("laplacian") {
  SUBCASE("constant field maps to zero") {
    auto g = make_grid_1d(32, 1.0, Basis::periodic_fourier);
    SpatialField f(g, 3.5);
    CHECK(max_norm(laplacian(f)) < 1e-12);
  }
  SUBCASE("periodic sine mode") {
    auto g = make_grid_1d(64, 1.0, Basis::periodic_fourier);
    auto f = field_from_function(g, [](double x, double, double) { return std::sin(2 * pi * x); });
    auto expect = field_from_function(g, [](double x, double, double) { return -4 * pi * pi * std::sin(2 * pi * x); });
    CHECK(l2_norm(laplacian(f) - expect) < 1e-10);
  }
  SUBCASE("cosine mode with Neumann basis on [0,20]") {
    auto g = make_grid_1d(64, 20.0, Basis::neumann_cosine);
    auto f = field_from_function(g, [](double x, double, double) { return std::cos(pi * x / 20.0); });
    const double lam = (pi / 20.0) * (pi / 20.0);
    auto expect = field_from_function(g, [lam](double x, double, double) { return -lam * std::cos(pi * x / 20.0); });
    CHECK(l2_norm(laplacian(f) - expect) < 1e-10);
  }
  SUBCASE("3-D product of sines") {
    auto g = make_grid_3d(16, 1.0, Basis::periodic_fourier);
    auto f = field_from_function(g, [](double x, double y, double z) {
      return std::sin(2 * pi * x) * std::sin(2 * pi * y) * std::sin(2 * pi * z);
    });
    auto lf = laplacian(f);
    SpatialField expect = -12.0 * pi * pi * f;
    CHECK(rel_diff(lf, expect) < 1e-12);
  }
  SUBCASE("grid mismatch throws") {
    auto a = SpatialField(make_grid_1d(16, 1.0, Basis::periodic_fourier), 1.0);
    auto b = SpatialField(make_grid_1d(32, 1.0, Basis::periodic_fourier), 1.0);
    CHECK_THROWS_AS(a += b, std::invalid_argument);
  }
}

TEST_CASE("implicit_solve") {
  auto g = make_grid_1d(64, 1.0, Basis::periodic_fourier);
  auto f = field_from_function(g, [](double x, double, double) { return std::sin(2 * pi * x); });

  SUBCASE("kappa = 0, shift = 0 returns the input") {
    // Identity up to the pinned transform round-trip normalization (1e-14).
    auto r = implicit_solve(f, 1.0, 0.0, 0.0);
    CHECK(l2_norm(r - f) < 1e-14 * l2_norm(f));
  }
  SUBCASE("single mode algebra") {
    auto r = implicit_solve(f, 1.0, 1.0, 0.0);
    SpatialField expect = (1.0 / (1.0 + 4 * pi * pi)) * f;
    CHECK(l2_norm(r - expect) < 1e-10);
  }
  SUBCASE("applying the operator recovers the right-hand side") {
    auto rhs = random_field(g, 7);
    const double a = 0.3, kappa = 2.0, shift = 0.7;
    auto sol = implicit_solve(rhs, a, kappa, shift);
    SpatialField back = sol - a * kappa * laplacian(sol);
    back.axpy(a * shift, sol);
    CHECK(rel_diff(back, rhs) < 1e-11);
  }
}

TEST_CASE("exp_propagate") {
  auto g = make_grid_1d(64, 1.0, Basis::periodic_fourier);
  auto f = field_from_function(g, [](double x, double, double) { return std::sin(2 * pi * x); });

  SUBCASE("dt = 0 is the identity") { CHECK(l2_norm(exp_propagate(f, 1.0, 0.0) - f) == 0.0); }
  SUBCASE("single mode decay") {
    auto r = exp_propagate(f, 1.0, 0.1);
    SpatialField expect = std::exp(-0.4 * pi * pi) * f;
    CHECK(l2_norm(r - expect) < 1e-12);
  }
  SUBCASE("semigroup property") {
    auto once = exp_propagate(f, 1.0, 0.2);
    auto twice = exp_propagate(exp_propagate(f, 1.0, 0.1), 1.0, 0.1);
    CHECK(l2_norm(once - twice) < 1e-12);
  }
}

TEST_CASE("transfer") {
  auto fine = make_grid_1d(64, 1.0, Basis::periodic_fourier);
  auto coarse = make_grid_1d(32, 1.0, Basis::periodic_fourier);

  SUBCASE("same grid is the identity") {
    auto f = random_field(fine, 3);
    CHECK(l2_norm(transfer(f, fine) - f) == 0.0);
  }
  SUBCASE("band-limited round trip") {
    auto f = field_from_function(fine, [](double x, double, double) { return std::sin(2 * pi * x); });
    auto back = transfer(transfer(f, coarse), fine);
    CHECK(l2_norm(back - f) < 1e-12);
  }
  SUBCASE("refining a constant preserves it") {
    SpatialField c(coarse, 2.25);
    auto r = transfer(c, fine);
    for (int i = 0; i < r.size(); ++i) CHECK(r[i] == doctest::Approx(2.25).epsilon(1e-13));
  }
  SUBCASE("3-D band-limited round trip") {
    auto f3 = make_grid_3d(16, 1.0, Basis::periodic_fourier);
    auto c3 = make_grid_3d(8, 1.0, Basis::periodic_fourier);
    auto f = field_from_function(f3, [](double x, double y, double z) {
      return std::sin(2 * pi * x) * std::sin(2 * pi * y) * std::sin(2 * pi * z) + 0.3 * std::cos(2 * pi * y);
    });
    CHECK(rel_diff(transfer(transfer(f, c3), f3), f) < 1e-12);
  }
  SUBCASE("cosine-basis round trip") {
    auto fc = make_grid_1d(128, 20.0, Basis::neumann_cosine);
    auto cc = make_grid_1d(64, 20.0, Basis::neumann_cosine);
    auto f = field_from_function(fc, [](double x, double, double) {
      return 1.0 + std::cos(pi * x / 20.0) + 0.25 * std::cos(3 * pi * x / 20.0);
    });
    CHECK(rel_diff(transfer(transfer(f, cc), fc), f) < 1e-12);
  }
  SUBCASE("incompatible grids throw") {
    auto other = make_grid_1d(48, 1.0, Basis::periodic_fourier);
    auto f = random_field(fine, 5);
    CHECK_THROWS_AS(transfer(f, other), std::invalid_argument);
    auto cos_grid = make_grid_1d(32, 1.0, Basis::neumann_cosine);
    CHECK_THROWS_AS(transfer(f, cos_grid), std::invalid_argument);
  }
}

TEST_CASE("inner products and norms") {
  SUBCASE("measure of the unit cube") {
    auto g = make_grid_3d(8, 1.0, Basis::periodic_fourier);
    SpatialField one(g, 1.0);
    CHECK(inner(one, one) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("integral of sin^2 over [0,1]") {
    auto g = make_grid_1d(64, 1.0, Basis::periodic_fourier);
    auto f = field_from_function(g, [](double x, double, double) { return std::sin(2 * pi * x); });
    CHECK(inner(f, f) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("bilinearity is exact") {
    auto g = make_grid_1d(16, 1.0, Basis::periodic_fourier);
    auto f = random_field(g, 11);
    auto h = random_field(g, 12);
    CHECK(inner(2.0 * f, h) == 2.0 * inner(f, h));
  }
  SUBCASE("Parseval identity") {
    for (auto g : {make_grid_1d(64, 1.0, Basis::periodic_fourier), make_grid_1d(64, 20.0, Basis::neumann_cosine)}) {
      auto f = random_field(g, 21);
      CHECK(spectral_energy(f) == doctest::Approx(inner(f, f)).epsilon(1e-12));
    }
    auto g3 = make_grid_3d(8, 1.0, Basis::periodic_fourier);
    auto f3 = random_field(g3, 22);
    CHECK(spectral_energy(f3) == doctest::Approx(inner(f3, f3)).epsilon(1e-12));
  }
}

TEST_CASE("laplacian is symmetric negative semi-definite") {
  for (auto g : {make_grid_1d(32, 1.0, Basis::periodic_fourier), make_grid_1d(32, 20.0, Basis::neumann_cosine)}) {
    auto f = random_field(g, 31);
    auto h = random_field(g, 32);
    CHECK(std::abs(inner(laplacian(f), h) - inner(f, laplacian(h))) < 1e-11 * l2_norm(f) * l2_norm(h));
    CHECK(inner(laplacian(f), f) <= 1e-12);
  }
}

TEST_CASE("spectral operators commute with transfer on band-limited fields") {
  auto fine = make_grid_1d(64, 1.0, Basis::periodic_fourier);
  auto coarse = make_grid_1d(32, 1.0, Basis::periodic_fourier);
  auto f = field_from_function(fine, [](double x, double, double) {
    return std::sin(2 * pi * x) + 0.5 * std::cos(6 * pi * x);
  });
  auto a = implicit_solve(transfer(f, coarse), 0.4, 1.3, 0.2);
  auto b = transfer(implicit_solve(f, 0.4, 1.3, 0.2), coarse);
  CHECK(l2_norm(a - b) < 1e-11);
  auto c = exp_propagate(transfer(f, coarse), 1.0, 0.05);
  auto d = transfer(exp_propagate(f, 1.0, 0.05), coarse);
  CHECK(l2_norm(c - d) < 1e-11);
}

TEST_CASE("snapshot round trip is bitwise") {
  for (auto g : {make_grid_1d(32, 20.0, Basis::neumann_cosine), make_grid_3d(8, 1.0, Basis::periodic_fourier)}) {
    auto f = random_field(g, 41);
    std::stringstream ss;
    write_field_snapshot(ss, f);
    auto back = read_field_snapshot(ss);
    REQUIRE(back.grid() == f.grid());
    for (int i = 0; i < f.size(); ++i) CHECK(back[i] == f[i]);
  }
}

TEST_CASE("grid validation") {
  GridSpec g;
  g.dims = 2;
  CHECK_THROWS_AS(validate_grid(g), std::invalid_argument);
  CHECK_THROWS_AS(make_grid_1d(3, 1.0, Basis::periodic_fourier), std::invalid_argument);
  GridSpec cos3d;
  cos3d.dims = 3;
  cos3d.points = {8, 8, 8};
  cos3d.basis = Basis::neumann_cosine;
  CHECK_THROWS_AS(validate_grid(cos3d), std::invalid_argument);
}
