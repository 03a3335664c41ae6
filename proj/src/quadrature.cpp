#include "pintoc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pintoc {

namespace {

// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  // (1-x^2) P_n' = n (P_{n-1} - x P_n)
  dp = n * (p0 - x * p1) / (1.0 - x * x);
}

// Interior Lobatto nodes on (-1,1): roots of P'_M, Newton from
// Chebyshev-Lobatto guesses. Tolerance 1e-15 on the Newton update.
std::vector<double> lobatto_interior(int m) {
  const double pi = std::numbers::pi;
  std::vector<double> roots;
  roots.reserve(m - 1);
  for (int i = 1; i < m; ++i) {
    double x = std::cos(pi * i / m);
    for (int it = 0; it < 100; ++it) {
      double p, dp;
      legendre(m, x, p, dp);
      // g = P'_M, g' = P''_M from the Legendre ODE
      const double g = dp;
      const double gp = (2.0 * x * dp - m * (m + 1.0) * p) / (1.0 - x * x);
      const double dx = g / gp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Gauss-Legendre nodes/weights on [-1,1] (auxiliary quadrature for the
// entries of Q).
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  const double pi = std::numbers::pi;
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double xi = std::cos(pi * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      legendre(n, xi, p, dp);
      const double dx = p / dp;
      xi -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre(n, xi, p, dp);
    x[i] = xi;
    w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
  }
}

double lagrange_basis(const std::vector<double>& nodes, int i, double s) {
  double v = 1.0;
  for (size_t j = 0; j < nodes.size(); ++j) {
    if (static_cast<int>(j) == i) continue;
    v *= (s - nodes[j]) / (nodes[i] - nodes[j]);
  }
  return v;
}

// QI = U^T where Q^T = L U, Gaussian elimination without pivoting, zero
// pivot columns skipped (they stay zero for Lobatto's t=0 row).
DenseMatrix lu_correction(const DenseMatrix& q) {
  const int n = q.rows();
  DenseMatrix u(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) u(r, c) = q(c, r);
  for (int i = 0; i < n - 1; ++i) {
    if (u(i, i) == 0.0) continue;
    for (int r = i + 1; r < n; ++r) {
      const double f = u(r, i) / u(i, i);
      for (int c = i; c < n; ++c) u(r, c) -= f * u(i, c);
    }
  }
  DenseMatrix qi(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) qi(r, c) = u(c, r);
  return qi;
}

}  // namespace

QuadratureRule build_lobatto_rule(int num_nodes) {
  if (num_nodes < 2 || num_nodes > 12)
    throw std::invalid_argument("build_lobatto_rule: node count must be in 2..12, got " +
                                std::to_string(num_nodes));
  const int m = num_nodes - 1;

  QuadratureRule rule;
  rule.num_nodes = num_nodes;
  rule.nodes.assign(num_nodes, 0.0);
  rule.nodes[0] = 0.0;
  rule.nodes[m] = 1.0;
  const auto interior = lobatto_interior(m);
  for (int i = 1; i < m; ++i) rule.nodes[i] = 0.5 * (interior[i - 1] + 1.0);
  // Symmetrize about 1/2 so reflected node times match exactly.
  for (int i = 1; i < m; ++i) {
    const double sym = 0.5 * (rule.nodes[i] + 1.0 - rule.nodes[m - i]);
    rule.nodes[i] = sym;
  }
  if (m % 2 == 0) rule.nodes[m / 2] = 0.5;

  // Q by Gauss-Legendre integration of the Lagrange basis over [0, tau_m].
  std::vector<double> gx, gw;
  gauss_legendre(num_nodes + 1, gx, gw);
  rule.Q = DenseMatrix(num_nodes, num_nodes);
  for (int r = 1; r < num_nodes; ++r) {
    const double tm = rule.nodes[r];
    for (int i = 0; i < num_nodes; ++i) {
      double acc = 0.0;
      for (size_t k = 0; k < gx.size(); ++k) {
        const double s = 0.5 * tm * (gx[k] + 1.0);
        acc += gw[k] * lagrange_basis(rule.nodes, i, s);
      }
      rule.Q(r, i) = 0.5 * tm * acc;
    }
  }

  rule.QI = lu_correction(rule.Q);

  rule.QE = DenseMatrix(num_nodes, num_nodes);
  for (int r = 1; r < num_nodes; ++r)
    for (int i = 0; i < r; ++i) rule.QE(r, i) = rule.nodes[i + 1] - rule.nodes[i];

  return rule;
}

DenseMatrix lagrange_interpolation_matrix(const std::vector<double>& source_nodes,
                                          const std::vector<double>& targets) {
  const int ns = static_cast<int>(source_nodes.size());
  const int nt = static_cast<int>(targets.size());
  DenseMatrix p(nt, ns);
  for (int r = 0; r < nt; ++r) {
    int hit = -1;
    for (int i = 0; i < ns; ++i) {
      if (std::abs(targets[r] - source_nodes[i]) < 1e-14) {
        hit = i;
        break;
      }
    }
    if (hit >= 0) {
      p(r, hit) = 1.0;
      continue;
    }
    for (int i = 0; i < ns; ++i) p(r, i) = lagrange_basis(source_nodes, i, targets[r]);
  }
  return p;
}

DenseMatrix node_interpolation_matrix(const QuadratureRule& fine, const QuadratureRule& coarse) {
  if (coarse.num_nodes > fine.num_nodes)
    throw std::invalid_argument("node_interpolation_matrix: coarse rule has more nodes than fine rule");
  return lagrange_interpolation_matrix(coarse.nodes, fine.nodes);
}

DenseMatrix node_restriction_matrix(const QuadratureRule& fine, const QuadratureRule& coarse) {
  if (coarse.num_nodes > fine.num_nodes)
    throw std::invalid_argument("node_restriction_matrix: coarse rule has more nodes than fine rule");
  return lagrange_interpolation_matrix(fine.nodes, coarse.nodes);
}

std::vector<double> solve_dense(DenseMatrix a, std::vector<double> b) {
  const int n = a.rows();
  if (a.cols() != n || static_cast<int>(b.size()) != n)
    throw std::invalid_argument("solve_dense: shape mismatch");
  for (int i = 0; i < n; ++i) {
    int piv = i;
    for (int r = i + 1; r < n; ++r)
      if (std::abs(a(r, i)) > std::abs(a(piv, i))) piv = r;
    if (piv != i) {
      for (int c = 0; c < n; ++c) std::swap(a(i, c), a(piv, c));
      std::swap(b[i], b[piv]);
    }
    if (a(i, i) == 0.0) throw std::runtime_error("solve_dense: singular matrix");
    for (int r = i + 1; r < n; ++r) {
      const double f = a(r, i) / a(i, i);
      for (int c = i; c < n; ++c) a(r, c) -= f * a(i, c);
      b[r] -= f * b[i];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double acc = b[i];
    for (int c = i + 1; c < n; ++c) acc -= a(i, c) * x[c];
    x[i] = acc / a(i, i);
  }
  return x;
}

}  // namespace pintoc
