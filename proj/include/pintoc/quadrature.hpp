#pragma once

#include <vector>

#include "pintoc/matrix.hpp"

namespace pintoc {

/// Lobatto IIIA collocation rule on the unit interval.
///
/// nodes[0] = 0 and nodes[M] = 1 are always included; the rule is exact for
/// polynomials up to degree 2M-1 on the full step (order 2M as a collocation
/// method). Q holds the spectral integration weights w_{m,i}, QI the
/// lower-triangular implicit correction weights from the LU decomposition of
/// Q^T (Weiser), and QE the strictly-lower-triangular forward-Euler weights.
struct QuadratureRule {
  int num_nodes = 0;          // M+1
  std::vector<double> nodes;  // on [0,1], strictly increasing, symmetric
  DenseMatrix Q;              // (M+1)x(M+1), row m integrates over [0, nodes[m]]
  DenseMatrix QI;             // lower triangular, QI(m,i) = 0 for i > m
  DenseMatrix QE;             // strictly lower triangular, QE(m,i) = 0 for i >= m

  int max_node() const { return num_nodes - 1; }
};

/// Build the Lobatto IIIA rule with the given total node count (2..12).
/// Throws std::invalid_argument outside the supported range.
QuadratureRule build_lobatto_rule(int num_nodes);

/// Matrix evaluating the Lagrange interpolant through `source_nodes` at
/// `targets`: result is |targets| x |source_nodes|. Exact (delta rows) when a
/// target coincides with a source node.
DenseMatrix lagrange_interpolation_matrix(const std::vector<double>& source_nodes,
                                          const std::vector<double>& targets);

/// Time prolongation: evaluate the coarse-node interpolant at the fine nodes.
/// Requires coarse.num_nodes <= fine.num_nodes.
DenseMatrix node_interpolation_matrix(const QuadratureRule& fine, const QuadratureRule& coarse);

/// Time restriction: evaluate the fine-node interpolant at the coarse nodes.
/// Degenerates to pointwise selection when the node sets nest.
DenseMatrix node_restriction_matrix(const QuadratureRule& fine, const QuadratureRule& coarse);

}  // namespace pintoc
