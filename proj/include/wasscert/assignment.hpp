#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wasscert {

struct Assignment {
  /// column assigned to each row; a permutation of 0..n-1
  std::vector<std::size_t> col_for_row;
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a dense n x n row-major cost matrix.
///
/// Shortest augmenting path method (Jonker-Volgenant family, Dijkstra on
/// reduced costs with dual potentials), O(n^3). Rows are augmented in index
/// order; among equal tentative distances a free column wins, then the lowest
/// index, so the returned permutation is deterministic.
///
/// Throws NumericalError on non-finite costs.
Assignment solve_assignment(std::span<const double> cost, std::size_t n);

}  // namespace wasscert
