#include "wasscert/assignment.hpp"

#include <cmath>
#include <limits>

#include "wasscert/errors.hpp"

namespace wasscert {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr double kInf = std::numeric_limits<double>::infinity();

struct SolverState {
  explicit SolverState(std::size_t n)
      : u(n, 0.0), v(n, 0.0), shortest(n), path(n, kNone), col_for_row(n, kNone), row_for_col(n, kNone),
        row_done(n), col_done(n), touched_rows(), touched_cols() {
    touched_rows.reserve(n);
    touched_cols.reserve(n);
  }

  std::vector<double> u, v, shortest;
  std::vector<std::size_t> path, col_for_row, row_for_col;
  std::vector<char> row_done, col_done;
  std::vector<std::size_t> touched_rows, touched_cols;
};

// Dijkstra from `start_row` over reduced costs; returns the free column that
// ends the shortest augmenting path and its length through `min_val`.
std::size_t shortest_path(const double* cost, std::size_t n, std::size_t start_row, SolverState& s,
                          double& min_val) {
  for (std::size_t r : s.touched_rows) s.row_done[r] = 0;
  for (std::size_t c : s.touched_cols) s.col_done[c] = 0;
  s.touched_rows.clear();
  s.touched_cols.clear();
  std::fill(s.shortest.begin(), s.shortest.end(), kInf);

  min_val = 0.0;
  std::size_t i = start_row;
  for (;;) {
    s.row_done[i] = 1;
    s.touched_rows.push_back(i);
    const double* row = cost + i * n;
    const double base = min_val - s.u[i];
    double lowest = kInf;
    std::size_t best = kNone;
    bool best_free = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (s.col_done[j]) continue;
      const double r = base + row[j] - s.v[j];
      if (r < s.shortest[j]) {
        s.path[j] = i;
        s.shortest[j] = r;
      }
      const double d = s.shortest[j];
      const bool free = s.row_for_col[j] == kNone;
      if (d < lowest || (d == lowest && free && !best_free)) {
        lowest = d;
        best = j;
        best_free = free;
      }
    }
    if (best == kNone || lowest == kInf) throw NumericalError("assignment: infeasible cost matrix");
    min_val = lowest;
    s.col_done[best] = 1;
    s.touched_cols.push_back(best);
    if (best_free) return best;
    i = s.row_for_col[best];
  }
}

}  // namespace

Assignment solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw NumericalError("assignment: cost matrix is not n x n");
  for (double c : cost) {
    if (!std::isfinite(c)) throw NumericalError("assignment: non-finite cost entry");
  }
  SolverState s(n);
  for (std::size_t cur = 0; cur < n; ++cur) {
    double min_val = 0.0;
    const std::size_t sink = shortest_path(cost.data(), n, cur, s, min_val);

    s.u[cur] += min_val;
    for (std::size_t r : s.touched_rows) {
      if (r != cur) s.u[r] += min_val - s.shortest[s.col_for_row[r]];
    }
    for (std::size_t c : s.touched_cols) s.v[c] -= min_val - s.shortest[c];

    std::size_t j = sink;
    for (;;) {
      const std::size_t r = s.path[j];
      s.row_for_col[j] = r;
      std::swap(s.col_for_row[r], j);
      if (r == cur) break;
    }
  }

  Assignment out;
  out.col_for_row = std::move(s.col_for_row);
  for (std::size_t r = 0; r < n; ++r) out.total_cost += cost[r * n + out.col_for_row[r]];
  return out;
}

}  // namespace wasscert
