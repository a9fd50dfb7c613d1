#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "wasscert/measures.hpp"

namespace wasscert {

enum class TransportMethod { ExactAssignment, Exact1d, Dirac, Sinkhorn };

std::string to_string(TransportMethod method);

/// Optimal bijection between two equal-size uniform measures.
struct TransportPlan {
  std::vector<std::size_t> pairing;  ///< source atom i goes to target atom pairing[i]
  double cost = 0.0;                 ///< (1/n) sum_i |x_i - y_pairing[i]|^p
  double order = 1.0;
};

struct WassersteinResult {
  double distance = 0.0;
  std::optional<TransportPlan> plan;
  TransportMethod method = TransportMethod::ExactAssignment;
  /// Max marginal violation for sinkhorn, 0 for exact methods.
  double residual = 0.0;
};

struct SinkhornOptions {
  /// Entropic regularisation; 0 selects 0.01 * median cost entry.
  double epsilon = 0.0;
  double tol = 1e-8;
  std::size_t max_iterations = 10'000;
  /// Return the last iterate (with its residual) instead of throwing Diverged.
  bool allow_unconverged = false;
};

/// Row-major |x_i - y_j|^p, Euclidean distance. Rows computed in parallel.
std::vector<double> cost_matrix(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p);

/// Single-threaded reference for cost_matrix; results are bit-identical.
std::vector<double> cost_matrix_serial(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p);

/// Exact W_p for equal-size uniform measures via linear assignment.
/// Throws UnsupportedMarginals on unequal sizes (use sinkhorn), ConfigError
/// on dimension mismatch or p < 1.
WassersteinResult wasserstein_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p);

/// Exact W_p in one dimension by pairing order statistics, O(n log n).
WassersteinResult wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p);

/// W_p(mu, delta_0) = ((1/n) sum |x_i|^p)^(1/p).
WassersteinResult wasserstein_to_dirac(const EmpiricalMeasure& mu, double p);

/// Log-domain entropic transport with epsilon annealing. Handles unequal
/// sizes. The final scaled plan is rounded onto the exact marginals, so
/// distance is the cost of a feasible coupling and never below W_p up to
/// rounding error. residual is the marginal violation before that rounding.
/// Throws Diverged (carrying the last residual) when the iteration cap is hit.
WassersteinResult sinkhorn(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p,
                           const SinkhornOptions& options = {});

/// Exhaustive search over all n! bijections; n <= 8 only. Testing oracle.
WassersteinResult brute_force_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p);

/// Exact solver when sizes match (sorted coupling in 1-D, assignment
/// otherwise), sinkhorn with default options when they do not.
WassersteinResult wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p);

}  // namespace wasscert
