#include "wasscert/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wasscert/assignment.hpp"
#include "wasscert/errors.hpp"
#include "wasscert/parallel.hpp"

namespace wasscert {

namespace {

void check_order(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError("p: must satisfy p >= 1");
}

void check_dims(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() != nu.dim()) {
    throw ConfigError("transport: dimension mismatch (" + std::to_string(mu.dim()) + " vs " +
                      std::to_string(nu.dim()) + ")");
  }
}

inline double ground_cost(std::span<const double> x, std::span<const double> y, double p) {
  double sq = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    sq += d * d;
  }
  if (p == 2.0) return sq;
  const double dist = std::sqrt(sq);
  return p == 1.0 ? dist : std::pow(dist, p);
}

inline double root(double cost, double p) {
  if (p == 1.0) return cost;
  if (p == 2.0) return std::sqrt(cost);
  return std::pow(cost, 1.0 / p);
}

double median(std::vector<double> values) {
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

double log_sum_exp(const double* terms, std::size_t n) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) hi = std::max(hi, terms[k]);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(terms[k] - hi);
  return hi + std::log(s);
}

}  // namespace

std::string to_string(TransportMethod method) {
  switch (method) {
    case TransportMethod::ExactAssignment:
      return "exact-assignment";
    case TransportMethod::Exact1d:
      return "exact-1d";
    case TransportMethod::Dirac:
      return "dirac";
    case TransportMethod::Sinkhorn:
      return "sinkhorn";
  }
  return "unknown";
}

std::vector<double> cost_matrix(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  check_dims(mu, nu);
  const std::size_t n = mu.size();
  const std::size_t m = nu.size();
  std::vector<double> cost(n * m);
  const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static) num_threads(worker_count()) if (n * m > 16384)
  for (long i = 0; i < rows; ++i) {
    const auto x = mu.atom(static_cast<std::size_t>(i));
    double* out = cost.data() + static_cast<std::size_t>(i) * m;
    for (std::size_t j = 0; j < m; ++j) out[j] = ground_cost(x, nu.atom(j), p);
  }
  return cost;
}

std::vector<double> cost_matrix_serial(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  check_dims(mu, nu);
  std::vector<double> cost;
  cost.reserve(mu.size() * nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) cost.push_back(ground_cost(mu.atom(i), nu.atom(j), p));
  }
  return cost;
}

WassersteinResult wasserstein_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  check_order(p);
  check_dims(mu, nu);
  if (mu.size() != nu.size()) {
    throw UnsupportedMarginals("wasserstein_exact: atom counts differ (" + std::to_string(mu.size()) + " vs " +
                               std::to_string(nu.size()) + "); use sinkhorn for unequal marginals");
  }
  const std::size_t n = mu.size();
  const auto cost = cost_matrix(mu, nu, p);
  auto solved = solve_assignment(cost, n);

  TransportPlan plan;
  plan.order = p;
  plan.cost = solved.total_cost / static_cast<double>(n);
  plan.pairing = std::move(solved.col_for_row);

  WassersteinResult out;
  out.distance = root(plan.cost, p);
  out.method = TransportMethod::ExactAssignment;
  out.plan = std::move(plan);
  return out;
}

WassersteinResult wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  check_order(p);
  if (mu.dim() != 1 || nu.dim() != 1) throw ConfigError("wasserstein_1d: both measures must be 1-dimensional");
  if (mu.size() != nu.size()) {
    throw UnsupportedMarginals("wasserstein_1d: atom counts differ; use sinkhorn for unequal marginals");
  }
  const std::size_t n = mu.size();
  const auto& xs = mu.cloud().coords();
  const auto& ys = nu.cloud().coords();
  std::vector<std::size_t> xi(n), yi(n);
  std::iota(xi.begin(), xi.end(), 0);
  std::iota(yi.begin(), yi.end(), 0);
  std::stable_sort(xi.begin(), xi.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::stable_sort(yi.begin(), yi.end(), [&](std::size_t a, std::size_t b) { return ys[a] < ys[b]; });

  TransportPlan plan;
  plan.order = p;
  plan.pairing.resize(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    plan.pairing[xi[k]] = yi[k];
    total += ground_cost(mu.atom(xi[k]), nu.atom(yi[k]), p);
  }
  plan.cost = total / static_cast<double>(n);

  WassersteinResult out;
  out.distance = root(plan.cost, p);
  out.method = TransportMethod::Exact1d;
  out.plan = std::move(plan);
  return out;
}

WassersteinResult wasserstein_to_dirac(const EmpiricalMeasure& mu, double p) {
  check_order(p);
  WassersteinResult out;
  out.distance = root(mu.abs_moment(p), p);
  out.method = TransportMethod::Dirac;
  return out;
}

WassersteinResult sinkhorn(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p,
                           const SinkhornOptions& options) {
  check_order(p);
  check_dims(mu, nu);
  if (!(options.tol > 0.0)) throw ConfigError("sinkhorn: tol must be > 0");
  if (options.epsilon < 0.0 || !std::isfinite(options.epsilon)) throw ConfigError("sinkhorn: epsilon must be > 0");

  const std::size_t n = mu.size();
  const std::size_t m = nu.size();
  const auto cost = cost_matrix(mu, nu, p);
  const double cost_max = *std::max_element(cost.begin(), cost.end());

  WassersteinResult out;
  out.method = TransportMethod::Sinkhorn;
  if (cost_max == 0.0) {
    // every atom coincides; the product plan is optimal at zero cost
    return out;
  }

  double target = options.epsilon;
  if (target == 0.0) {
    target = 0.01 * median(cost);
    if (target == 0.0) target = 1e-3 * cost_max;
  }

  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));
  const double a = 1.0 / static_cast<double>(n);
  std::vector<double> f(n, 0.0), g(m, 0.0), scratch(std::max(n, m));

  double eps = std::max(target, cost_max);
  double residual = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool final_stage_reached = false;

  auto row_residual = [&](double e) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += std::exp((f[i] + g[j] - cost[i * m + j]) / e);
      worst = std::max(worst, std::abs(s - a));
    }
    return worst;
  };

  for (;;) {
    const bool final_stage = eps == target;
    // intermediate stages only need a rough fit before epsilon shrinks
    const double stage_tol = final_stage ? options.tol : std::max(options.tol, 1e-3 * a);
    for (;;) {
      if (iterations == options.max_iterations) {
        if (options.allow_unconverged && std::isfinite(residual)) {
          final_stage_reached = true;
          break;
        }
        throw Diverged("sinkhorn: no convergence within " + std::to_string(options.max_iterations) +
                           " iterations (residual " + std::to_string(residual) + ")",
                       residual);
      }
      ++iterations;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) scratch[j] = (g[j] - cost[i * m + j]) / eps;
        f[i] = eps * (log_a - log_sum_exp(scratch.data(), m));
      }
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) scratch[i] = (f[i] - cost[i * m + j]) / eps;
        g[j] = eps * (log_b - log_sum_exp(scratch.data(), n));
      }
      residual = row_residual(eps);
      if (!std::isfinite(residual)) throw Diverged("sinkhorn: non-finite marginals", residual);
      if (residual <= stage_tol) break;
    }
    if (final_stage || final_stage_reached) break;
    eps = std::max(target, 0.5 * eps);
  }

  // Round the scaled plan onto the coupling polytope: shrink overfull rows,
  // then overfull columns, then spread the missing mass as a rank-one term.
  const double b = 1.0 / static_cast<double>(m);
  std::vector<double> plan(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      plan[i * m + j] = std::exp((f[i] + g[j] - cost[i * m + j]) / eps);
      row += plan[i * m + j];
    }
    if (row > a) {
      for (std::size_t j = 0; j < m; ++j) plan[i * m + j] *= a / row;
    }
  }
  std::vector<double> col(m, 0.0), row_gap(n, 0.0), col_gap(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) col[j] += plan[i * m + j];
  for (std::size_t j = 0; j < m; ++j) {
    if (col[j] > b) {
      for (std::size_t i = 0; i < n; ++i) plan[i * m + j] *= b / col[j];
    }
  }
  std::fill(col.begin(), col.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      row += plan[i * m + j];
      col[j] += plan[i * m + j];
    }
    row_gap[i] = std::max(0.0, a - row);
  }
  double gap_mass = 0.0;
  for (std::size_t j = 0; j < m; ++j) col_gap[j] = std::max(0.0, b - col[j]);
  for (double v : row_gap) gap_mass += v;

  double transported = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double mass = plan[i * m + j];
      if (gap_mass > 0.0) mass += row_gap[i] * col_gap[j] / gap_mass;
      transported += mass * cost[i * m + j];
    }
  }
  out.distance = root(transported, p);
  out.residual = residual;
  return out;
}

WassersteinResult brute_force_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  check_order(p);
  check_dims(mu, nu);
  if (mu.size() != nu.size()) throw UnsupportedMarginals("brute_force_wasserstein: atom counts differ");
  const std::size_t n = mu.size();
  if (n > 8) throw ConfigError("brute_force_wasserstein: n <= 8 required (n! enumeration)");
  const auto cost = cost_matrix_serial(mu, nu, p);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i * n + perm[i]];
    if (total < best_cost) {
      best_cost = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  TransportPlan plan;
  plan.order = p;
  plan.pairing = std::move(best);
  plan.cost = best_cost / static_cast<double>(n);

  WassersteinResult out;
  out.distance = root(plan.cost, p);
  out.method = TransportMethod::ExactAssignment;
  out.plan = std::move(plan);
  return out;
}

WassersteinResult wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  if (mu.size() != nu.size()) return sinkhorn(mu, nu, p);
  if (mu.dim() == 1 && nu.dim() == 1) return wasserstein_1d(mu, nu, p);
  return wasserstein_exact(mu, nu, p);
}

}  // namespace wasscert
