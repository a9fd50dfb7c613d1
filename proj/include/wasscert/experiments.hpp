#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "wasscert/bounds.hpp"
#include "wasscert/measures.hpp"
#include "wasscert/network.hpp"
#include "wasscert/training.hpp"

namespace wasscert {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// One (grid value, repetition) job. Fields a driver does not measure stay NaN.
struct CellRecord {
  double axis_value = 0.0;
  std::size_t rep = 0;
  double loss = kMissing;
  double risk = kMissing;  ///< population risk, p-th power (same scale as loss)
  double risk_se = kMissing;
  double wp = kMissing;  ///< W_p(reference sample, training sample)
  std::uint64_t seed = 0;
  bool valid = true;
  std::string error;
  // local-minimiser bookkeeping
  double lipschitz = kMissing;
  double bound = kMissing;
  double certified_risk = kMissing;  ///< L^p risk on the certificate's reference sample
  double zero_loss = kMissing;
};

struct RateFitResult {
  std::vector<double> ns;
  std::vector<std::vector<CellRecord>> cells;  ///< cells[grid index][rep]
  std::vector<MeanWithError> means;            ///< E[W_p] estimate per N
  bool fitted = false;
  double slope = kMissing;
  double slope_se = kMissing;  ///< delta method from per-N standard errors
  double intercept = kMissing;
  double prefactor = kMissing;  ///< exp(intercept), the C(mu) estimate
  double stated_exponent = kMissing;  ///< -p/d, for side-by-side reporting
};

/// Estimates E[W_p(mu, mu_N)] on a grid of N by the matching distance between
/// two independent N-samples, then fits log mean against log N.
///
/// Needs >= 4 grid values, all even, and reps >= 20. With identical_pairs the
/// two samples coincide; every mean is then 0 and the fit is refused
/// (fitted = false).
RateFitResult rate_fit(const SamplingDistribution& dist, double p, const std::vector<std::size_t>& ns,
                       std::size_t reps, const Seed& seed, bool identical_pairs = false);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

/// Unweighted least squares of log(y) on log(x); y_se feeds the delta-method
/// slope error and may be empty.
LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& y_se);

struct SweepSettings {
  SamplingDistribution dist;
  TargetFunction target;
  Activation activation = Activation::Relu;
  std::vector<std::size_t> hidden;  ///< hidden widths for the fixed-architecture sweeps
  TrainSettings training;
  double p = 2.0;
  std::size_t reps = 5;
  std::size_t risk_samples = 20'000;
};

enum class WidthSchedule { Fixed, Square };

struct ConvergenceSweep {
  std::string axis;  ///< "N" or "width"
  std::vector<double> grid;
  std::vector<std::vector<CellRecord>> cells;  ///< cells[grid index][rep]
  std::vector<MeanWithError> loss;             ///< over valid cells
  std::vector<MeanWithError> risk;
  std::vector<MeanWithError> bound;  ///< local study only
  std::optional<double> floor_loss;  ///< high-budget training loss (converge_n)
  std::optional<double> floor_risk;  ///< population risk of the floor model, p-th power
  std::string floor_provenance;
  double max_loss = 0.0;                  ///< over every valid cell
  double risk_decreasing_fraction = kMissing;  ///< reps whose risk falls strictly along the grid
};

/// Fixed architecture, growing sample count. The floor is a run with twice
/// the restarts at floor_n > max(ns).
ConvergenceSweep converge_n(const SweepSettings& settings, const std::vector<std::size_t>& ns, std::size_t floor_n,
                            const Seed& seed);

/// One-hidden-layer nets [d, w, 1] over increasing widths, with either a fixed
/// sample count n or the schedule N(w) = w^2.
ConvergenceSweep converge_width(const SweepSettings& settings, const std::vector<std::size_t>& widths,
                                WidthSchedule schedule, std::size_t n, const Seed& seed);

/// Single-run (possibly non-global) training across N, with per-cell
/// certificates so risk can be compared against loss and bound.
ConvergenceSweep local_minimiser_study(const SweepSettings& settings, const std::vector<std::size_t>& ns,
                                       const Seed& seed);

}  // namespace wasscert
