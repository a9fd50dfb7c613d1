#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wasscert/measures.hpp"
#include "wasscert/network.hpp"
#include "wasscert/rng.hpp"

namespace wasscert {

enum class TargetKind { AbsOffset, Sinusoid, RadialNorm, PiecewiseLinear };

std::string to_string(TargetKind kind);
TargetKind target_kind_from_string(const std::string& name);

/// Analytic target f with a known Lipschitz constant (Euclidean norm).
///
///   abs-offset        |x - center|
///   sinusoid          amplitude * sin(2 pi frequency . x)
///   radial-norm       |x|
///   piecewise-linear  linear interpolation of (knots, values) in x[0],
///                     constant outside the knot range
struct TargetFunction {
  TargetKind kind = TargetKind::AbsOffset;
  std::vector<double> center;
  double amplitude = 1.0;
  std::vector<double> frequency;
  std::vector<double> knots;
  std::vector<double> values;

  static TargetFunction abs_offset(std::vector<double> center);
  static TargetFunction sinusoid(double amplitude, std::vector<double> frequency);
  static TargetFunction radial_norm();
  static TargetFunction piecewise_linear(std::vector<double> knots, std::vector<double> values);

  double operator()(std::span<const double> x) const;
  double lipschitz() const;
  /// Throws ConfigError if parameters are inconsistent with input dimension dim.
  void validate(std::size_t dim) const;
  ScalarField field() const;

  friend bool operator==(const TargetFunction&, const TargetFunction&) = default;
};

enum class OptimizerMode { BestOfRestarts, SingleRunLocal };

std::string to_string(OptimizerMode mode);
OptimizerMode optimizer_mode_from_string(const std::string& name);

struct TrainSettings {
  std::size_t restarts = 5;
  std::size_t steps = 5000;
  double step_size = 1e-2;
  /// Step size at the last iteration as a fraction of step_size; the
  /// schedule is cosine. 1 keeps the step constant.
  double final_step_fraction = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Cap on every ||W_k||_2, enforced by projection after each step; 0 = off.
  double spectral_cap = 0.0;
  OptimizerMode mode = OptimizerMode::BestOfRestarts;

  void validate() const;

  friend bool operator==(const TrainSettings&, const TrainSettings&) = default;
};

struct LossTrace {
  /// losses[r][t]: loss of restart r at iteration t (t = steps is the last iterate)
  std::vector<std::vector<double>> losses;
  std::vector<double> restart_final;  ///< best loss reached by each restart; NaN if it diverged
  std::size_t best_restart = 0;
  double final_loss = 0.0;
};

struct TrainedModel {
  MlpParams params;
  LossTrace trace;
  PointCloud train_points;
  double order = 2.0;
  OptimizerMode mode = OptimizerMode::BestOfRestarts;
  std::size_t cap_binds = 0;  ///< projections applied by the spectral cap
  std::vector<std::string> warnings;

  const MlpSpec& spec() const { return params.spec(); }
  ScalarField field() const;
};

/// (1/N) sum_i |g(x_i) - f(x_i)|^p
double discrete_loss(const ScalarField& g, const PointCloud& cloud, const TargetFunction& f, double p);
double discrete_loss(const MlpParams& params, const PointCloud& cloud, const TargetFunction& f, double p);

/// Full-batch Adam on the discrete loss.
///
/// best-of-restarts: `restarts` independent initialisations, each returning
/// its best iterate; the lowest loss wins. single-run-local: exactly one run.
/// Restarts that hit a non-finite loss are dropped with a warning; if all of
/// them do, TrainingFailed is thrown. Deterministic in (inputs, seed).
TrainedModel train(const MlpSpec& spec, const PointCloud& cloud, const TargetFunction& f, double p,
                   const TrainSettings& settings, const Seed& seed);

struct RiskEstimate {
  double power_mean = 0.0;  ///< mean of |g - f|^p over fresh samples
  double standard_error = 0.0;
  double norm = 0.0;  ///< power_mean^(1/p), the L^p distance
};

/// Monte-Carlo estimate of ||g - f||_p^p under dist with M >= 100 fresh samples.
RiskEstimate population_risk_estimate(const ScalarField& g, const TargetFunction& f,
                                      const SamplingDistribution& dist, std::size_t samples, double p,
                                      const Seed& seed);

/// population risk (p-th power) minus the empirical loss on cloud; signed.
double mc_integration_error(const ScalarField& g, const TargetFunction& f, const PointCloud& cloud,
                            const SamplingDistribution& dist, std::size_t samples, double p, const Seed& seed);

/// min over constants c of (1/N) sum |c - f(x_i)|^p.
double best_constant_loss(const PointCloud& cloud, const TargetFunction& f, double p);

}  // namespace wasscert
