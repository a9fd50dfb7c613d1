#include "wasscert/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "wasscert/errors.hpp"
#include "wasscert/parallel.hpp"

namespace wasscert {

namespace {

double residual_power(double r, double p) {
  const double a = std::abs(r);
  if (p == 1.0) return a;
  if (p == 2.0) return r * r;
  return std::pow(a, p);
}

void check_order(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError("p: must satisfy p >= 1");
}

struct RunResult {
  std::vector<double> losses;
  std::optional<MlpParams> best;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t cap_binds = 0;
  bool diverged = false;
};

RunResult run_adam(const MlpSpec& spec, const PointCloud& cloud, std::span<const double> targets, double p,
                   const TrainSettings& s, const Seed& seed) {
  RunResult out;
  MlpParams params = init_params(spec, seed);
  const std::size_t np = params.values().size();
  std::vector<double> grad(np), m(np, 0.0), v(np, 0.0);
  out.losses.reserve(s.steps + 1);

  double beta1_t = 1.0, beta2_t = 1.0;
  for (std::size_t t = 0;; ++t) {
    const double loss = loss_and_gradient(params, cloud, targets, p, grad);
    out.losses.push_back(loss);
    if (!std::isfinite(loss)) {
      out.diverged = true;
      return out;
    }
    if (loss < out.best_loss) {
      out.best_loss = loss;
      out.best = params;
    }
    if (t == s.steps) break;

    const double progress = s.steps > 1 ? static_cast<double>(t) / static_cast<double>(s.steps - 1) : 1.0;
    const double lr = s.step_size * (s.final_step_fraction +
                                     (1.0 - s.final_step_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    beta1_t *= s.beta1;
    beta2_t *= s.beta2;
    auto theta = params.values();
    for (std::size_t j = 0; j < np; ++j) {
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * grad[j];
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / (1.0 - beta1_t);
      const double v_hat = v[j] / (1.0 - beta2_t);
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + s.adam_epsilon);
    }
    if (s.spectral_cap > 0.0) out.cap_binds += project_spectral(params, s.spectral_cap);
  }
  return out;
}

}  // namespace

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::AbsOffset:
      return "abs-offset";
    case TargetKind::Sinusoid:
      return "sinusoid";
    case TargetKind::RadialNorm:
      return "radial-norm";
    case TargetKind::PiecewiseLinear:
      return "piecewise-linear";
  }
  return "unknown";
}

TargetKind target_kind_from_string(const std::string& name) {
  if (name == "abs-offset") return TargetKind::AbsOffset;
  if (name == "sinusoid") return TargetKind::Sinusoid;
  if (name == "radial-norm") return TargetKind::RadialNorm;
  if (name == "piecewise-linear") return TargetKind::PiecewiseLinear;
  throw ConfigError("target.kind: unknown kind '" + name +
                    "' (expected abs-offset, sinusoid, radial-norm or piecewise-linear)");
}

TargetFunction TargetFunction::abs_offset(std::vector<double> center) {
  TargetFunction f;
  f.kind = TargetKind::AbsOffset;
  f.center = std::move(center);
  return f;
}

TargetFunction TargetFunction::sinusoid(double amplitude, std::vector<double> frequency) {
  TargetFunction f;
  f.kind = TargetKind::Sinusoid;
  f.amplitude = amplitude;
  f.frequency = std::move(frequency);
  return f;
}

TargetFunction TargetFunction::radial_norm() {
  TargetFunction f;
  f.kind = TargetKind::RadialNorm;
  return f;
}

TargetFunction TargetFunction::piecewise_linear(std::vector<double> knots, std::vector<double> values) {
  TargetFunction f;
  f.kind = TargetKind::PiecewiseLinear;
  f.knots = std::move(knots);
  f.values = std::move(values);
  return f;
}

double TargetFunction::operator()(std::span<const double> x) const {
  switch (kind) {
    case TargetKind::AbsOffset: {
      double sq = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) sq += (x[k] - center[k]) * (x[k] - center[k]);
      return std::sqrt(sq);
    }
    case TargetKind::Sinusoid: {
      double phase = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) phase += frequency[k] * x[k];
      return amplitude * std::sin(2.0 * std::numbers::pi * phase);
    }
    case TargetKind::RadialNorm: {
      double sq = 0.0;
      for (double v : x) sq += v * v;
      return std::sqrt(sq);
    }
    case TargetKind::PiecewiseLinear: {
      const double t = x[0];
      if (t <= knots.front()) return values.front();
      if (t >= knots.back()) return values.back();
      const auto it = std::upper_bound(knots.begin(), knots.end(), t);
      const auto hi = static_cast<std::size_t>(it - knots.begin());
      const std::size_t lo = hi - 1;
      const double w = (t - knots[lo]) / (knots[hi] - knots[lo]);
      return values[lo] + w * (values[hi] - values[lo]);
    }
  }
  return 0.0;
}

double TargetFunction::lipschitz() const {
  switch (kind) {
    case TargetKind::AbsOffset:
    case TargetKind::RadialNorm:
      return 1.0;
    case TargetKind::Sinusoid: {
      double sq = 0.0;
      for (double w : frequency) sq += w * w;
      return 2.0 * std::numbers::pi * std::abs(amplitude) * std::sqrt(sq);
    }
    case TargetKind::PiecewiseLinear: {
      double slope = 0.0;
      for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        slope = std::max(slope, std::abs(values[k + 1] - values[k]) / (knots[k + 1] - knots[k]));
      }
      return slope;
    }
  }
  return 0.0;
}

void TargetFunction::validate(std::size_t dim) const {
  switch (kind) {
    case TargetKind::AbsOffset:
      if (center.size() != dim) throw ConfigError("target.center: length must equal distribution dim");
      break;
    case TargetKind::Sinusoid:
      if (frequency.size() != dim) throw ConfigError("target.frequency: length must equal distribution dim");
      if (!std::isfinite(amplitude)) throw ConfigError("target.amplitude: must be finite");
      break;
    case TargetKind::RadialNorm:
      break;
    case TargetKind::PiecewiseLinear:
      if (knots.size() < 2 || knots.size() != values.size()) {
        throw ConfigError("target.knots: need >= 2 knots and one value per knot");
      }
      for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        if (!(knots[k + 1] > knots[k])) throw ConfigError("target.knots: must be strictly increasing");
      }
      break;
  }
}

ScalarField TargetFunction::field() const {
  return [f = *this](std::span<const double> x) { return f(x); };
}

std::string to_string(OptimizerMode mode) {
  return mode == OptimizerMode::BestOfRestarts ? "best-of-restarts" : "single-run-local";
}

OptimizerMode optimizer_mode_from_string(const std::string& name) {
  if (name == "best-of-restarts") return OptimizerMode::BestOfRestarts;
  if (name == "single-run-local") return OptimizerMode::SingleRunLocal;
  throw ConfigError("training.mode: unknown mode '" + name + "' (expected best-of-restarts or single-run-local)");
}

void TrainSettings::validate() const {
  if (restarts < 1) throw ConfigError("training.restarts: must be >= 1");
  if (steps < 1) throw ConfigError("training.steps: must be >= 1");
  if (!(step_size > 0.0)) throw ConfigError("training.step_size: must be > 0");
  if (!(final_step_fraction > 0.0 && final_step_fraction <= 1.0)) {
    throw ConfigError("training.final_step_fraction: must be in (0, 1]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("training.beta1: must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("training.beta2: must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("training.adam_epsilon: must be > 0");
  if (!(spectral_cap >= 0.0)) throw ConfigError("training.spectral_cap: must be >= 0");
}

ScalarField TrainedModel::field() const {
  return [params = params](std::span<const double> x) { return mlp_forward(params, x); };
}

namespace {

/// Mean summed in sorted order, so relabelling the atoms cannot change a bit.
double order_free_mean(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum / static_cast<double>(terms.size());
}

}  // namespace

double discrete_loss(const ScalarField& g, const PointCloud& cloud, const TargetFunction& f, double p) {
  check_order(p);
  if (cloud.size() == 0) throw ConfigError("discrete_loss: empty point cloud");
  std::vector<double> terms(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) terms[i] = residual_power(g(cloud.point(i)) - f(cloud.point(i)), p);
  return order_free_mean(terms);
}

double discrete_loss(const MlpParams& params, const PointCloud& cloud, const TargetFunction& f, double p) {
  check_order(p);
  if (cloud.size() == 0) throw ConfigError("discrete_loss: empty point cloud");
  const auto outputs = mlp_evaluate(params, cloud);
  std::vector<double> terms(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) terms[i] = residual_power(outputs[i] - f(cloud.point(i)), p);
  return order_free_mean(terms);
}

TrainedModel train(const MlpSpec& spec, const PointCloud& cloud, const TargetFunction& f, double p,
                   const TrainSettings& settings, const Seed& seed) {
  check_order(p);
  spec.validate();
  settings.validate();
  if (cloud.size() == 0) throw ConfigError("train: empty point cloud");
  if (cloud.dim() != spec.input_dim()) throw ConfigError("train: network input width must equal point dimension");
  f.validate(cloud.dim());

  std::vector<double> targets(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) targets[i] = f(cloud.point(i));

  const std::size_t runs = settings.mode == OptimizerMode::SingleRunLocal ? 1 : settings.restarts;
  std::vector<RunResult> results(runs);
  parallel_jobs(runs, [&](std::size_t r) { results[r] = run_adam(spec, cloud, targets, p, settings, derive(seed, r)); });

  TrainedModel model;
  model.train_points = cloud;
  model.order = p;
  model.mode = settings.mode;
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < runs; ++r) {
    auto& run = results[r];
    model.cap_binds += run.cap_binds;
    if (run.diverged) {
      model.warnings.push_back("restart " + std::to_string(r) + " diverged (non-finite loss) and was discarded");
      model.trace.restart_final.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      model.trace.restart_final.push_back(run.best_loss);
      if (!best || run.best_loss < results[*best].best_loss) best = r;
    }
    model.trace.losses.push_back(std::move(run.losses));
  }
  if (!best) throw TrainingFailed("train: every restart diverged");
  model.trace.best_restart = *best;
  model.params = std::move(*results[*best].best);
  model.trace.final_loss = discrete_loss(model.params, cloud, f, p);
  return model;
}

RiskEstimate population_risk_estimate(const ScalarField& g, const TargetFunction& f,
                                      const SamplingDistribution& dist, std::size_t samples, double p,
                                      const Seed& seed) {
  check_order(p);
  if (samples < 100) throw ConfigError("population_risk_estimate: M must be >= 100");
  const auto cloud = sample_points(dist, samples, seed);
  std::vector<double> terms(samples);
  for (std::size_t i = 0; i < samples; ++i) terms[i] = residual_power(g(cloud.point(i)) - f(cloud.point(i)), p);

  double mean = 0.0;
  for (double t : terms) mean += t;
  mean /= static_cast<double>(samples);
  double ss = 0.0;
  for (double t : terms) ss += (t - mean) * (t - mean);
  const double variance = ss / static_cast<double>(samples - 1);

  RiskEstimate out;
  out.power_mean = mean;
  out.standard_error = std::sqrt(variance / static_cast<double>(samples));
  out.norm = std::pow(mean, 1.0 / p);
  return out;
}

double mc_integration_error(const ScalarField& g, const TargetFunction& f, const PointCloud& cloud,
                            const SamplingDistribution& dist, std::size_t samples, double p, const Seed& seed) {
  return population_risk_estimate(g, f, dist, samples, p, seed).power_mean - discrete_loss(g, cloud, f, p);
}

double best_constant_loss(const PointCloud& cloud, const TargetFunction& f, double p) {
  check_order(p);
  std::vector<double> ys(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) ys[i] = f(cloud.point(i));
  auto loss_at = [&](double c) {
    double s = 0.0;
    for (double y : ys) s += residual_power(c - y, p);
    return s / static_cast<double>(ys.size());
  };
  if (p == 2.0) {
    double mean = 0.0;
    for (double y : ys) mean += y;
    return loss_at(mean / static_cast<double>(ys.size()));
  }
  if (p == 1.0) {
    auto sorted = ys;
    std::sort(sorted.begin(), sorted.end());
    return loss_at(sorted[sorted.size() / 2]);
  }
  // convex in c: golden-section search over the range of targets
  double lo = *std::min_element(ys.begin(), ys.end());
  double hi = *std::max_element(ys.begin(), ys.end());
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
    const double a = hi - ratio * (hi - lo);
    const double b = lo + ratio * (hi - lo);
    if (loss_at(a) < loss_at(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  return loss_at(0.5 * (lo + hi));
}

}  // namespace wasscert
