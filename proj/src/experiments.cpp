#include "wasscert/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "wasscert/errors.hpp"
#include "wasscert/parallel.hpp"
#include "wasscert/transport.hpp"

namespace wasscert {

namespace {

void check_increasing(const std::vector<std::size_t>& grid, const char* name) {
  if (grid.empty()) throw ConfigError(std::string(name) + ": grid must not be empty");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (grid[i + 1] <= grid[i]) throw ConfigError(std::string(name) + ": grid must be strictly increasing");
  }
  if (grid.front() == 0) throw ConfigError(std::string(name) + ": grid values must be >= 1");
}

MlpSpec make_spec(std::size_t input, const std::vector<std::size_t>& hidden, Activation activation) {
  MlpSpec spec;
  spec.dims.push_back(input);
  spec.dims.insert(spec.dims.end(), hidden.begin(), hidden.end());
  spec.dims.push_back(1);
  spec.activation = activation;
  spec.validate();
  return spec;
}

std::vector<double> as_grid(const std::vector<std::size_t>& values) { return {values.begin(), values.end()}; }

// Runs every (cell, rep) job in parallel; cell seeds depend only on indices.
template <typename Job>
std::vector<std::vector<CellRecord>> run_cells(const std::vector<double>& grid, std::size_t reps, const Seed& seed,
                                               Job&& job) {
  std::vector<std::vector<CellRecord>> cells(grid.size(), std::vector<CellRecord>(reps));
  parallel_jobs(grid.size() * reps, [&](std::size_t index) {
    const std::size_t c = index / reps, r = index % reps;
    CellRecord& rec = cells[c][r];
    rec.axis_value = grid[c];
    rec.rep = r;
    const Seed cell_seed = derive(derive(seed, c), r);
    rec.seed = cell_seed.stream;
    try {
      job(c, r, cell_seed, rec);
    } catch (const NumericalError& e) {
      rec.valid = false;
      rec.error = e.what();
    }
  });
  return cells;
}

void summarise(ConvergenceSweep& sweep) {
  sweep.loss.clear();
  sweep.risk.clear();
  sweep.bound.clear();
  sweep.max_loss = 0.0;
  for (const auto& row : sweep.cells) {
    std::vector<double> loss, risk, bound;
    for (const auto& rec : row) {
      if (!rec.valid) continue;
      loss.push_back(rec.loss);
      sweep.max_loss = std::max(sweep.max_loss, rec.loss);
      if (!std::isnan(rec.risk)) risk.push_back(rec.risk);
      if (!std::isnan(rec.bound)) bound.push_back(rec.bound);
    }
    sweep.loss.push_back(mean_with_error(loss));
    sweep.risk.push_back(mean_with_error(risk));
    sweep.bound.push_back(mean_with_error(bound));
  }
  if (sweep.cells.empty() || sweep.cells.front().empty()) return;
  const std::size_t reps = sweep.cells.front().size();
  std::size_t decreasing = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    bool ok = true;
    for (std::size_t c = 0; c + 1 < sweep.cells.size(); ++c) {
      const auto& a = sweep.cells[c][r];
      const auto& b = sweep.cells[c + 1][r];
      if (!a.valid || !b.valid || !(b.risk < a.risk)) ok = false;
    }
    if (ok) ++decreasing;
  }
  sweep.risk_decreasing_fraction = static_cast<double>(decreasing) / static_cast<double>(reps);
}

// Training-set matching distance against a fresh reference sample of equal size.
double matching_distance(const SamplingDistribution& dist, const PointCloud& cloud, double p, const Seed& seed) {
  const EmpiricalMeasure reference(sample_points(dist, cloud.size(), seed));
  return wasserstein(reference, EmpiricalMeasure(cloud), p).distance;
}

}  // namespace

LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& y_se) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("fit_log_log: need >= 2 matching points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw NumericalError("fit_log_log: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("fit_log_log: x values must not all coincide");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (y_se.size() == n) {
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = (lx[i] - mx) / sxx;
      const double rel = y_se[i] / y[i];  // se of log(y) by the delta method
      var += w * w * rel * rel;
    }
    fit.slope_se = std::sqrt(var);
  }
  return fit;
}

RateFitResult rate_fit(const SamplingDistribution& dist, double p, const std::vector<std::size_t>& ns,
                       std::size_t reps, const Seed& seed, bool identical_pairs) {
  dist.validate();
  if (ns.size() < 4) throw ConfigError("grid: rate_fit needs at least 4 distinct N values");
  check_increasing(ns, "grid");
  for (std::size_t n : ns) {
    if (n % 2 != 0) throw ConfigError("grid: rate_fit needs every N even");
  }
  if (reps < 20) throw ConfigError("reps: rate_fit needs reps >= 20");

  RateFitResult out;
  out.ns = as_grid(ns);
  out.stated_exponent = -p / static_cast<double>(dist.dim);
  out.cells = run_cells(out.ns, reps, seed, [&](std::size_t c, std::size_t, const Seed& s, CellRecord& rec) {
    const EmpiricalMeasure a(sample_points(dist, ns[c], derive(s, 0)));
    const EmpiricalMeasure b(identical_pairs ? a : EmpiricalMeasure(sample_points(dist, ns[c], derive(s, 1))));
    rec.wp = wasserstein(a, b, p).distance;
  });

  std::vector<double> mean, se;
  for (const auto& row : out.cells) {
    std::vector<double> values;
    for (const auto& rec : row) {
      if (rec.valid) values.push_back(rec.wp);
    }
    out.means.push_back(mean_with_error(values));
    mean.push_back(out.means.back().mean);
    se.push_back(out.means.back().standard_error);
  }
  if (std::any_of(mean.begin(), mean.end(), [](double m) { return !(m > 0.0); })) return out;

  const auto fit = fit_log_log(out.ns, mean, se);
  out.fitted = true;
  out.slope = fit.slope;
  out.slope_se = fit.slope_se;
  out.intercept = fit.intercept;
  out.prefactor = std::exp(fit.intercept);
  return out;
}

ConvergenceSweep converge_n(const SweepSettings& settings, const std::vector<std::size_t>& ns, std::size_t floor_n,
                            const Seed& seed) {
  check_increasing(ns, "grid");
  if (floor_n <= ns.back()) throw ConfigError("floor_n: must exceed the largest grid value");
  settings.training.validate();
  const auto spec = make_spec(settings.dist.dim, settings.hidden, settings.activation);

  ConvergenceSweep sweep;
  sweep.axis = "N";
  sweep.grid = as_grid(ns);
  sweep.cells = run_cells(sweep.grid, settings.reps, seed, [&](std::size_t c, std::size_t, const Seed& s, CellRecord& rec) {
    const auto cloud = sample_points(settings.dist, ns[c], derive(s, 0));
    const auto model = train(spec, cloud, settings.target, settings.p, settings.training, derive(s, 1));
    rec.loss = model.trace.final_loss;
    const auto risk = population_risk_estimate(model.field(), settings.target, settings.dist, settings.risk_samples,
                                               settings.p, derive(s, 2));
    rec.risk = risk.power_mean;
    rec.risk_se = risk.standard_error;
    rec.wp = matching_distance(settings.dist, cloud, settings.p, derive(s, 3));
  });

  TrainSettings budget = settings.training;
  budget.mode = OptimizerMode::BestOfRestarts;
  budget.restarts = 2 * settings.training.restarts;
  const Seed floor_seed = derive(seed, ns.size() + 1);
  const auto floor_cloud = sample_points(settings.dist, floor_n, derive(floor_seed, 0));
  const auto floor_model = train(spec, floor_cloud, settings.target, settings.p, budget, derive(floor_seed, 1));
  sweep.floor_loss = floor_model.trace.final_loss;
  sweep.floor_risk = population_risk_estimate(floor_model.field(), settings.target, settings.dist,
                                              settings.risk_samples, settings.p, derive(floor_seed, 2))
                         .power_mean;
  sweep.floor_provenance = "best-of-restarts run with N=" + std::to_string(floor_n) +
                           ", restarts=" + std::to_string(budget.restarts) + ", steps=" + std::to_string(budget.steps);
  summarise(sweep);
  return sweep;
}

ConvergenceSweep converge_width(const SweepSettings& settings, const std::vector<std::size_t>& widths,
                                WidthSchedule schedule, std::size_t n, const Seed& seed) {
  check_increasing(widths, "grid");
  settings.training.validate();
  if (schedule == WidthSchedule::Fixed && n == 0) throw ConfigError("n: must be >= 1 for a fixed sample count");

  ConvergenceSweep sweep;
  sweep.axis = "width";
  sweep.grid = as_grid(widths);
  sweep.cells = run_cells(sweep.grid, settings.reps, seed, [&](std::size_t c, std::size_t r, const Seed& s, CellRecord& rec) {
    const std::size_t w = widths[c];
    const std::size_t count = schedule == WidthSchedule::Fixed ? n : w * w;
    // same stream per repetition: clouds are nested prefixes across widths
    const auto cloud = sample_points(settings.dist, count, derive(derive(seed, 1'000'003), r));
    const auto spec = make_spec(settings.dist.dim, {w}, settings.activation);
    const auto model = train(spec, cloud, settings.target, settings.p, settings.training, derive(s, 1));
    rec.loss = model.trace.final_loss;
    const auto risk = population_risk_estimate(model.field(), settings.target, settings.dist, settings.risk_samples,
                                               settings.p, derive(s, 2));
    rec.risk = risk.power_mean;
    rec.risk_se = risk.standard_error;
    rec.wp = matching_distance(settings.dist, cloud, settings.p, derive(s, 3));
  });
  summarise(sweep);
  return sweep;
}

ConvergenceSweep local_minimiser_study(const SweepSettings& settings, const std::vector<std::size_t>& ns,
                                       const Seed& seed) {
  check_increasing(ns, "grid");
  if (settings.training.mode != OptimizerMode::SingleRunLocal) {
    throw ConfigError("training.mode: local study requires single-run-local");
  }
  settings.training.validate();
  const auto spec = make_spec(settings.dist.dim, settings.hidden, settings.activation);

  ConvergenceSweep sweep;
  sweep.axis = "N";
  sweep.grid = as_grid(ns);
  sweep.cells = run_cells(sweep.grid, settings.reps, seed, [&](std::size_t c, std::size_t, const Seed& s, CellRecord& rec) {
    const auto cloud = sample_points(settings.dist, ns[c], derive(s, 0));
    const auto model = train(spec, cloud, settings.target, settings.p, settings.training, derive(s, 1));
    rec.loss = model.trace.final_loss;
    rec.zero_loss = discrete_loss([](std::span<const double>) { return 0.0; }, cloud, settings.target, settings.p);
    const auto risk = population_risk_estimate(model.field(), settings.target, settings.dist, settings.risk_samples,
                                               settings.p, derive(s, 2));
    rec.risk = risk.power_mean;
    rec.risk_se = risk.standard_error;
    const auto cert = certify(model, settings.target, settings.dist, ns[c], settings.p, derive(s, 3));
    rec.wp = cert.matching_term;
    rec.lipschitz = cert.lipschitz;
    rec.bound = cert.bound;
    rec.certified_risk = cert.measured_risk;
  });
  summarise(sweep);
  return sweep;
}

}  // namespace wasscert
