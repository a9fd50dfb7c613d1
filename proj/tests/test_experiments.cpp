#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wasscert/errors.hpp"
#include "wasscert/experiments.hpp"

using namespace wasscert;

namespace {

SweepSettings small_sweep() {
  SweepSettings s;
  s.dist = SamplingDistribution::uniform_cube(1);
  s.target = TargetFunction::abs_offset({0.5});
  s.hidden = {8};
  s.training.restarts = 2;
  s.training.steps = 600;
  s.reps = 3;
  s.risk_samples = 2000;
  return s;
}

}  // namespace

TEST_CASE("log-log fit recovers an exact power law") {
  const std::vector<double> x{10, 20, 40, 80}, y{2.0 * std::pow(10, -0.7), 2.0 * std::pow(20, -0.7),
                                                 2.0 * std::pow(40, -0.7), 2.0 * std::pow(80, -0.7)};
  const auto fit = fit_log_log(x, y, {});
  CHECK(fit.slope == doctest::Approx(-0.7).epsilon(1e-12));
  CHECK(std::exp(fit.intercept) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("rate fit preconditions") {
  const auto dist = SamplingDistribution::uniform_cube(1);
  CHECK_THROWS_AS(rate_fit(dist, 1.0, {8, 16, 32}, 20, Seed{1, 0}), ConfigError);
  CHECK_THROWS_AS(rate_fit(dist, 1.0, {8, 16, 32, 63}, 20, Seed{1, 0}), ConfigError);
  CHECK_THROWS_AS(rate_fit(dist, 1.0, {8, 16, 32, 64}, 19, Seed{1, 0}), ConfigError);
}

TEST_CASE("identical paired samples give zero means and no fit") {
  const auto r = rate_fit(SamplingDistribution::uniform_cube(2), 1.0, {4, 8, 16, 32}, 20, Seed{2, 0}, true);
  for (const auto& m : r.means) CHECK(m.mean == 0.0);
  CHECK_FALSE(r.fitted);
}

TEST_CASE("rate fit is deterministic and homogeneous in the cube side") {
  const std::vector<std::size_t> ns{8, 16, 32, 64};
  const auto a = rate_fit(SamplingDistribution::uniform_cube(2), 1.0, ns, 20, Seed{3, 0});
  const auto b = rate_fit(SamplingDistribution::uniform_cube(2), 1.0, ns, 20, Seed{3, 0});
  const auto c = rate_fit(SamplingDistribution::uniform_cube(2, 4.0), 1.0, ns, 20, Seed{3, 0});
  CHECK(a.fitted);
  CHECK(a.slope == b.slope);
  CHECK(a.stated_exponent == -0.5);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    CHECK(a.means[i].mean > 0.0);
    CHECK(c.means[i].mean == doctest::Approx(4.0 * a.means[i].mean).epsilon(1e-12));
  }
  CHECK(a.slope < 0.0);
}

TEST_CASE("rate fit slope is stable when the repetitions double") {
  const std::vector<std::size_t> ns{16, 32, 64, 128};
  const auto dist = SamplingDistribution::uniform_cube(1);
  const auto a = rate_fit(dist, 1.0, ns, 40, Seed{4, 0});
  const auto b = rate_fit(dist, 1.0, ns, 80, Seed{4, 1});
  CHECK(std::abs(a.slope - b.slope) <= 2 * std::hypot(a.slope_se, b.slope_se));
}

TEST_CASE("representable target: sample sweep stays at zero loss") {
  auto s = small_sweep();
  s.target = TargetFunction::piecewise_linear({0.0, 1.0}, {0.2, 0.9});
  s.hidden = {4};
  s.training.steps = 2000;
  const auto sweep = converge_n(s, {8, 16, 32}, 64, Seed{5, 0});
  REQUIRE(sweep.floor_loss);
  CHECK(*sweep.floor_loss <= 1e-6);
  for (const auto& m : sweep.loss) CHECK(m.mean <= 1e-6);
  CHECK(sweep.axis == "N");
}

TEST_CASE("sample sweep losses stay below the best constant and are reproducible") {
  auto s = small_sweep();
  s.target = TargetFunction::sinusoid(1.0 / (2 * M_PI), {1.0});
  const auto a = converge_n(s, {16, 32, 64}, 128, Seed{6, 0});
  const auto b = converge_n(s, {16, 32, 64}, 128, Seed{6, 0});
  CHECK(a.cells.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(a.cells[i].size() == 3);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(a.cells[i][r].loss == b.cells[i][r].loss);
      CHECK(a.cells[i][r].seed == b.cells[i][r].seed);
      CHECK(a.cells[i][r].valid);
      CHECK(a.cells[i][r].loss >= 0.0);
    }
    const auto cloud = sample_points(s.dist, 4096, Seed{6, 9});
    CHECK(a.loss[i].mean <= best_constant_loss(cloud, s.target, 2.0) * 1.1);
  }
  CHECK_THROWS_AS(converge_n(s, {16, 32, 64}, 64, Seed{6, 0}), ConfigError);
  CHECK_THROWS_AS(converge_n(s, {32, 16, 64}, 128, Seed{6, 0}), ConfigError);
}

TEST_CASE("width sweep in the interpolation regime") {
  auto s = small_sweep();
  s.target = TargetFunction::sinusoid(0.2, {1.0});
  s.training.restarts = 5;
  s.training.steps = 20'000;
  s.training.final_step_fraction = 1.0;
  s.reps = 2;
  const auto sweep = converge_width(s, {32}, WidthSchedule::Fixed, 8, Seed{7, 0});
  CHECK(sweep.axis == "width");
  CHECK(sweep.loss[0].mean <= 1e-6);
}

TEST_CASE("a relu net with one kink per gap interpolates any 1-D data") {
  const auto cloud = sample_points(SamplingDistribution::uniform_cube(1), 12, Seed{7, 1});
  const auto f = TargetFunction::sinusoid(0.2, {1.0});
  std::vector<double> xs = cloud.coords();
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size(), w = n - 1;
  // u(x) = f(x_0) + sum_k (s_k - s_{k-1}) relu(x - x_k), s_{-1} = 0
  std::vector<double> values;
  for (std::size_t k = 0; k < w; ++k) values.push_back(1.0);
  for (std::size_t k = 0; k < w; ++k) values.push_back(-xs[k]);
  double prev = 0.0;
  for (std::size_t k = 0; k < w; ++k) {
    const double slope = (f(std::span<const double>(&xs[k + 1], 1)) - f(std::span<const double>(&xs[k], 1))) /
                         (xs[k + 1] - xs[k]);
    values.push_back(slope - prev);
    prev = slope;
  }
  values.push_back(f(std::span<const double>(&xs[0], 1)));
  const MlpParams params(MlpSpec{{1, w, 1}}, values);
  CHECK(discrete_loss(params, cloud, f, 2.0) <= 1e-20);
}

TEST_CASE("width sweep with the square schedule reports risk") {
  auto s = small_sweep();
  s.reps = 2;
  const auto sweep = converge_width(s, {2, 4}, WidthSchedule::Square, 0, Seed{8, 0});
  for (const auto& row : sweep.cells) {
    for (const auto& c : row) CHECK(std::isfinite(c.risk));
  }
  CHECK(sweep.grid == std::vector<double>{2, 4});
  CHECK(std::isfinite(sweep.risk_decreasing_fraction));
}

TEST_CASE("local minimiser study records sound per-cell certificates") {
  auto s = small_sweep();
  s.training.mode = OptimizerMode::SingleRunLocal;
  const auto sweep = local_minimiser_study(s, {16, 32}, Seed{9, 0});
  CHECK(std::isfinite(sweep.max_loss));
  for (std::size_t i = 0; i < sweep.cells.size(); ++i) {
    double lhs = 0.0, term = 0.0;
    for (const auto& c : sweep.cells[i]) {
      CHECK(c.loss <= c.zero_loss);
      CHECK(std::isfinite(c.bound));
      lhs += c.certified_risk;
      CHECK(std::isfinite(c.risk));
      term += c.lipschitz * c.wp;
    }
    const double reps = static_cast<double>(sweep.cells[i].size());
    double root_loss = 0.0;
    for (const auto& c : sweep.cells[i]) root_loss += std::sqrt(c.loss);
    CHECK(lhs / reps <= (root_loss + term) / reps + 1e-9);
  }
  auto wrong = s;
  wrong.training.mode = OptimizerMode::BestOfRestarts;
  CHECK_THROWS_AS(local_minimiser_study(wrong, {16, 32}, Seed{9, 0}), ConfigError);
}
