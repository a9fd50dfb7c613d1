#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wasscert/errors.hpp"
#include "wasscert/network.hpp"

using namespace wasscert;

namespace {

MlpParams make(std::vector<std::size_t> dims, std::vector<double> values, Activation act = Activation::Relu) {
  return MlpParams(MlpSpec{std::move(dims), act}, std::move(values));
}

}  // namespace

TEST_CASE("parameter count of small architectures") {
  CHECK(param_count(MlpSpec{{2, 8, 1}}) == 33);
  CHECK(param_count(MlpSpec{{1, 1, 1}}) == 4);
  CHECK(param_count(MlpSpec{{5, 1}}) == 6);
  CHECK(param_count(MlpSpec{{3, 4, 5, 1}}) == 16 + 25 + 6);
}

TEST_CASE("invalid architectures are rejected") {
  CHECK_THROWS_AS(MlpSpec{{2}}.validate(), ConfigError);
  CHECK_THROWS_AS((MlpSpec{{2, 0, 1}}.validate()), ConfigError);
  CHECK_THROWS_AS((MlpSpec{{2, 3, 2}}.validate()), ConfigError);
}

TEST_CASE("zero parameters give the zero function") {
  const MlpParams params(MlpSpec{{3, 7, 5, 1}});
  Rng rng(Seed{1, 0});
  for (int i = 0; i < 10; ++i) {
    const auto x = oracle::random_cloud(rng, 1, 3, -5, 5);
    CHECK(mlp_forward(params, x.point(0)) == 0.0);
  }
}

TEST_CASE("one relu unit is the positive part") {
  const auto params = make({1, 1, 1}, {1.0, 0.0, 1.0, 0.0});
  for (double x : {-2.0, -0.1, 0.0, 0.3, 4.0}) {
    CHECK(mlp_forward(params, std::span<const double>(&x, 1)) == std::max(x, 0.0));
  }
  const auto t = make({1, 1, 1}, {1.0, 0.0, 1.0, 0.0}, Activation::Tanh);
  const double x = 0.7;
  CHECK(mlp_forward(t, std::span<const double>(&x, 1)) == doctest::Approx(std::tanh(0.7)));
}

TEST_CASE("output scales with the final weights when the final bias is zero") {
  Rng rng(Seed{2, 0});
  const MlpSpec spec{{2, 6, 4, 1}};
  auto params = init_params(spec, Seed{2, 1});
  const std::size_t last = spec.layer_count() - 1;
  params.bias(last)[0] = 0.0;
  auto scaled = params;
  for (auto& w : scaled.weight(last)) w *= 3.5;
  for (int i = 0; i < 10; ++i) {
    const auto x = oracle::random_cloud(rng, 1, 2);
    CHECK(mlp_forward(scaled, x.point(0)) == doctest::Approx(3.5 * mlp_forward(params, x.point(0))).epsilon(1e-12));
  }
}

TEST_CASE("backprop matches central finite differences") {
  Rng rng(Seed{3, 0});
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Activation act = trial % 2 ? Activation::Tanh : Activation::Relu;
    const MlpSpec spec{{2, 5, 3, 1}, act};
    const auto params = init_params(spec, Seed{3, static_cast<std::uint64_t>(trial)});
    const auto x = oracle::random_cloud(rng, 1, 2);
    std::vector<double> grad(param_count(spec));
    mlp_forward_gradient(params, x.point(0), grad);
    const double h = 1e-5;
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      auto plus = params, minus = params;
      plus.values()[k] += h;
      minus.values()[k] -= h;
      const double fd = (mlp_forward(plus, x.point(0)) - mlp_forward(minus, x.point(0))) / (2 * h);
      err = std::max(err, std::abs(fd - grad[k]));
      scale = std::max(scale, std::abs(grad[k]));
    }
    CHECK(err <= 1e-6 * std::max(scale, 1.0));
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("loss gradient matches finite differences and the serial reference") {
  Rng rng(Seed{4, 0});
  const MlpSpec spec{{2, 8, 1}, Activation::Tanh};
  const auto params = init_params(spec, Seed{4, 1});
  const auto cloud = oracle::random_cloud(rng, 300, 2);
  std::vector<double> y(cloud.size());
  for (auto& v : y) v = rng.uniform(-1, 1);
  for (double p : {1.0, 2.0, 3.0}) {
    std::vector<double> g(param_count(spec)), gs(g.size());
    const double loss = loss_and_gradient(params, cloud, y, p, g);
    const double loss_s = loss_and_gradient_serial(params, cloud, y, p, gs);
    CHECK(loss == doctest::Approx(loss_s).epsilon(1e-13));
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k] == doctest::Approx(gs[k]).epsilon(1e-11).scale(1.0));
    std::vector<double> again(g.size());
    CHECK(loss_and_gradient(params, cloud, y, p, again) == loss);
    CHECK(again == g);
    if (p == 1.0) continue;
    const double h = 1e-6;
    for (std::size_t k = 0; k < g.size(); k += 3) {
      auto plus = params, minus = params;
      plus.values()[k] += h;
      minus.values()[k] -= h;
      std::vector<double> scratch(g.size());
      const double fd = (loss_and_gradient_serial(plus, cloud, y, p, scratch) -
                         loss_and_gradient_serial(minus, cloud, y, p, scratch)) /
                        (2 * h);
      CHECK(fd == doctest::Approx(g[k]).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("parallel evaluation equals pointwise forward passes") {
  Rng rng(Seed{5, 0});
  const auto params = init_params(MlpSpec{{3, 16, 1}}, Seed{5, 1});
  const auto cloud = oracle::random_cloud(rng, 257, 3);
  const auto out = mlp_evaluate(params, cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(out[i] == mlp_forward(params, cloud.point(i)));
}

TEST_CASE("init is seeded and bounded") {
  const MlpSpec spec{{4, 10, 1}};
  const auto a = init_params(spec, Seed{6, 0});
  CHECK(a == init_params(spec, Seed{6, 0}));
  CHECK_FALSE(a == init_params(spec, Seed{6, 1}));
  const double lim0 = std::sqrt(6.0 / 14.0);
  for (double w : a.weight(0)) CHECK(std::abs(w) <= lim0);
  for (double b : a.bias(0)) CHECK(std::abs(b) <= lim0);
}

TEST_CASE("spectral norm against closed forms") {
  const std::vector<double> diag{3.0, 0.0, 0.0, -7.0};
  CHECK(spectral_norm(diag, 2, 2) == doctest::Approx(7.0).epsilon(1e-8));
  // rank one u v^T has norm |u| |v|
  const std::vector<double> u{1.0, 2.0, 2.0}, v{3.0, 4.0};
  std::vector<double> outer;
  for (double a : u)
    for (double b : v) outer.push_back(a * b);
  CHECK(spectral_norm(outer, 3, 2) == doctest::Approx(15.0).epsilon(1e-8));
  Rng rng(Seed{7, 0});
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(4);
    for (auto& x : w) x = rng.uniform(-2, 2);
    const double a = w[0] * w[0] + w[2] * w[2], d = w[1] * w[1] + w[3] * w[3], b = w[0] * w[1] + w[2] * w[3];
    const double top = 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + b * b);
    CHECK(spectral_norm(w, 2, 2) == doctest::Approx(std::sqrt(top)).epsilon(1e-6));
  }
}

TEST_CASE("lipschitz bounds of hand-built networks") {
  const auto affine = make({1, 1}, {3.0, 0.0});
  CHECK(lipschitz_upper(affine) == doctest::Approx(3.0));
  const auto dist = SamplingDistribution::uniform_cube(1);
  CHECK(lipschitz_lower_empirical(affine, dist, 100, Seed{1, 0}) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(lipschitz_upper(make({1, 1, 1}, {2.0, 0.0, 5.0, 0.0})) == doctest::Approx(10.0));
  const MlpParams zero(MlpSpec{{2, 4, 1}});
  CHECK(lipschitz_lower_empirical(zero, SamplingDistribution::uniform_cube(2), 100, Seed{1, 0}) == 0.0);
}

TEST_CASE("certified upper bound dominates the sampled lower bound") {
  const auto dist = SamplingDistribution::uniform_cube(2);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto params = init_params(MlpSpec{{2, 12, 6, 1}}, Seed{8, s});
    const auto est = estimate_lipschitz(params, dist, 10'000, Seed{9, s});
    CHECK(est.lower <= est.upper);
    CHECK(est.pair_count == 10'000);
  }
}

TEST_CASE("spectral projection caps every layer") {
  auto params = init_params(MlpSpec{{3, 20, 20, 1}}, Seed{10, 0});
  for (auto& v : params.values()) v *= 4.0;
  const std::size_t scaled = project_spectral(params, 1.0);
  CHECK(scaled > 0);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(spectral_norm(params.weight(k), params.rows(k), params.cols(k)) <= 1.0 + 1e-6);
  }
  CHECK(lipschitz_upper(params) <= 1.0 + 1e-5);
}

TEST_CASE("model files round-trip exactly") {
  const auto params = init_params(MlpSpec{{2, 5, 3, 1}, Activation::Tanh}, Seed{11, 0});
  std::stringstream buf;
  write_model(buf, params);
  const auto bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "WCMLP001");
  CHECK(bytes.size() == 8 + 4 + 4 + 4 * 4 + 8 * param_count(params.spec()));
  CHECK(read_model(buf) == params);
  std::stringstream bad("WCMLP999");
  CHECK_THROWS(read_model(bad));
}
