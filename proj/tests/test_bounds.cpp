#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wasscert/bounds.hpp"
#include "wasscert/errors.hpp"
#include "wasscert/transport.hpp"

using namespace wasscert;

TEST_CASE("the target itself has zero empirical term and zero risk") {
  const auto dist = SamplingDistribution::uniform_cube(2);
  const auto f = TargetFunction::abs_offset({0.5, 0.5});
  const auto cloud = sample_points(dist, 32, Seed{1, 0});
  const auto c = certify(f.field(), f.lipschitz(), cloud, f, dist, 32, 2.0, Seed{1, 1});
  CHECK(c.empirical_term == 0.0);
  CHECK(c.measured_risk == 0.0);
  CHECK(c.bound >= 0.0);
  CHECK(c.exact);
  CHECK(c.lipschitz == 2.0);
}

TEST_CASE("a constant offset is certified with slack L W") {
  const auto dist = SamplingDistribution::uniform_cube(1);
  const auto f = TargetFunction::sinusoid(0.3, {1.0});
  const auto cloud = sample_points(dist, 40, Seed{2, 0});
  const ScalarField u = [&](std::span<const double> x) { return f(x) + 0.2; };
  const auto c = certify(u, f.lipschitz(), cloud, f, dist, 40, 1.5, Seed{2, 1});
  CHECK(c.empirical_term == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(c.measured_risk == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(c.bound == doctest::Approx(0.2 + 2 * f.lipschitz() * c.matching_term).epsilon(1e-12));
  CHECK(c.measured_risk <= c.bound);
}

TEST_CASE("certificate terms recomputed by hand") {
  const auto dist = SamplingDistribution::uniform_cube(1);
  const auto f = TargetFunction::abs_offset({0.5});
  const auto cloud = sample_points(dist, 64, Seed{3, 0});
  auto s = TrainSettings{};
  s.restarts = 2;
  s.steps = 1500;
  const auto model = train(MlpSpec{{1, 16, 1}}, cloud, f, 2.0, s, Seed{3, 1});
  const auto c = certify(model, f, dist, 64, 2.0, Seed{3, 2});
  const auto ref = sample_points(dist, 64, Seed{3, 2});
  const auto u = model.field();
  double risk = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) risk += std::pow(u(ref.point(i)) - f(ref.point(i)), 2);
  CHECK(c.measured_risk == doctest::Approx(std::sqrt(risk / 64)).epsilon(1e-12));
  CHECK(c.matching_term == doctest::Approx(oracle::sorted_wp_1d(ref, cloud, 2.0)).epsilon(1e-12));
  CHECK(c.empirical_term == doctest::Approx(std::sqrt(model.trace.final_loss)).epsilon(1e-12));
  CHECK(c.lipschitz == doctest::Approx(lipschitz_upper(model.params) + 1.0).epsilon(1e-12));
  CHECK(c.measured_risk <= c.bound + 1e-9);
  CHECK(c.pushforward_term <= c.lipschitz * c.matching_term + 1e-9);
}

TEST_CASE("doubling the constant never lowers the bound") {
  const auto dist = SamplingDistribution::uniform_cube(2);
  const auto f = TargetFunction::radial_norm();
  const auto cloud = sample_points(dist, 20, Seed{4, 0});
  const auto params = init_params(MlpSpec{{2, 6, 1}}, Seed{4, 1});
  const ScalarField u = [&](std::span<const double> x) { return mlp_forward(params, x); };
  const double lip = lipschitz_upper(params);
  const auto a = certify(u, lip, cloud, f, dist, 20, 2.0, Seed{4, 2});
  const auto b = certify(u, 2 * lip, cloud, f, dist, 20, 2.0, Seed{4, 2});
  CHECK(b.bound >= a.bound);
  CHECK(a.measured_risk <= a.bound + 1e-9);
}

TEST_CASE("larger reference samples take the approximate path") {
  const auto dist = SamplingDistribution::uniform_cube(2);
  const auto f = TargetFunction::radial_norm();
  const auto cloud = sample_points(dist, 8, Seed{5, 0});
  const auto c = certify(f.field(), 1.0, cloud, f, dist, 24, 2.0, Seed{5, 1});
  CHECK_FALSE(c.exact);
  CHECK(c.m_ref == 24);
  CHECK_THROWS_AS(certify(f.field(), 1.0, cloud, f, dist, 12, 2.0, Seed{5, 1}), ConfigError);
}

TEST_CASE("expected certificate over repetitions") {
  CertificateExperiment exp;
  exp.dist = SamplingDistribution::uniform_cube(1);
  exp.target = TargetFunction::abs_offset({0.5});
  exp.spec = MlpSpec{{1, 8, 1}};
  exp.training.restarts = 1;
  exp.training.steps = 300;
  exp.n = 16;
  exp.m_ref = 16;
  const auto a = expected_certificate(exp, 10, Seed{6, 0});
  CHECK(a.certificates.size() == 10);
  CHECK(a.violations == 0);
  CHECK(a.measured_risk.mean <= a.bound.mean);
  CHECK(std::isnan(a.infimum_proxy));
  const auto again = expected_certificate(exp, 10, Seed{6, 0});
  CHECK(again.bound.mean == a.bound.mean);
  const auto other = expected_certificate(exp, 10, Seed{7, 0});
  const double se = std::hypot(a.measured_risk.standard_error, other.measured_risk.standard_error);
  CHECK(std::abs(a.measured_risk.mean - other.measured_risk.mean) <= 4 * se);
  CHECK_THROWS_AS(expected_certificate(exp, 9, Seed{6, 0}), ConfigError);
}

TEST_CASE("mean with standard error") {
  const auto m = mean_with_error({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.standard_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
}
