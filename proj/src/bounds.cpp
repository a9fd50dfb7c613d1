#include "wasscert/bounds.hpp"

#include <cmath>
#include <limits>

#include "wasscert/errors.hpp"
#include "wasscert/parallel.hpp"
#include "wasscert/transport.hpp"

namespace wasscert {

namespace {

constexpr double kSoundnessSlack = 1e-9;

// mu_N with every atom repeated k times: the same measure, on k*N atoms.
EmpiricalMeasure replicate(const EmpiricalMeasure& mu, std::size_t k) {
  std::vector<double> coords;
  coords.reserve(mu.cloud().coords().size() * k);
  for (std::size_t r = 0; r < k; ++r) {
    coords.insert(coords.end(), mu.cloud().coords().begin(), mu.cloud().coords().end());
  }
  return EmpiricalMeasure(PointCloud(mu.dim(), std::move(coords)));
}

}  // namespace

BoundCertificate certify(const ScalarField& u, double lip_u, const PointCloud& train_points,
                         const TargetFunction& f, const SamplingDistribution& dist, std::size_t m_ref, double p,
                         const Seed& seed) {
  const std::size_t n = train_points.size();
  if (n == 0) throw ConfigError("certify: empty training set");
  if (m_ref == 0 || m_ref % n != 0) {
    throw ConfigError("certify: m_ref must be a positive multiple of N (N=" + std::to_string(n) + ")");
  }
  if (!(lip_u >= 0.0)) throw ConfigError("certify: Lipschitz constant must be >= 0");
  const auto fn = f.field();

  BoundCertificate cert;
  cert.n = n;
  cert.m_ref = m_ref;
  cert.p = p;
  cert.seed = seed;

  const EmpiricalMeasure train(train_points);
  const EmpiricalMeasure reference(sample_points(dist, m_ref, seed));

  cert.lipschitz = lip_u + f.lipschitz();
  cert.empirical_term = std::pow(discrete_loss(u, train_points, f, p), 1.0 / p);
  cert.measured_risk = wasserstein_to_dirac(pushforward_residual(u, fn, reference), p).distance;

  if (m_ref == n) {
    cert.matching_term = wasserstein_exact(reference, train, p).distance;
  } else {
    SinkhornOptions options;
    options.allow_unconverged = true;
    const auto result = sinkhorn(reference, train, p, options);
    cert.matching_term = result.distance;
    cert.residual = result.residual;
    cert.exact = false;
  }
  cert.bound = cert.empirical_term + cert.lipschitz * cert.matching_term;

  const auto pushed_train = replicate(pushforward_residual(u, fn, train), m_ref / n);
  cert.pushforward_term = wasserstein_1d(pushforward_residual(u, fn, reference), pushed_train, p).distance;

  if (cert.exact && cert.measured_risk > cert.bound + kSoundnessSlack) {
    throw InternalError("certify: measured risk " + std::to_string(cert.measured_risk) + " exceeds exact bound " +
                        std::to_string(cert.bound) + "; Lipschitz or transport computation is wrong");
  }
  return cert;
}

BoundCertificate certify(const TrainedModel& model, const TargetFunction& f, const SamplingDistribution& dist,
                         std::size_t m_ref, double p, const Seed& seed) {
  return certify(model.field(), lipschitz_upper(model.params), model.train_points, f, dist, m_ref, p, seed);
}

MeanWithError mean_with_error(const std::vector<double>& values) {
  MeanWithError out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.standard_error = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  return out;
}

CertificateSummary expected_certificate(const CertificateExperiment& config, std::size_t reps, const Seed& seed) {
  if (reps < 10) throw ConfigError("reps: expected_certificate needs reps >= 10");
  const std::size_t m_ref = config.m_ref == 0 ? config.n : config.m_ref;

  CertificateSummary summary;
  summary.certificates.resize(reps);
  parallel_jobs(reps, [&](std::size_t r) {
    const Seed rep = derive(seed, r);
    const auto cloud = sample_points(config.dist, config.n, derive(rep, 0));
    const auto model = train(config.spec, cloud, config.target, config.p, config.training, derive(rep, 1));
    summary.certificates[r] = certify(model, config.target, config.dist, m_ref, config.p, derive(rep, 2));
  });

  std::vector<double> risk, emp, match, bound;
  for (const auto& c : summary.certificates) {
    risk.push_back(c.measured_risk);
    emp.push_back(c.empirical_term);
    match.push_back(c.matching_term);
    bound.push_back(c.bound);
    if (c.measured_risk > c.bound + kSoundnessSlack) ++summary.violations;
  }
  summary.measured_risk = mean_with_error(risk);
  summary.empirical_term = mean_with_error(emp);
  summary.matching_term = mean_with_error(match);
  summary.bound = mean_with_error(bound);

  summary.infimum_proxy = std::numeric_limits<double>::quiet_NaN();
  if (config.infimum_n > 0) {
    TrainSettings budget = config.training;
    budget.mode = OptimizerMode::BestOfRestarts;
    budget.restarts = 2 * config.training.restarts;
    budget.steps = 2 * config.training.steps;
    const Seed inf_seed = derive(seed, reps + 1);
    const auto cloud = sample_points(config.dist, config.infimum_n, derive(inf_seed, 0));
    const auto model = train(config.spec, cloud, config.target, config.p, budget, derive(inf_seed, 1));
    const auto risk_est = population_risk_estimate(model.field(), config.target, config.dist,
                                                   config.infimum_risk_samples, config.p, derive(inf_seed, 2));
    summary.infimum_proxy = risk_est.norm;
    summary.infimum_provenance = "best-of-restarts run with N=" + std::to_string(config.infimum_n) +
                                 ", restarts=" + std::to_string(budget.restarts) +
                                 ", steps=" + std::to_string(budget.steps) + "; L^p risk from " +
                                 std::to_string(config.infimum_risk_samples) + " fresh samples";
  }
  return summary;
}

}  // namespace wasscert
