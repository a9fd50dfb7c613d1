#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wasscert/measures.hpp"
#include "wasscert/network.hpp"
#include "wasscert/training.hpp"

namespace wasscert {

/// Every term of the generalisation certificate
///
///   ||u - f||_{L^p(mu_ref)} <= (E_N(u))^(1/p) + L * W_p(mu_ref, mu_N)
///
/// where mu_N is the training measure and mu_ref a fresh reference sample
/// standing in for the data law. L is a certified Lipschitz constant of u - f.
struct BoundCertificate {
  double empirical_term = 0.0;  ///< (discrete loss on the training points)^(1/p)
  double lipschitz = 0.0;       ///< lipschitz_upper(u) + Lip(f)
  double matching_term = 0.0;   ///< W_p(mu_ref, mu_N)
  double bound = 0.0;           ///< empirical_term + lipschitz * matching_term
  double measured_risk = 0.0;   ///< ||u - f|| in L^p(mu_ref), exact over the reference atoms
  /// W_p([u-f]#mu_ref, [u-f]#mu_N), the sharper quantity the Lipschitz step bounds
  double pushforward_term = 0.0;
  std::size_t n = 0;
  std::size_t m_ref = 0;
  double p = 2.0;
  Seed seed;
  bool exact = true;      ///< matching term from an exact solver
  double residual = 0.0;  ///< sinkhorn marginal violation when !exact
};

/// Builds the certificate for a trained model on a fresh reference sample of
/// size m_ref, which must be a positive multiple of the training size. Uses
/// the exact assignment solver when m_ref == N and sinkhorn otherwise.
/// Throws InternalError if an exact certificate is violated by more than 1e-9.
BoundCertificate certify(const TrainedModel& model, const TargetFunction& f, const SamplingDistribution& dist,
                         std::size_t m_ref, double p, const Seed& seed);

/// Same certificate for any Lipschitz candidate u with certified constant lip_u.
BoundCertificate certify(const ScalarField& u, double lip_u, const PointCloud& train_points,
                         const TargetFunction& f, const SamplingDistribution& dist, std::size_t m_ref, double p,
                         const Seed& seed);

struct CertificateExperiment {
  SamplingDistribution dist;
  TargetFunction target;
  MlpSpec spec;
  TrainSettings training;
  std::size_t n = 64;
  std::size_t m_ref = 64;  ///< 0 means m_ref = n
  double p = 2.0;
  /// Training size of the high-budget run proxying inf_phi ||phi - f||_p; 0 skips it.
  std::size_t infimum_n = 0;
  std::size_t infimum_risk_samples = 100'000;
};

struct MeanWithError {
  double mean = 0.0;
  double standard_error = 0.0;
};

MeanWithError mean_with_error(const std::vector<double>& values);

struct CertificateSummary {
  std::vector<BoundCertificate> certificates;  ///< one per repetition, in order
  MeanWithError measured_risk, empirical_term, matching_term, bound;
  std::size_t violations = 0;  ///< reps with measured_risk > bound + 1e-9
  double infimum_proxy = 0.0;  ///< L^p risk of the high-budget model; NaN if skipped
  std::string infimum_provenance;
};

/// Monte-Carlo version of the expectation bound: reps independent
/// (sample, train, certify) realisations, reps >= 10.
CertificateSummary expected_certificate(const CertificateExperiment& config, std::size_t reps, const Seed& seed);

}  // namespace wasscert
