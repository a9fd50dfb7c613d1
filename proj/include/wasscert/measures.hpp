#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wasscert/rng.hpp"

namespace wasscert {

enum class DistributionKind { UniformCube, TruncatedGaussian, TwoComponentMixture };

std::string to_string(DistributionKind kind);
DistributionKind distribution_kind_from_string(const std::string& name);

struct GaussianComponent {
  std::vector<double> mean;
  double scale = 1.0;
  double weight = 1.0;

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

/// Law of the training points. Support is always the box [lo, hi]^dim.
///
/// uniform-cube uses lo = 0 and hi = side. The Gaussian kinds are truncated
/// to the box by rejection, which keeps every moment finite.
struct SamplingDistribution {
  DistributionKind kind = DistributionKind::UniformCube;
  std::size_t dim = 1;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<GaussianComponent> components;

  static SamplingDistribution uniform_cube(std::size_t dim, double side = 1.0);
  static SamplingDistribution truncated_gaussian(std::size_t dim, std::vector<double> mean, double scale,
                                                 double lo = 0.0, double hi = 1.0);
  static SamplingDistribution mixture(std::size_t dim, GaussianComponent first, GaussianComponent second,
                                      double lo = 0.0, double hi = 1.0);

  /// Throws ConfigError naming the offending parameter.
  void validate() const;

  bool contains(std::span<const double> x) const;

  friend bool operator==(const SamplingDistribution&, const SamplingDistribution&) = default;
};

/// n points in R^dim, stored row-major.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(std::size_t dim, std::vector<double> coords);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
  const std::vector<double>& coords() const { return coords_; }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

/// Uniform probability measure (1/n) sum_i delta_{x_i}.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(PointCloud cloud);

  const PointCloud& cloud() const { return cloud_; }
  std::size_t size() const { return cloud_.size(); }
  std::size_t dim() const { return cloud_.dim(); }
  std::span<const double> atom(std::size_t i) const { return cloud_.point(i); }
  double weight() const { return 1.0 / static_cast<double>(cloud_.size()); }
  /// Weights are implicit and identical, so the mass is n * (1/n) = 1 exactly.
  double total_mass() const { return 1.0; }

  /// (1/n) sum_i |x_i|^p with |.| Euclidean.
  double abs_moment(double p) const;

 private:
  PointCloud cloud_;
};

using ScalarField = std::function<double(std::span<const double>)>;

/// n i.i.d. draws from dist. Deterministic in (dist, n, seed).
PointCloud sample_points(const SamplingDistribution& dist, std::size_t n, const Seed& seed);

/// Atoms (g - f)(x_i) with the same uniform weights: the law [g - f]#mu.
EmpiricalMeasure pushforward_residual(const ScalarField& g, const ScalarField& f, const EmpiricalMeasure& mu);

}  // namespace wasscert
