#include "wasscert/measures.hpp"

#include <cmath>
#include <utility>

#include "wasscert/errors.hpp"

namespace wasscert {

namespace {

constexpr std::size_t kMaxRejections = 1'000'000;

double sample_component(const GaussianComponent& c, std::size_t axis, Rng& rng) {
  return c.mean[axis] + c.scale * rng.normal();
}

}  // namespace

std::string to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::UniformCube:
      return "uniform-cube";
    case DistributionKind::TruncatedGaussian:
      return "truncated-gaussian";
    case DistributionKind::TwoComponentMixture:
      return "two-component-mixture";
  }
  return "unknown";
}

DistributionKind distribution_kind_from_string(const std::string& name) {
  if (name == "uniform-cube") return DistributionKind::UniformCube;
  if (name == "truncated-gaussian") return DistributionKind::TruncatedGaussian;
  if (name == "two-component-mixture") return DistributionKind::TwoComponentMixture;
  throw ConfigError("distribution.kind: unknown kind '" + name +
                    "' (expected uniform-cube, truncated-gaussian or two-component-mixture)");
}

SamplingDistribution SamplingDistribution::uniform_cube(std::size_t dim, double side) {
  SamplingDistribution d;
  d.kind = DistributionKind::UniformCube;
  d.dim = dim;
  d.lo = 0.0;
  d.hi = side;
  return d;
}

SamplingDistribution SamplingDistribution::truncated_gaussian(std::size_t dim, std::vector<double> mean, double scale,
                                                              double lo, double hi) {
  SamplingDistribution d;
  d.kind = DistributionKind::TruncatedGaussian;
  d.dim = dim;
  d.lo = lo;
  d.hi = hi;
  d.components.push_back({std::move(mean), scale, 1.0});
  return d;
}

SamplingDistribution SamplingDistribution::mixture(std::size_t dim, GaussianComponent first,
                                                   GaussianComponent second, double lo, double hi) {
  SamplingDistribution d;
  d.kind = DistributionKind::TwoComponentMixture;
  d.dim = dim;
  d.lo = lo;
  d.hi = hi;
  d.components = {std::move(first), std::move(second)};
  return d;
}

void SamplingDistribution::validate() const {
  if (dim == 0) throw ConfigError("distribution.dim: must be >= 1");
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw ConfigError(kind == DistributionKind::UniformCube ? "distribution.side: must be > 0"
                                                           : "distribution.box: need lo < hi, both finite");
  }
  if (kind == DistributionKind::UniformCube) {
    if (lo != 0.0) throw ConfigError("distribution: uniform-cube must start at the origin");
    if (!components.empty()) throw ConfigError("distribution: uniform-cube takes no gaussian components");
    return;
  }
  const std::size_t expected = kind == DistributionKind::TruncatedGaussian ? 1 : 2;
  if (components.size() != expected) {
    throw ConfigError("distribution.components: " + to_string(kind) + " needs " + std::to_string(expected));
  }
  double total = 0.0;
  for (const auto& c : components) {
    if (c.mean.size() != dim) throw ConfigError("distribution.mean: length must equal dim");
    if (!(c.scale > 0.0) || !std::isfinite(c.scale)) throw ConfigError("distribution.scale: must be > 0");
    if (!(c.weight >= 0.0)) throw ConfigError("distribution.weights: must be >= 0");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("distribution.weights: must sum to 1");
}

bool SamplingDistribution::contains(std::span<const double> x) const {
  if (x.size() != dim) return false;
  for (double v : x) {
    if (!(v >= lo && v <= hi)) return false;
  }
  return true;
}

PointCloud::PointCloud(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0) throw ConfigError("point cloud: dimension must be >= 1");
  if (coords_.size() % dim_ != 0) throw ConfigError("point cloud: coordinate count is not a multiple of dim");
}

EmpiricalMeasure::EmpiricalMeasure(PointCloud cloud) : cloud_(std::move(cloud)) {
  if (cloud_.size() == 0) throw ConfigError("empirical measure: needs at least one atom");
}

double EmpiricalMeasure::abs_moment(double p) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    double sq = 0.0;
    for (double v : atom(i)) sq += v * v;
    sum += std::pow(std::sqrt(sq), p);
  }
  return sum / static_cast<double>(size());
}

PointCloud sample_points(const SamplingDistribution& dist, std::size_t n, const Seed& seed) {
  dist.validate();
  if (n == 0) throw ConfigError("sample_points: n must be >= 1");
  Rng rng(seed);
  std::vector<double> coords(n * dist.dim);
  std::vector<double> x(dist.dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (dist.kind == DistributionKind::UniformCube) {
      for (std::size_t k = 0; k < dist.dim; ++k) x[k] = rng.uniform(dist.lo, dist.hi);
    } else {
      std::size_t attempts = 0;
      for (;;) {
        const GaussianComponent* comp = &dist.components.front();
        if (dist.components.size() == 2 && rng.uniform() >= dist.components[0].weight) comp = &dist.components[1];
        for (std::size_t k = 0; k < dist.dim; ++k) x[k] = sample_component(*comp, k, rng);
        if (dist.contains(x)) break;
        if (++attempts == kMaxRejections) {
          throw ConfigError("distribution: box acceptance rate too low for rejection sampling");
        }
      }
    }
    std::copy(x.begin(), x.end(), coords.begin() + static_cast<std::ptrdiff_t>(i * dist.dim));
  }
  return PointCloud(dist.dim, std::move(coords));
}

EmpiricalMeasure pushforward_residual(const ScalarField& g, const ScalarField& f, const EmpiricalMeasure& mu) {
  std::vector<double> atoms(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) atoms[i] = g(mu.atom(i)) - f(mu.atom(i));
  return EmpiricalMeasure(PointCloud(1, std::move(atoms)));
}

}  // namespace wasscert
