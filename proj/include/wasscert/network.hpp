#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wasscert/errors.hpp"
#include "wasscert/measures.hpp"
#include "wasscert/rng.hpp"

namespace wasscert {

enum class Activation { Relu, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Layer widths d_1, ..., d_{L+1}: input dimension first, scalar output last.
struct MlpSpec {
  std::vector<std::size_t> dims;
  Activation activation = Activation::Relu;

  std::size_t input_dim() const { return dims.front(); }
  std::size_t layer_count() const { return dims.size() - 1; }
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// sum_k d_{k+1} (d_k + 1)
std::size_t param_count(const MlpSpec& spec);

/// All weights and biases in one flat buffer: for each layer k, W_k
/// (d_{k+1} x d_k, row-major) followed by b_k. Gradients use the same layout.
class MlpParams {
 public:
  MlpParams() = default;
  explicit MlpParams(MlpSpec spec);
  MlpParams(MlpSpec spec, std::vector<double> values);

  const MlpSpec& spec() const { return spec_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::span<const double> weight(std::size_t k) const { return {values_.data() + offsets_[k], rows(k) * cols(k)}; }
  std::span<double> weight(std::size_t k) { return {values_.data() + offsets_[k], rows(k) * cols(k)}; }
  std::span<const double> bias(std::size_t k) const {
    return {values_.data() + offsets_[k] + rows(k) * cols(k), rows(k)};
  }
  std::span<double> bias(std::size_t k) { return {values_.data() + offsets_[k] + rows(k) * cols(k), rows(k)}; }
  std::size_t rows(std::size_t k) const { return spec_.dims[k + 1]; }
  std::size_t cols(std::size_t k) const { return spec_.dims[k]; }
  std::size_t offset(std::size_t k) const { return offsets_[k]; }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    return a.spec_ == b.spec_ && a.values_ == b.values_;
  }

 private:
  MlpSpec spec_;
  std::vector<double> values_;
  std::vector<std::size_t> offsets_;
};

/// Weights and biases uniform in +-sqrt(6 / (d_k + d_{k+1})) per layer.
/// Nonzero biases spread the relu kinks; with zero biases every first-layer
/// kink sits at the origin, a corner of the sampling box.
MlpParams init_params(const MlpSpec& spec, const Seed& seed);

/// C_L o sigma o ... o sigma o C_1 (x); no activation after the last layer.
double mlp_forward(const MlpParams& params, std::span<const double> x);

/// Output and its gradient with respect to every parameter (backprop).
double mlp_forward_gradient(const MlpParams& params, std::span<const double> x, std::span<double> grad);

/// Network outputs at every point of the cloud; parallel over points.
std::vector<double> mlp_evaluate(const MlpParams& params, const PointCloud& cloud);

/// (1/N) sum_i |u(x_i) - y_i|^p and its parameter gradient, accumulated over
/// fixed-size point blocks in parallel and then folded in block order, so the
/// result is bit-identical for every thread count. For p = 1 the subgradient
/// at a zero residual is 0.
double loss_and_gradient(const MlpParams& params, const PointCloud& cloud, std::span<const double> targets,
                         double p, std::span<double> grad);

/// Plain sequential loop with the same result up to summation order.
double loss_and_gradient_serial(const MlpParams& params, const PointCloud& cloud,
                                std::span<const double> targets, double p, std::span<double> grad);

class PowerIterationStalled : public NumericalError {
 public:
  PowerIterationStalled(const std::string& what, double best) : NumericalError(what), best_(best) {}
  double best_estimate() const { return best_; }

 private:
  double best_;
};

/// Largest singular value of a row-major matrix by power iteration on W^T W,
/// stopping at relative change <= tol.
double spectral_norm(std::span<const double> w, std::size_t rows, std::size_t cols, double tol = 1e-8,
                     std::size_t max_iterations = 20'000);

/// prod_k ||W_k||_2 * lip_activation^(L-1), a valid Lipschitz bound.
double lipschitz_upper(const MlpParams& params, double lip_activation = 1.0);

/// max over sampled pairs of |u(x) - u(x')| / |x - x'|.
double lipschitz_lower_empirical(const MlpParams& params, const SamplingDistribution& dist, std::size_t pairs,
                                 const Seed& seed);

/// Same quotient for any scalar field, used to check analytic constants.
double lipschitz_lower_empirical(const ScalarField& fn, const SamplingDistribution& dist, std::size_t pairs,
                                 const Seed& seed);

struct LipschitzEstimate {
  double upper = 0.0;
  double lower = 0.0;
  std::size_t pair_count = 0;
};

LipschitzEstimate estimate_lipschitz(const MlpParams& params, const SamplingDistribution& dist, std::size_t pairs,
                                     const Seed& seed);

/// Rescales every W_k with ||W_k||_2 > cap down to norm cap. Returns how many
/// layers were rescaled.
std::size_t project_spectral(MlpParams& params, double cap);

/// Binary model file: magic "WCMLP001", u32 activation tag, u32 layer-dim
/// count, u32 dims, then every parameter as little-endian float64.
void write_model(std::ostream& out, const MlpParams& params);
MlpParams read_model(std::istream& in);
void save_model(const std::string& path, const MlpParams& params);
MlpParams load_model(const std::string& path);

}  // namespace wasscert
