#include "wasscert/network.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "wasscert/parallel.hpp"

namespace wasscert {

namespace {

constexpr std::size_t kBlock = 64;
constexpr std::array<char, 8> kMagic = {'W', 'C', 'M', 'L', 'P', '0', '0', '1'};

inline double activate(Activation a, double z) { return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

// derivative expressed through the pre-activation z and the activation value s
inline double activate_slope(Activation a, double z, double s) {
  return a == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - s * s;
}

// Per-point buffers: pre-activations and activations for every layer.
struct Workspace {
  explicit Workspace(const MlpSpec& spec) : pre(spec.dims.size()), post(spec.dims.size()), delta(spec.dims.size()) {
    for (std::size_t k = 0; k < spec.dims.size(); ++k) {
      pre[k].resize(spec.dims[k]);
      post[k].resize(spec.dims[k]);
      delta[k].resize(spec.dims[k]);
    }
  }
  std::vector<std::vector<double>> pre, post, delta;
};

double forward(const MlpParams& params, std::span<const double> x, Workspace& ws) {
  const auto& spec = params.spec();
  const std::size_t layers = spec.layer_count();
  std::copy(x.begin(), x.end(), ws.post[0].begin());
  for (std::size_t k = 0; k < layers; ++k) {
    const auto w = params.weight(k);
    const auto b = params.bias(k);
    const std::size_t rows = params.rows(k), cols = params.cols(k);
    const auto& in = ws.post[k];
    auto& z = ws.pre[k + 1];
    auto& s = ws.post[k + 1];
    const bool last = k + 1 == layers;
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = b[r];
      const double* wr = w.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * in[c];
      z[r] = acc;
      s[r] = last ? acc : activate(spec.activation, acc);
    }
  }
  return ws.post[layers][0];
}

// Accumulates d_out * (d output / d theta) into grad; needs a prior forward().
void backward(const MlpParams& params, double d_out, Workspace& ws, double* grad) {
  const auto& spec = params.spec();
  const std::size_t layers = spec.layer_count();
  ws.delta[layers][0] = d_out;
  for (std::size_t k = layers; k-- > 0;) {
    const std::size_t rows = params.rows(k), cols = params.cols(k);
    const auto w = params.weight(k);
    double* gw = grad + params.offset(k);
    double* gb = gw + rows * cols;
    const auto& in = ws.post[k];
    const auto& delta = ws.delta[k + 1];
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      double* gr = gw + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gr[c] += d * in[c];
      gb[r] += d;
    }
    if (k == 0) break;
    auto& below = ws.delta[k];
    std::fill(below.begin(), below.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* wr = w.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) below[c] += wr[c] * d;
    }
    for (std::size_t c = 0; c < cols; ++c) below[c] *= activate_slope(spec.activation, ws.pre[k][c], ws.post[k][c]);
  }
}

// |r|^p and its derivative in r; subgradient 0 at r = 0 when p = 1.
inline void residual_power(double r, double p, double& value, double& slope) {
  const double a = std::abs(r);
  const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
  if (p == 2.0) {
    value = r * r;
    slope = 2.0 * r;
  } else if (p == 1.0) {
    value = a;
    slope = sign;
  } else {
    value = std::pow(a, p);
    slope = a == 0.0 ? 0.0 : p * std::pow(a, p - 1.0) * sign;
  }
}

void check_batch(const MlpParams& params, const PointCloud& cloud, std::span<const double> targets,
                 std::span<double> grad) {
  if (cloud.dim() != params.spec().input_dim()) throw ConfigError("network: input dimension mismatch");
  if (targets.size() != cloud.size()) throw ConfigError("network: one target per point required");
  if (grad.size() != params.values().size()) throw ConfigError("network: gradient buffer has wrong size");
  if (cloud.size() == 0) throw ConfigError("network: empty point cloud");
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ConfigError("model file: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("network.activation: unknown activation '" + name + "' (expected relu or tanh)");
}

void MlpSpec::validate() const {
  if (dims.size() < 2) throw ConfigError("network: need at least one layer (dims d_1..d_{L+1} with L >= 1)");
  for (std::size_t d : dims) {
    if (d == 0) throw ConfigError("network: every layer width must be >= 1");
  }
  if (dims.back() != 1) throw ConfigError("network: output width must be 1");
}

std::size_t param_count(const MlpSpec& spec) {
  std::size_t total = 0;
  for (std::size_t k = 0; k + 1 < spec.dims.size(); ++k) total += spec.dims[k + 1] * (spec.dims[k] + 1);
  return total;
}

MlpParams::MlpParams(MlpSpec spec) : MlpParams(spec, std::vector<double>(param_count(spec), 0.0)) {}

MlpParams::MlpParams(MlpSpec spec, std::vector<double> values) : spec_(std::move(spec)), values_(std::move(values)) {
  spec_.validate();
  if (values_.size() != param_count(spec_)) throw ConfigError("network: parameter count does not match dims");
  std::size_t off = 0;
  for (std::size_t k = 0; k < spec_.layer_count(); ++k) {
    offsets_.push_back(off);
    off += spec_.dims[k + 1] * (spec_.dims[k] + 1);
  }
}

MlpParams init_params(const MlpSpec& spec, const Seed& seed) {
  MlpParams params(spec);
  Rng rng(seed);
  for (std::size_t k = 0; k < spec.layer_count(); ++k) {
    const double limit = std::sqrt(6.0 / static_cast<double>(spec.dims[k] + spec.dims[k + 1]));
    for (double& w : params.weight(k)) w = rng.uniform(-limit, limit);
    for (double& b : params.bias(k)) b = rng.uniform(-limit, limit);
  }
  return params;
}

double mlp_forward(const MlpParams& params, std::span<const double> x) {
  if (x.size() != params.spec().input_dim()) throw ConfigError("network: input dimension mismatch");
  Workspace ws(params.spec());
  return forward(params, x, ws);
}

double mlp_forward_gradient(const MlpParams& params, std::span<const double> x, std::span<double> grad) {
  if (x.size() != params.spec().input_dim()) throw ConfigError("network: input dimension mismatch");
  if (grad.size() != params.values().size()) throw ConfigError("network: gradient buffer has wrong size");
  Workspace ws(params.spec());
  std::fill(grad.begin(), grad.end(), 0.0);
  const double out = forward(params, x, ws);
  backward(params, 1.0, ws, grad.data());
  return out;
}

std::vector<double> mlp_evaluate(const MlpParams& params, const PointCloud& cloud) {
  if (cloud.dim() != params.spec().input_dim()) throw ConfigError("network: input dimension mismatch");
  const std::size_t n = cloud.size();
  std::vector<double> out(n);
  const long blocks = static_cast<long>((n + kBlock - 1) / kBlock);
#pragma omp parallel num_threads(worker_count()) if (blocks > 1)
  {
    Workspace ws(params.spec());
#pragma omp for schedule(static)
    for (long b = 0; b < blocks; ++b) {
      const std::size_t end = std::min(n, static_cast<std::size_t>(b + 1) * kBlock);
      for (std::size_t i = static_cast<std::size_t>(b) * kBlock; i < end; ++i) out[i] = forward(params, cloud.point(i), ws);
    }
  }
  return out;
}

double loss_and_gradient(const MlpParams& params, const PointCloud& cloud, std::span<const double> targets,
                         double p, std::span<double> grad) {
  check_batch(params, cloud, targets, grad);
  const std::size_t n = cloud.size();
  const std::size_t np = grad.size();
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> block_loss(blocks, 0.0);
  std::vector<double> block_grad(blocks * np, 0.0);
  const long count = static_cast<long>(blocks);
#pragma omp parallel num_threads(worker_count()) if (blocks > 1)
  {
    Workspace ws(params.spec());
#pragma omp for schedule(static)
    for (long b = 0; b < count; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      double* g = block_grad.data() + bi * np;
      double acc = 0.0;
      const std::size_t end = std::min(n, (bi + 1) * kBlock);
      for (std::size_t i = bi * kBlock; i < end; ++i) {
        double value, slope;
        residual_power(forward(params, cloud.point(i), ws) - targets[i], p, value, slope);
        acc += value;
        backward(params, slope, ws, g);
      }
      block_loss[bi] = acc;
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    loss += block_loss[b];
    const double* g = block_grad.data() + b * np;
    for (std::size_t j = 0; j < np; ++j) grad[j] += g[j];
  }
  for (double& g : grad) g *= inv;
  return loss * inv;
}

double loss_and_gradient_serial(const MlpParams& params, const PointCloud& cloud,
                                std::span<const double> targets, double p, std::span<double> grad) {
  check_batch(params, cloud, targets, grad);
  Workspace ws(params.spec());
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double value, slope;
    residual_power(forward(params, cloud.point(i), ws) - targets[i], p, value, slope);
    loss += value;
    backward(params, slope, ws, grad.data());
  }
  const double inv = 1.0 / static_cast<double>(cloud.size());
  for (double& g : grad) g *= inv;
  return loss * inv;
}

double spectral_norm(std::span<const double> w, std::size_t rows, std::size_t cols, double tol,
                     std::size_t max_iterations) {
  if (w.size() != rows * cols) throw ConfigError("spectral_norm: matrix shape mismatch");
  if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) return 0.0;

  Rng rng(Seed{0x5eed, rows * 131 + cols});
  std::vector<double> v(cols), u(rows);
  for (double& x : v) x = rng.uniform(0.5, 1.5);
  auto normalise = [](std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0) {
      for (double& e : x) e /= s;
    }
    return s;
  };
  normalise(v);

  double sigma = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * v[c];
      u[r] = acc;
    }
    if (normalise(u) == 0.0) {
      // start vector fell into the kernel; perturb and retry
      for (double& x : v) x += rng.uniform(-0.5, 0.5);
      normalise(v);
      continue;
    }
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) v[c] += w[r * cols + c] * u[r];
    }
    const double next = normalise(v);
    if (std::abs(next - sigma) <= tol * next) return next;
    sigma = next;
  }
  throw PowerIterationStalled("spectral_norm: power iteration did not reach relative tolerance " +
                                  std::to_string(tol),
                              sigma);
}

double lipschitz_upper(const MlpParams& params, double lip_activation) {
  if (!(lip_activation >= 0.0)) throw ConfigError("lipschitz_upper: activation constant must be >= 0");
  double bound = 1.0;
  const std::size_t layers = params.spec().layer_count();
  for (std::size_t k = 0; k < layers; ++k) bound *= spectral_norm(params.weight(k), params.rows(k), params.cols(k));
  for (std::size_t k = 0; k + 1 < layers; ++k) bound *= lip_activation;
  return bound;
}

double lipschitz_lower_empirical(const ScalarField& fn, const SamplingDistribution& dist, std::size_t pairs,
                                 const Seed& seed) {
  if (pairs == 0) throw ConfigError("lipschitz_lower_empirical: pairs must be >= 1");
  double best = 0.0;
  std::size_t done = 0;
  std::uint64_t draw = 0;
  while (done < pairs) {
    const auto batch = sample_points(dist, 2, derive(seed, draw++));
    const auto x = batch.point(0), y = batch.point(1);
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) sq += (x[k] - y[k]) * (x[k] - y[k]);
    const double gap = std::sqrt(sq);
    if (gap < 1e-12) continue;
    best = std::max(best, std::abs(fn(x) - fn(y)) / gap);
    ++done;
  }
  return best;
}

double lipschitz_lower_empirical(const MlpParams& params, const SamplingDistribution& dist, std::size_t pairs,
                                 const Seed& seed) {
  if (dist.dim != params.spec().input_dim()) throw ConfigError("lipschitz_lower_empirical: dimension mismatch");
  Workspace ws(params.spec());
  return lipschitz_lower_empirical([&](std::span<const double> x) { return forward(params, x, ws); }, dist, pairs,
                                   seed);
}

LipschitzEstimate estimate_lipschitz(const MlpParams& params, const SamplingDistribution& dist, std::size_t pairs,
                                     const Seed& seed) {
  return {lipschitz_upper(params), lipschitz_lower_empirical(params, dist, pairs, seed), pairs};
}

std::size_t project_spectral(MlpParams& params, double cap) {
  if (!(cap > 0.0)) throw ConfigError("training.spectral_cap: must be > 0");
  std::size_t scaled = 0;
  for (std::size_t k = 0; k < params.spec().layer_count(); ++k) {
    auto w = params.weight(k);
    const double norm = spectral_norm(w, params.rows(k), params.cols(k), 1e-10);
    if (norm > cap) {
      const double factor = cap / norm;
      for (double& x : w) x *= factor;
      ++scaled;
    }
  }
  return scaled;
}

void write_model(std::ostream& out, const MlpParams& params) {
  const auto& spec = params.spec();
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, spec.activation == Activation::Relu ? 0u : 1u);
  put_u32(out, static_cast<std::uint32_t>(spec.dims.size()));
  for (std::size_t d : spec.dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : params.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
  }
  if (!out) throw NumericalError("model file: write failed");
}

MlpParams read_model(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw ConfigError("model file: bad magic");
  MlpSpec spec;
  const std::uint32_t tag = get_u32(in);
  if (tag > 1) throw ConfigError("model file: unknown activation tag");
  spec.activation = tag == 0 ? Activation::Relu : Activation::Tanh;
  const std::uint32_t count = get_u32(in);
  if (count < 2 || count > 1024) throw ConfigError("model file: implausible layer count");
  for (std::uint32_t i = 0; i < count; ++i) spec.dims.push_back(get_u32(in));
  spec.validate();
  std::vector<double> values(param_count(spec));
  for (double& v : values) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("model file: truncated parameters");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  return MlpParams(std::move(spec), std::move(values));
}

void save_model(const std::string& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open model file for writing: " + path);
  write_model(out, params);
}

MlpParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file: " + path);
  return read_model(in);
}

}  // namespace wasscert
