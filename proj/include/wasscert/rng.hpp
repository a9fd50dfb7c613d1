#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace wasscert {

/// Master seed plus stream id. Equal pairs give bit-identical sample sequences.
struct Seed {
  std::uint64_t value = 0;
  std::uint64_t stream = 0;

  friend bool operator==(const Seed&, const Seed&) = default;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child stream for job `index` (repetition, restart, grid cell). Children of
/// distinct indices are independent of each other and of the parent.
inline Seed derive(const Seed& parent, std::uint64_t index) {
  return Seed{parent.value, splitmix64(parent.stream ^ splitmix64(index + 0x632be59bd9b4e019ULL))};
}

/// Portable generator: mt19937_64 is fully specified by the standard, and the
/// real-valued draws below avoid the implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(const Seed& seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed.value), static_cast<std::uint32_t>(seed.value >> 32),
                      static_cast<std::uint32_t>(seed.stream), static_cast<std::uint32_t>(seed.stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal, Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace wasscert
