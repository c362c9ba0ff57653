#pragma once

#include <cmath>
#include <cstdint>

namespace m3d {

// Small deterministic generator (splitmix64 core) with hand-rolled
// distributions so that streams are reproducible across platforms and
// standard libraries. Streams derived via split() are independent of the
// order in which they are consumed, which keeps per-scene generation
// order-independent.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const double span = static_cast<double>(hi - lo) + 1.0;
    int64_t offset = static_cast<int64_t>(uniform() * span);
    if (offset > hi - lo) offset = hi - lo;
    return lo + offset;
  }

  // Box-Muller; consumes two uniforms per call.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = uniform() + 1e-300;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Knuth's method; fine for the small rates used here.
  int poisson(double lambda) {
    const double limit = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  // Derives an independent child stream without advancing this generator.
  Rng split(uint64_t stream) const {
    uint64_t z = state_ + 0x9e3779b97f4a7c15ULL * (2 * stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  uint64_t state_;
};

}  // namespace m3d
