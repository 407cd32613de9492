#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gmclab::rng {

// 64-bit mix used to derive independent engine seeds from (seed, stream id).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL;
  std::uint64_t b = splitmix64(s);
  return a ^ (b + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

// Normal sampler with an explicit Box-Muller transform.  mt19937_64 output is
// specified by the standard, so a fixed (seed, stream) pair reproduces the
// same values on every run; std::normal_distribution is not guaranteed to.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream)
      : engine_(derive_seed(seed, stream)) {}

  double uniform() {
    // 53-bit mantissa in (0,1); never returns 0 so log() below is safe.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gmclab::rng
