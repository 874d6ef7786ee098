#pragma once

#include <cmath>
#include <cstdint>

#include "lrsm/common.hpp"

namespace lrsm {

// Counter-style SplitMix64 generator with derived per-stream seeds.
//
// Chosen over std::mt19937 because the state is two words, streams keyed by
// (seed, index) are cheap to derive, and the sequence is identical on every
// platform — simulation results must be bit-reproducible across runs and
// thread counts.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  // Finalizing mix (the SplitMix64 output function); also used standalone for
  // hashing small integers.
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  explicit Rng(std::uint64_t seed) : state_(mix(seed + kGamma)) {}

  // Stream `index` of root `seed`: decorrelated via a double mix so that
  // consecutive stream indices do not overlap shifted sequences.
  Rng(std::uint64_t seed, std::uint64_t index)
      : state_(mix(seed ^ mix((index + 1) * 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1] — used where log() must not see zero.
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box–Muller; the sine mate is cached, so draws come in
  // a fixed order regardless of how callers batch them.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vector normal_vector(Index n) {
    Vector out(n);
    for (Index i = 0; i < n; ++i) out[i] = normal();
    return out;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lrsm
