#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "scq/types.hpp"

namespace scq {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. All randomness in the project flows through
// this wrapper; uniform and normal draws are generated from raw engine bits
// so replays are bit-identical for a fixed (seed, stream) pair.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(splitmix64(splitmix64(seed) ^ (0xd1b54a32d192ed03ULL * (stream + 1)))) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (no cached spare, so state is one engine).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(engine_()) * n) >> 64);
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = normal();
    return m;
  }

  Vector uniform_vector(Index n, double lo, double hi) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

// Purpose tags for deriving independent per-component streams from one seed.
namespace rng_stream {
inline constexpr std::uint64_t kBatch = 1;
inline constexpr std::uint64_t kActor = 2;
inline constexpr std::uint64_t kCvae = 3;
inline constexpr std::uint64_t kOod = 4;
inline constexpr std::uint64_t kTarget = 5;
inline constexpr std::uint64_t kEval = 6;
inline constexpr std::uint64_t kInit = 7;
inline constexpr std::uint64_t kEnv = 8;
}  // namespace rng_stream

}  // namespace scq
