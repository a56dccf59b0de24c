#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pdm {

// Finalizer from splitmix64. Used to spread seeds and to derive independent
// substream seeds from (seed, index) pairs.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed for substream `index` of a run seeded with `seed`. Streams for
// different indices are decorrelated, and the derivation is pure so callers
// can reseed any sample without replaying the others.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index ^ 0xA5A5A5A5A5A5A5A5ULL));
}

// Deterministic generator with portable normal/uniform draws. std::mt19937_64
// output is pinned by the standard; the Box-Muller transform below avoids the
// implementation-defined std::normal_distribution, so identical seeds give
// identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  // Uniform double in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. Consumes exactly two engine words per
  // call; the second variate is discarded to keep the stream position a pure
  // function of the call count.
  double normal() {
    double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= bound);
    return x % n;
  }

  void fill_normal(Eigen::ArrayXd& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal();
  }

  // Engine-state round-trip used by checkpoint resume.
  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void restore_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (is.fail()) throw std::invalid_argument("Rng::restore_state: unparsable state string");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pdm
