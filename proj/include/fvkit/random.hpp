#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace fvkit {

// Seeded generator whose output sequence is fixed by the C++ standard
// (mt19937_64) plus bounded sampling that does not depend on the standard
// library's distribution implementations. Everything built on it is
// bit-reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound), rejection sampled.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Picks `count` distinct elements, preserving the selection order of a
  // partial Fisher-Yates pass over `pool`.
  template <typename T>
  std::vector<T> sample(std::span<const T> pool, std::size_t count) {
    std::vector<T> work(pool.begin(), pool.end());
    count = std::min(count, work.size());
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(work.size() - i));
      std::swap(work[i], work[j]);
    }
    work.resize(count);
    return work;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fvkit
