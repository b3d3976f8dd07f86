#pragma once

#include <cassert>
#include <cstdint>
#include <random>

namespace seqrec {

// Seeded generator with hand-rolled distributions so that streams are
// bit-identical across standard libraries, not just across runs.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t next_index(std::uint64_t n) {
    assert(n > 0);
    while (true) {
      std::uint64_t x = engine_();
      __uint128_t m = static_cast<__uint128_t>(x) * n;
      auto lo = static_cast<std::uint64_t>(m);
      if (lo >= n || lo >= (-n) % n) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  // In-place Fisher-Yates.
  template <typename Container>
  void shuffle(Container& c) {
    for (std::size_t i = c.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_index(i));
      std::swap(c[i - 1], c[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace seqrec
