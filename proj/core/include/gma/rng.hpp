#pragma once

#include <cstdint>
#include <random>

namespace gma {

// Deterministic random source. mt19937_64 output is pinned by the standard,
// and the double/int draws below avoid std::*_distribution (whose exact
// sequences are implementation-defined), so identical seeds give identical
// streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // [0, 1) with 53 bits of mantissa.
  double uniform() {
    return (gen_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  // [0, n), rejection sampled so the result is unbiased.
  int uniform_int(int n) {
    if (n <= 0) return 0;
    std::uint64_t un = static_cast<std::uint64_t>(n);
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  // Independent child stream, e.g. one per epoch.
  Rng fork(std::uint64_t stream) {
    std::uint64_t s = gen_();
    return Rng(s ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gma
