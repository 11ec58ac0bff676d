#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace morphkit {

// Deterministic RNG. All draws are derived from mt19937_64 output directly
// (no std distributions), so sequences are stable across standard libraries.
class SeededRng {
public:
  explicit SeededRng(uint64_t seed) : eng_(seed), seed_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant at these ranges;
  // determinism is what matters.
  uint64_t uniform_index(uint64_t n) { return n ? eng_() % n : 0; }

  // Marsaglia polar method.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream; used for per-record generators.
  SeededRng fork(uint64_t salt) const {
    uint64_t s = seed_ ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    s ^= s >> 33;
    s *= 0xff51afd7ed558ccdull;
    s ^= s >> 33;
    return SeededRng(s);
  }

private:
  std::mt19937_64 eng_;
  uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace morphkit
