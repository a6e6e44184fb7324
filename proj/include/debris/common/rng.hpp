#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace debris {

// Seeded generator whose derived draws are identical on every platform.
// std::*_distribution is implementation-defined, so all transforms live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), rejection sampled. n must be positive.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; the spare value is discarded so the
  // stream position depends only on the number of calls.
  double normal();

  // Index drawn with probability proportional to weights.
  std::size_t weighted(const std::vector<double>& weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

// Stable 64-bit FNV-1a, used to derive seeds from strings.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace debris
