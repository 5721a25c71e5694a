#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fetalchd {

/// SplitMix64 step, used to derive independent seed streams from a master
/// seed. Standard constants from Steele et al.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derives a child seed from a base seed and up to three stream tags.
/// Same inputs always give the same child seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

/// Deterministic random source. mt19937_64 supplies the bits; the value
/// transforms live here so draws do not depend on libstdc++ distribution
/// internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Inclusive integer range.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen_() % span);
  }

  /// Standard normal via Box-Muller (pair cached).
  double normal();

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(0, static_cast<int>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fetalchd
