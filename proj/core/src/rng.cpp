#include "fetalchd/rng.hpp"

#include <cmath>

namespace fetalchd {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  std::uint64_t state = base;
  std::uint64_t out = splitmix64(state);
  state ^= a;
  out ^= splitmix64(state);
  state ^= b;
  out ^= splitmix64(state);
  state ^= c;
  out ^= splitmix64(state);
  return out;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u clamped away from 0 so log() stays finite.
  double u = uniform();
  if (u < 1e-300) u = 1e-300;
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  const double theta = 2.0 * M_PI * v;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace fetalchd
