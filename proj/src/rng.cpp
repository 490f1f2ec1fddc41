#include "advlab/rng.hpp"

#include <cmath>

#include "advlab/errors.hpp"

namespace advlab {

uint64_t fnv1a64(const void* bytes, size_t len, uint64_t basis) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  uint64_t h = basis;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(uint64_t seed, std::string_view purpose) {
  uint64_t mix = seed ^ fnv1a64(purpose.data(), purpose.size());
  for (auto& s : s_) s = splitmix64(mix);
}

uint64_t RngStream::next_u64() {
  uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::open_unit() {
  // (next_u64() >> 11) + 1 lies in [1, 2^53], so the result is in (0, 1].
  // Mirror down from 1 to land strictly inside (0, 1).
  double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  return u;
}

float RngStream::gaussian(float mean, float stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  // Box-Muller on explicit uniform bits; no stdlib distributions so the
  // sequence is pinned by this code alone.
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * 3.14159265358979323846 * u2;
  spare_ = static_cast<float>(r * std::sin(a));
  has_spare_ = true;
  return mean + stddev * static_cast<float>(r * std::cos(a));
}

uint32_t RngStream::uniform_int(uint32_t bound) {
  if (bound == 0) throw ConfigError("uniform_int bound must be positive");
  return static_cast<uint32_t>(
      (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

}  // namespace advlab
