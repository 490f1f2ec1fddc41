#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace advlab {

uint64_t fnv1a64(const void* bytes, size_t len,
                 uint64_t basis = 1469598103934665603ULL);

// Deterministic, purpose-keyed random stream (xoshiro256++ seeded through
// splitmix64). The same (seed, purpose) pair replays the same sequence on
// any platform; different purposes sharing a seed are decorrelated. Streams
// are single-consumer: concurrent workers each own their own stream.
class RngStream {
 public:
  RngStream(uint64_t seed, std::string_view purpose);

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double open_unit();                    // (0, 1)
  float gaussian(float mean, float stddev);
  uint32_t uniform_int(uint32_t bound);  // [0, bound), bound > 0

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(static_cast<uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t s_[4];
  bool has_spare_ = false;
  float spare_ = 0.0f;
};

}  // namespace advlab
