#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pevgrid {

/// Seed for the named sub-stream `name` of `master`. Streams with different
/// names are independent, so adding a consumer never shifts another's draws.
std::uint64_t substream_seed(std::uint64_t master, std::string_view name);

/// Portable random stream: mt19937_64 with its own uniform mapping, so the
/// sequence does not depend on the standard library's distributions.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t master, std::string_view name) : engine_(substream_seed(master, name)) {}

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pevgrid
