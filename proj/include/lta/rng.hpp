#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lta {

// Portable random stream. The standard distributions are implementation
// defined, so every draw here goes through mt19937_64 (which is fully
// specified) and our own transforms; datasets and training runs are then
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  double normal();

  // Number of trials up to and including the first success, mean 1/p.
  std::int64_t geometric(double p);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Named substream of a root seed ("data", "init", "noise", "generation").
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

}  // namespace lta
