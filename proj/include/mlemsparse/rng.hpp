#pragma once

// Counter-based random numbers (Philox4x32-10) and a Poisson sampler built
// only on them, so a (seed, stream) pair reproduces the same draws
// regardless of thread scheduling.

#include <array>
#include <cstdint>

namespace mlemsparse::rng {

using Block = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

/// Ten rounds of the Philox 4x32 bijection.
Block philox4x32_10(Block counter, Key key);

/// Uniform stream keyed by seed; the stream identifier occupies the two
/// high counter words and the draw index the two low ones.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in (0, 1).
  double uniform_open();

 private:
  void refill();

  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  Block buffer_{};
  int used_ = 4;
};

/// Poisson(mean) draw: sequential inversion for mean < 10, Hormann's PTRS
/// transformed rejection otherwise.
std::uint64_t poisson(CounterStream& stream, double mean);

/// Stream identifier combining two 32-bit labels (e.g. dose and trial).
constexpr std::uint64_t stream_id(std::uint32_t hi, std::uint32_t lo) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

}  // namespace mlemsparse::rng
