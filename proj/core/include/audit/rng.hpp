#pragma once

// Counter-based random numbers.
//
// Every consumer draws from a Philox4x32-10 stream addressed by
// (seed, stream id).  A stream id packs an 8-bit purpose tag and a 56-bit
// index (case number, bootstrap replicate, ...), so the draws made for one
// item never depend on how many draws were made for any other item.  This is
// what lets dataset generation and bootstrap replicates run in any order or
// on any number of threads and still produce identical output.

#include <array>
#include <cstdint>
#include <limits>

namespace audit {

struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  /// Ten-round Philox bijection of one 128-bit counter block.
  static Counter block(Counter ctr, Key key) noexcept;
};

enum class StreamTag : std::uint8_t {
  Generic = 0,
  Defendant = 1,
  Case = 2,
  Judge = 3,
  Court = 4,
  CrimeType = 5,
  Bootstrap = 6,
  Restart = 7,
  Attorney = 8,
  Simulation = 9,
};

constexpr std::uint64_t make_stream(StreamTag tag, std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(tag) << 56) | (index & ((std::uint64_t{1} << 56) - 1));
}

/// Sequential generator over one Philox stream.
///
/// Satisfies UniformRandomBitGenerator, but the toolkit only uses its own
/// distribution helpers below so results do not depend on the standard
/// library's distribution implementations.
class CounterRng {
public:
  using result_type = std::uint32_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next_u32(); }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Uniform integer in [0, n); n must be positive.  Unbiased (rejection).
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Poisson draw by inversion; intended for small means.
  std::uint64_t poisson(double mean) noexcept;

private:
  void refill() noexcept;

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace audit
