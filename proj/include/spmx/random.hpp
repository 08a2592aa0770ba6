#pragma once

#include <array>
#include <cstdint>

namespace spmx {

// Philox4x32-10 counter-based generator. A stream is identified by
// (seed, stream id); draws within a stream advance a private counter, so any
// number of streams can be consumed in any order or in parallel with
// identical results.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;
  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept;
  // Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal() noexcept;
  // Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) noexcept;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> buffer_{};
  unsigned used_ = 4;
};

// Poisson variate: inversion for lambda < 10, PTRS transformed rejection for
// 10 <= lambda < 1000, continuity-corrected normal approximation above.
std::uint64_t sample_poisson(double lambda, PhiloxStream& rng) noexcept;

}  // namespace spmx
