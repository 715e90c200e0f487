#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace gefz {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A stream is identified by (master seed, stream index): the seed is the
/// key, the stream index occupies the upper half of the 128-bit counter, and
/// the lower half counts blocks. Streams for different indices never overlap,
/// so per-sample draws are independent of evaluation order.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  std::uint32_t next_u32() noexcept {
    if (pos_ == 4) refill();
    return block_[pos_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform on (0, 1]; never returns 0 so it is safe under log().
  double uniform_open0() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard real normal (Box–Muller, both outputs used in turn).
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open0()));
    const double t = 2.0 * std::numbers::pi * uniform_open0();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  /// Standard complex Gaussian: density e^{-|z|^2}/π, variance 1/2 per
  /// real component, E|ζ|^2 = 1.
  std::complex<double> complex_normal() noexcept {
    const double r = std::sqrt(-std::log(uniform_open0()));
    const double t = 2.0 * std::numbers::pi * uniform_open0();
    return {r * std::cos(t), r * std::sin(t)};
  }

 private:
  void refill() noexcept {
    std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(counter_),
                                     static_cast<std::uint32_t>(counter_ >> 32),
                                     static_cast<std::uint32_t>(stream_),
                                     static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    block_ = ctr;
    pos_ = 0;
    ++counter_;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stream tags keep independent uses of one master seed apart.
enum class StreamTag : std::uint64_t {
  kGefSample = 0,
  kReference = 1ull << 56,
  kBootstrap = 2ull << 56,
  kPairs = 3ull << 56,
  kConfigurations = 4ull << 56,
};

inline Philox make_stream(std::uint64_t master_seed, StreamTag tag, std::uint64_t index) {
  return Philox(master_seed, static_cast<std::uint64_t>(tag) | index);
}

}  // namespace gefz
