#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace qpol {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
///
/// A block is a pure function of (key, counter), so any element of any stream
/// can be produced without touching shared state.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// SplitMix64 finalizer; used to fold structured indices into a 64-bit key.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derive an independent seed for sub-experiment `index` of `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) ^ mix64(index + 0x632BE59BD9B4E019ull));
}

/// UniformRandomBitGenerator over one Philox substream.
///
/// Key = seed, counter = (position, stream). Two generators with the same
/// (seed, stream) emit identical sequences regardless of creation order.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (lane_ == 0) {
      const Philox4x32::Counter ctr{static_cast<std::uint32_t>(position_),
                                    static_cast<std::uint32_t>(position_ >> 32),
                                    static_cast<std::uint32_t>(stream_),
                                    static_cast<std::uint32_t>(stream_ >> 32)};
      buffer_ = Philox4x32::block(ctr, key_);
      ++position_;
    }
    const result_type out =
        (std::uint64_t{buffer_[2 * lane_ + 1]} << 32) | std::uint64_t{buffer_[2 * lane_]};
    lane_ ^= 1;
    return out;
  }

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
  Philox4x32::Counter buffer_{};
  unsigned lane_ = 0;
};

}  // namespace qpol
