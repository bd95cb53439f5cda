#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace nsamc {

/// Identifies one independent random stream. Dropout masks use
/// (seed, point, decoder layer, sample); other consumers pick a reserved
/// layer index from `StreamDomain` so their streams never collide with masks.
struct RngStreamKey {
  std::uint64_t global_seed = 0;
  std::uint32_t point_index = 0;
  std::uint32_t layer_index = 0;
  std::uint32_t sample_index = 0;

  friend bool operator==(const RngStreamKey&, const RngStreamKey&) = default;
};

namespace StreamDomain {
inline constexpr std::uint32_t kInit = 0x10000000u;
inline constexpr std::uint32_t kScene = 0x20000000u;
inline constexpr std::uint32_t kBlocks = 0x30000000u;
inline constexpr std::uint32_t kShuffle = 0x40000000u;
inline constexpr std::uint32_t kMisc = 0x50000000u;
}  // namespace StreamDomain

/// Philox4x32-10 counter-based generator. The key words come from the global
/// seed, the first three counter words from the stream key, and the last
/// counter word enumerates 128-bit blocks within the stream.
class RngStream {
 public:
  using result_type = std::uint32_t;

  explicit RngStream(const RngStreamKey& key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u32(); }

  std::uint32_t next_u32() {
    if (cursor_ == 4) refill();
    return buffer_[static_cast<std::size_t>(cursor_++)];
  }
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  /// True with probability `prob`; consumes exactly one 32-bit draw.
  bool bernoulli(double prob) { return next_u32() < bernoulli_threshold(prob); }
  /// 2^-32 quantized threshold used by bernoulli().
  static std::uint64_t bernoulli_threshold(double prob);
  /// Uniform integer in [0, bound), bound > 0.
  std::uint64_t below(std::uint64_t bound);

  const RngStreamKey& key() const { return key_; }

 private:
  void refill();

  RngStreamKey key_;
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int cursor_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

RngStream derive_rng_stream(const RngStreamKey& key);

/// Raw Philox4x32-10 bijection, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

}  // namespace nsamc
