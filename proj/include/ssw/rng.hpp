#ifndef SSW_RNG_HPP
#define SSW_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace ssw {

/// Stream roles used to key independent substreams.
enum class StreamRole : std::uint32_t { Design = 1, Effects = 2, Outcomes = 3, Assignment = 4, Bootstrap = 5 };

/// Philox4x32-10 counter-based generator. The key is derived from
/// (seed, replicate, role) so every substream is reproducible on its own.
class Philox {
 public:
  using result_type = std::uint64_t;

  Philox(std::uint64_t seed, std::uint64_t replicate, StreamRole role) {
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    counter_ = {0u, 0u, static_cast<std::uint32_t>(replicate),
                static_cast<std::uint32_t>(replicate >> 32) ^ (static_cast<std::uint32_t>(role) << 24)};
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (used_ >= 2) refill();
    const result_type out = (static_cast<result_type>(block_[2 * used_]) << 32) | block_[2 * used_ + 1];
    ++used_;
    return out;
  }

  /// Uniform on (0, 1), never exactly 0.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }
  double normal() {
    // Box-Muller; pairs are not cached so the draw count per call is fixed.
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
  }
  int bernoulli(double p) { return uniform() < p ? 1 : 0; }
  /// Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
    if (span == 0) return static_cast<std::int64_t>((*this)());
    const std::uint64_t limit = max() - (max() % span + 1) % span;
    std::uint64_t draw;
    do {
      draw = (*this)();
    } while (draw > limit);
    return lo + static_cast<std::int64_t>(draw % span);
  }

  /// One Philox4x32-10 bijection of `ctr` under `key`.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

 private:
  void refill() {
    block_ = block(counter_, key_);
    used_ = 0;
    if (++counter_[0] == 0) ++counter_[1];
  }

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 2;
};

}  // namespace ssw

#endif  // SSW_RNG_HPP
