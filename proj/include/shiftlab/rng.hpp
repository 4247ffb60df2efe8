#ifndef SHIFTLAB_RNG_HPP
#define SHIFTLAB_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace shiftlab {

/// Philox4x32-10 counter-based block function. Maps a 128-bit counter and a
/// 64-bit key to 128 pseudo-random bits; there is no hidden state, so any
/// (counter, key) can be evaluated independently and in any order.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Reproducible random stream keyed by (seed, replication, substream).
///
/// Keyed draws (`normal_pair(i)`, `uniform(i)`) depend only on the key and
/// the index `i`, so the noise attached to coefficient k is the same no
/// matter how many other draws were made or which worker thread runs the
/// replication. Sequential draws (`next_uniform`, `next_normal`) walk a
/// private cursor in a disjoint part of the counter space.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t replication = 0,
                        std::uint32_t substream = 0) noexcept
      : seed_(seed), replication_(replication), substream_(substream & 0x7FFFFFFFu) {}

  /// Same seed and replication, different substream.
  RandomStream split(std::uint32_t substream) const noexcept {
    return RandomStream(seed_, replication_, substream);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t replication() const noexcept { return replication_; }
  std::uint32_t substream() const noexcept { return substream_; }

  /// Number of random variates produced so far through this handle.
  std::uint64_t draws() const noexcept { return draws_; }

  /// Two independent standard normals attached to `index`.
  std::array<double, 2> normal_pair(std::uint64_t index) noexcept {
    draws_ += 2;
    return box_muller(raw(index, false));
  }

  /// Uniform on the open interval (0, 1) attached to `index`.
  double uniform(std::uint64_t index) noexcept {
    draws_ += 1;
    return to_open_unit(first_word(raw(index, false)));
  }

  double next_uniform() noexcept {
    draws_ += 1;
    return to_open_unit(first_word(raw(cursor_++, true)));
  }

  double next_normal() noexcept {
    draws_ += 1;
    return box_muller(raw(cursor_++, true))[0];
  }

 private:
  Philox4x32::Counter raw(std::uint64_t index, bool sequential) const noexcept {
    const Philox4x32::Counter ctr = {
        static_cast<std::uint32_t>(replication_),
        static_cast<std::uint32_t>(replication_ >> 32),
        static_cast<std::uint32_t>(index),
        (substream_ << 1) | (sequential ? 1u : 0u)};
    const Philox4x32::Key key = {static_cast<std::uint32_t>(seed_),
                                 static_cast<std::uint32_t>(seed_ >> 32)};
    return Philox4x32::block(ctr, key);
  }

  static std::uint64_t first_word(const Philox4x32::Counter& c) noexcept {
    return (std::uint64_t{c[0]} << 32) | c[1];
  }

  static std::uint64_t second_word(const Philox4x32::Counter& c) noexcept {
    return (std::uint64_t{c[2]} << 32) | c[3];
  }

  // 53-bit mantissa shifted by half an ulp: never 0, never 1.
  static double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  static std::array<double, 2> box_muller(const Philox4x32::Counter& c) noexcept {
    const double u1 = to_open_unit(first_word(c));
    const double u2 = to_open_unit(second_word(c));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(angle), r * std::sin(angle)};
  }

  std::uint64_t seed_;
  std::uint64_t replication_;
  std::uint32_t substream_;
  std::uint64_t cursor_ = 0;
  std::uint64_t draws_ = 0;
};

}  // namespace shiftlab

#endif
