#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "pklab/vec.hpp"

namespace pklab {

// Philox 4x32, 10 rounds. Counter-based: block(key, counter) is a pure
// function, so any (stream, draw) pair can be generated independently of
// scheduling order. Constants are the published ones.
struct Philox4x32 {
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 2> key,
                                            std::array<std::uint32_t, 4> ctr) {
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = std::uint64_t(kM0) * ctr[0];
      std::uint64_t p1 = std::uint64_t(kM1) * ctr[2];
      std::uint32_t lo0 = std::uint32_t(p0), hi0 = std::uint32_t(p0 >> 32);
      std::uint32_t lo1 = std::uint32_t(p1), hi1 = std::uint32_t(p1 >> 32);
      ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
      k0 += kW0;
      k1 += kW1;
    }
    return ctr;
  }
};

// One logical random stream, keyed by (masterSeed, streamId). Identical
// inputs give an identical draw sequence regardless of what other streams
// exist or how work is scheduled across threads.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : key_{std::uint32_t(master_seed), std::uint32_t(master_seed >> 32)},
        stream_id_(stream_id) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform on the unit sphere S^2.
  Vec3 unit_vector() {
    double z = 2.0 * uniform() - 1.0;
    double phi = 2.0 * M_PI * uniform();
    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
  }

  // Uniform in the unit ball of R^3.
  Vec3 in_unit_ball() {
    double r = std::cbrt(uniform());
    return r * unit_vector();
  }

 private:
  void refill() {
    buf_ = Philox4x32::block(
        key_, {std::uint32_t(block_), std::uint32_t(block_ >> 32),
               std::uint32_t(stream_id_), std::uint32_t(stream_id_ >> 32)});
    ++block_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_id_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
};

}  // namespace pklab
