#pragma once

// Counter-based random streams built on Philox4x32-10 (Salmon et al.,
// "Parallel random numbers: as easy as 1, 2, 3", SC'11).  A stream is a pure
// function of (seed, stream_id, position), so independent substreams can be
// generated in any order, on any thread, with identical results.

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace otoc {

namespace detail {

struct philox_block {
  uint32_t x[4];
};

inline philox_block philox4x32_10(uint64_t counter_hi, uint64_t counter_lo,
                                  uint64_t key64) {
  uint32_t c0 = static_cast<uint32_t>(counter_lo);
  uint32_t c1 = static_cast<uint32_t>(counter_lo >> 32);
  uint32_t c2 = static_cast<uint32_t>(counter_hi);
  uint32_t c3 = static_cast<uint32_t>(counter_hi >> 32);
  uint32_t k0 = static_cast<uint32_t>(key64);
  uint32_t k1 = static_cast<uint32_t>(key64 >> 32);

  constexpr uint32_t M0 = 0xD2511F53u;
  constexpr uint32_t M1 = 0xCD9E8D57u;
  constexpr uint32_t W0 = 0x9E3779B9u;
  constexpr uint32_t W1 = 0xBB67AE85u;

  for (int round = 0; round < 10; ++round) {
    uint64_t p0 = static_cast<uint64_t>(M0) * c0;
    uint64_t p1 = static_cast<uint64_t>(M1) * c2;
    uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
    uint32_t lo0 = static_cast<uint32_t>(p0);
    uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
    uint32_t lo1 = static_cast<uint32_t>(p1);
    uint32_t n0 = hi1 ^ c1 ^ k0;
    uint32_t n1 = lo1;
    uint32_t n2 = hi0 ^ c3 ^ k1;
    uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
    k0 += W0;
    k1 += W1;
  }
  return philox_block{{c0, c1, c2, c3}};
}

} // namespace detail

// One independent substream.  The 128-bit counter is (stream_id : position),
// the key is the global seed, so (seed, stream_id) fully determines the
// sequence regardless of which thread consumes it.
class RandomStream {
public:
  RandomStream(uint64_t seed, uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), position_(0), buffered_(0),
        have_gauss_(false), gauss_(0.0) {}

  uint32_t next_u32() {
    if (buffered_ == 0) {
      block_ = detail::philox4x32_10(stream_id_, position_++, seed_);
      buffered_ = 4;
    }
    return block_.x[4 - buffered_--];
  }

  uint64_t next_u64() {
    uint64_t hi = next_u32();
    uint64_t lo = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer on [0, bound) by rejection; bound must be positive.
  uint64_t uniform_below(uint64_t bound) {
    if (bound == 0) {
      throw std::invalid_argument("uniform_below: bound must be positive");
    }
    uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    for (;;) {
      uint64_t v = next_u64();
      if (v < limit) {
        return v % bound;
      }
    }
  }

  // Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (have_gauss_) {
      have_gauss_ = false;
      return gauss_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 == 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    gauss_ = r * std::sin(theta);
    have_gauss_ = true;
    return r * std::cos(theta);
  }

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_id_; }

private:
  uint64_t seed_;
  uint64_t stream_id_;
  uint64_t position_;
  detail::philox_block block_{};
  int buffered_;
  bool have_gauss_;
  double gauss_;
};

// Derives a child stream id from a parent scope: used to give every snapshot,
// repetition, or unitary its own substream without coordination.
inline uint64_t substream_id(uint64_t scope, uint64_t index) {
  // SplitMix64-style mix keeps distinct (scope, index) pairs well separated.
  uint64_t z = scope + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

} // namespace otoc
