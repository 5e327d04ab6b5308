#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace poclab {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// A block is a pure function of (counter, key), so any draw can be
// regenerated from its coordinates alone.
struct Philox4x32 {
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Replication seeds: disjoint deterministic streams per (master, domain, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t domain,
                                 std::uint64_t index) {
  return splitmix64(master ^ splitmix64(domain ^ splitmix64(index)));
}

// Named streams hanging off one master seed.
enum class Stream : std::uint32_t {
  lbs_arrival = 1,
  theta = 2,
  initial_residual = 3,
  dedicated_arrival = 16,  // substream = server index
  service = 17,            // substream = server index
  sde_noise = 32,          // substream = coordinate, index = step
  sde_shuffle = 33,
  scratch = 64,
};

// A sequential view of one named stream. Draw i of stream (seed, s, sub) is
// the Philox block at counter (i, s, sub), so streams never overlap and a
// stream can be replayed from any index.
class RngStream {
 public:
  RngStream(std::uint64_t seed, Stream stream, std::uint32_t substream = 0)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_(static_cast<std::uint32_t>(stream)),
        substream_(substream) {}

  std::array<std::uint32_t, 4> block_at(std::uint64_t idx) const {
    return Philox4x32::block({static_cast<std::uint32_t>(idx),
                              static_cast<std::uint32_t>(idx >> 32), stream_,
                              substream_},
                             key_);
  }

  std::uint64_t next_u64() {
    const auto b = block_at(idx_++);
    return lo64(b);
  }

  // Strictly inside (0, 1).
  double uniform() { return to_unit(lo64(block_at(idx_++))); }

  double exponential(double rate) {
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform()) / rate;
  }

  // One standard normal per counter (Box-Muller on the two 64-bit halves
  // of a single block), so coupled integrations share noise bit-exactly.
  double normal() { return normal_at(idx_++); }

  double normal_at(std::uint64_t idx) const {
    const auto b = block_at(idx);
    const double u1 = to_unit(lo64(b));
    const double u2 = to_unit(hi64(b));
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t index() const { return idx_; }
  void seek(std::uint64_t idx) { idx_ = idx; }

 private:
  static std::uint64_t lo64(const std::array<std::uint32_t, 4>& b) {
    return static_cast<std::uint64_t>(b[0]) |
           (static_cast<std::uint64_t>(b[1]) << 32);
  }
  static std::uint64_t hi64(const std::array<std::uint32_t, 4>& b) {
    return static_cast<std::uint64_t>(b[2]) |
           (static_cast<std::uint64_t>(b[3]) << 32);
  }
  static double to_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_;
  std::uint32_t substream_;
  std::uint64_t idx_ = 0;
};

// N(0, dt) increment for coordinate `coord` at step `step`.
inline double gaussian_increment(std::uint64_t seed, std::uint32_t coord,
                                 std::uint64_t step, double dt) {
  return std::sqrt(dt) *
         RngStream(seed, Stream::sde_noise, coord).normal_at(step);
}

}  // namespace poclab
