#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "poclab/rng.hpp"

using namespace poclab;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors published with the Random123 suite.
  const auto zero = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  CHECK(zero == std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du,
                                             0xbc57ac4cu, 0x9b00dbd8u});
  const auto ones = Philox4x32::block(
      {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
      {0xffffffffu, 0xffffffffu});
  CHECK(ones == std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu,
                                             0xa20bc7c6u, 0x6d5451fdu});
  const auto pi = Philox4x32::block(
      {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
      {0xa4093822u, 0x299f31d0u});
  CHECK(pi == std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu,
                                           0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and keyed access matches sequence") {
  RngStream a(42, Stream::scratch, 7);
  RngStream b(42, Stream::scratch, 7);
  for (int k = 0; k < 100; ++k) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, Stream::scratch, 7);
  std::vector<double> seq;
  for (int k = 0; k < 16; ++k) seq.push_back(c.normal());
  RngStream d(42, Stream::scratch, 7);
  for (int k = 0; k < 16; ++k)
    CHECK(d.normal_at(static_cast<std::uint64_t>(k)) == seq[k]);
}

TEST_CASE("distinct streams and seeds do not collide") {
  std::set<std::uint64_t> firsts;
  for (std::uint32_t sub = 0; sub < 32; ++sub)
    firsts.insert(RngStream(1, Stream::service, sub).next_u64());
  for (std::uint32_t sub = 0; sub < 32; ++sub)
    firsts.insert(RngStream(1, Stream::dedicated_arrival, sub).next_u64());
  for (std::uint64_t seed = 0; seed < 32; ++seed)
    firsts.insert(RngStream(seed, Stream::theta).next_u64());
  CHECK(firsts.size() == 96);

  std::set<std::uint64_t> derived;
  for (std::uint64_t d = 0; d < 8; ++d)
    for (std::uint64_t i = 0; i < 64; ++i) derived.insert(derive_seed(9, d, i));
  CHECK(derived.size() == 512);
}

TEST_CASE("uniform, exponential and normal draws have the right moments") {
  RngStream rng(2024, Stream::scratch);
  const int draws = 200000;
  double usum = 0.0, umin = 1.0, umax = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double u = rng.uniform();
    usum += u;
    umin = std::min(umin, u);
    umax = std::max(umax, u);
  }
  CHECK(umin > 0.0);
  CHECK(umax < 1.0);
  CHECK(std::abs(usum / draws - 0.5) < 0.005);

  RngStream erng(2025, Stream::scratch);
  double esum = 0.0;
  for (int k = 0; k < draws; ++k) esum += erng.exponential(2.0);
  CHECK(std::abs(esum / draws - 0.5) < 0.005);
  CHECK(erng.exponential(0.0) == std::numeric_limits<double>::infinity());

  RngStream nrng(2026, Stream::scratch);
  double nsum = 0.0, nsq = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double z = nrng.normal();
    nsum += z;
    nsq += z * z;
  }
  const double mean = nsum / draws;
  const double var = nsq / draws - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}
