#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "brw/rng.hpp"

using namespace brw;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors published with the Random123 library.
  static_assert(philox4x32({0, 0, 0, 0}, {0, 0}) ==
                Counter128{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        Counter128{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        Counter128{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("batched philox is bit-identical to the scalar rounds") {
  for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 9u, 17u, 64u, 1001u}) {
    std::vector<std::uint32_t> c0(n), c1(n), c2(n), c3(n);
    for (std::size_t i = 0; i < n; ++i) {
      c0[i] = static_cast<std::uint32_t>(i * 2654435761u);
      c1[i] = static_cast<std::uint32_t>(i);
      c2[i] = 0xdeadbeefu ^ static_cast<std::uint32_t>(i << 7);
      c3[i] = static_cast<std::uint32_t>(n - i);
    }
    auto d0 = c0, d1 = c1, d2 = c2, d3 = c3;
    const PhiloxKey key{0x12345678u, 0x9abcdef0u};
    philox4x32_batch(d0.data(), d1.data(), d2.data(), d3.data(), n, key);
    for (std::size_t i = 0; i < n; ++i) {
      const Counter128 r = philox4x32({c0[i], c1[i], c2[i], c3[i]}, key);
      REQUIRE(r == Counter128{d0[i], d1[i], d2[i], d3[i]});
    }
  }
}

TEST_CASE("counter streams are reproducible and distinct") {
  CounterRng a(7, StreamTag::tree, 3), b(7, StreamTag::tree, 3);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  std::set<std::uint64_t> firsts;
  for (std::uint64_t idx = 0; idx < 100; ++idx)
    for (auto tag : {StreamTag::tree, StreamTag::normals, StreamTag::props})
      firsts.insert(CounterRng(7, tag, idx).next_u64());
  CHECK(firsts.size() == 300);
  CHECK(CounterRng(7, StreamTag::tree, 0).next_u64() != CounterRng(8, StreamTag::tree, 0).next_u64());
  CHECK(CounterRng(7, StreamTag::tree, 0, 1).next_u64() != CounterRng(7, StreamTag::tree, 0, 0).next_u64());
}

TEST_CASE("uniform draws lie in (0, 1] with the right moments") {
  CHECK(u64_to_open_unit(0) > 0.0);
  CHECK(u64_to_open_unit(~std::uint64_t{0}) == 1.0);
  CounterRng rng(1, StreamTag::synthetic, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
    s += u;
    s2 += u * u;
  }
  CHECK(std::abs(s / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(s2 / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal draws have unit variance and zero mean") {
  CounterRng rng(2, StreamTag::synthetic, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 0.1);
}

TEST_CASE("below is uniform over its range") {
  CounterRng rng(3, StreamTag::synthetic, 0);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int c : counts) CHECK(std::abs(c - n / 7) < 5.0 * std::sqrt(n / 7.0));
}
