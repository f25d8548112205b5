#pragma once

// Counter-based random numbers.
//
// Every random quantity in the library is a pure function of a 64-bit key and
// a 128-bit counter, so results never depend on thread scheduling or on the
// order in which replicas or tree nodes are visited.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

namespace brw {

using Counter128 = std::array<std::uint32_t, 4>;

struct PhiloxKey {
  std::uint32_t k0 = 0;
  std::uint32_t k1 = 0;
};

namespace philox_detail {
inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
}  // namespace philox_detail

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Scalar reference; the
/// simulator runs the same rounds over structure-of-arrays batches.
inline constexpr Counter128 philox4x32(Counter128 c, PhiloxKey key) {
  using namespace philox_detail;
  std::uint32_t k0 = key.k0, k1 = key.k1;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0, static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1, static_cast<std::uint32_t>(p0)};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return c;
}

namespace philox_detail {

inline void batch_scalar(std::uint32_t* __restrict c0, std::uint32_t* __restrict c1,
                         std::uint32_t* __restrict c2, std::uint32_t* __restrict c3,
                         std::size_t n, PhiloxKey key) {
  for (std::size_t i = 0; i < n; ++i) {
    const Counter128 r = philox4x32({c0[i], c1[i], c2[i], c3[i]}, key);
    c0[i] = r[0];
    c1[i] = r[1];
    c2[i] = r[2];
    c3[i] = r[3];
  }
}

#if defined(__AVX512F__)
// Eight counters per vector, one per 64-bit lane, so _mm512_mul_epu32 yields
// the full 32x32->64 products. Four independent vectors are interleaved to
// hide the multiply latency.
inline std::size_t batch_simd(std::uint32_t* c0, std::uint32_t* c1, std::uint32_t* c2,
                              std::uint32_t* c3, std::size_t n, PhiloxKey key) {
  constexpr int U = 4;
  const __m512i m0 = _mm512_set1_epi64(kMul0), m1 = _mm512_set1_epi64(kMul1);
  const __m512i lo32 = _mm512_set1_epi64(0xFFFFFFFFull);
  std::size_t i = 0;
  for (; i + 8 * U <= n; i += 8 * U) {
    __m512i x0[U], x1[U], x2[U], x3[U];
    auto ld = [&](const std::uint32_t* p, int u) {
      return _mm512_cvtepu32_epi64(
          _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i + 8 * u)));
    };
    for (int u = 0; u < U; ++u) {
      x0[u] = ld(c0, u);
      x1[u] = ld(c1, u);
      x2[u] = ld(c2, u);
      x3[u] = ld(c3, u);
    }
    std::uint32_t k0 = key.k0, k1 = key.k1;
    for (int r = 0; r < 10; ++r) {
      const __m512i vk0 = _mm512_set1_epi64(k0), vk1 = _mm512_set1_epi64(k1);
      for (int u = 0; u < U; ++u) {
        const __m512i p0 = _mm512_mul_epu32(x0[u], m0);
        const __m512i p1 = _mm512_mul_epu32(x2[u], m1);
        const __m512i y0 = _mm512_ternarylogic_epi64(_mm512_srli_epi64(p1, 32), x1[u], vk0, 0x96);
        const __m512i y2 = _mm512_ternarylogic_epi64(_mm512_srli_epi64(p0, 32), x3[u], vk1, 0x96);
        x1[u] = _mm512_and_si512(p1, lo32);
        x3[u] = _mm512_and_si512(p0, lo32);
        x0[u] = y0;
        x2[u] = y2;
      }
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    auto st = [&](std::uint32_t* p, int u, __m512i v) {
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(p + i + 8 * u), _mm512_cvtepi64_epi32(v));
    };
    for (int u = 0; u < U; ++u) {
      st(c0, u, x0[u]);
      st(c1, u, x1[u]);
      st(c2, u, x2[u]);
      st(c3, u, x3[u]);
    }
  }
  return i;
}
#elif defined(__AVX2__)
inline std::size_t batch_simd(std::uint32_t* c0, std::uint32_t* c1, std::uint32_t* c2,
                              std::uint32_t* c3, std::size_t n, PhiloxKey key) {
  const __m256i m0 = _mm256_set1_epi64x(kMul0), m1 = _mm256_set1_epi64x(kMul1);
  const __m256i lo32 = _mm256_set1_epi64x(0xFFFFFFFFll);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    auto ld = [&](std::uint32_t* p) {
      return _mm256_cvtepu32_epi64(_mm_loadu_si128(reinterpret_cast<const __m128i*>(p + i)));
    };
    __m256i x0 = ld(c0), x1 = ld(c1), x2 = ld(c2), x3 = ld(c3);
    std::uint32_t k0 = key.k0, k1 = key.k1;
    for (int r = 0; r < 10; ++r) {
      const __m256i p0 = _mm256_mul_epu32(x0, m0);
      const __m256i p1 = _mm256_mul_epu32(x2, m1);
      const __m256i y0 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p1, 32), x1),
                                          _mm256_set1_epi64x(k0));
      const __m256i y2 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p0, 32), x3),
                                          _mm256_set1_epi64x(k1));
      x1 = _mm256_and_si256(p1, lo32);
      x3 = _mm256_and_si256(p0, lo32);
      x0 = y0;
      x2 = y2;
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    auto st = [&](std::uint32_t* p, __m256i v) {
      // Gather the low dwords of the four 64-bit lanes.
      const __m256i packed =
          _mm256_permutevar8x32_epi32(v, _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0));
      _mm_storeu_si128(reinterpret_cast<__m128i*>(p + i), _mm256_castsi256_si128(packed));
    };
    st(c0, x0);
    st(c1, x1);
    st(c2, x2);
    st(c3, x3);
  }
  return i;
}
#else
inline std::size_t batch_simd(std::uint32_t*, std::uint32_t*, std::uint32_t*, std::uint32_t*,
                              std::size_t, PhiloxKey) {
  return 0;
}
#endif

}  // namespace philox_detail

/// Philox over structure-of-arrays counters, in place. Bit-identical to the
/// scalar philox4x32 on every element.
inline void philox4x32_batch(std::uint32_t* c0, std::uint32_t* c1, std::uint32_t* c2,
                             std::uint32_t* c3, std::size_t n, PhiloxKey key) {
  const std::size_t done = philox_detail::batch_simd(c0, c1, c2, c3, n, key);
  philox_detail::batch_scalar(c0 + done, c1 + done, c2 + done, c3 + done, n - done, key);
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Stream purposes. Distinct tags give statistically independent families of
/// streams under the same master seed.
enum class StreamTag : std::uint64_t {
  tree = 1,
  reference_tree = 2,
  series_tips = 3,
  series_copies = 4,
  normals = 5,
  permutation = 6,
  rotation = 7,
  props = 8,
  model_mc = 9,
  synthetic = 10,
  boundary_tree = 11,
};

inline constexpr PhiloxKey derive_key(std::uint64_t master_seed, StreamTag tag,
                                      std::uint64_t index) {
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ (static_cast<std::uint64_t>(tag) * 0xA24BAED4963EE407ull));
  h = splitmix64(h ^ (index * 0x9FB21C651E98DF25ull + 0x2545F4914F6CDD1Dull));
  return {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
}

/// 53-bit uniform in (0, 1]; never returns 0 so log() is always finite.
inline constexpr double u64_to_open_unit(std::uint64_t x) {
  return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

inline constexpr std::uint64_t join64(std::uint32_t lo, std::uint32_t hi) {
  return std::uint64_t{lo} | (std::uint64_t{hi} << 32);
}

/// Sequential stream over a counter-based generator: successive calls walk the
/// counter, four 32-bit words per Philox block.
class CounterRng {
 public:
  CounterRng() = default;
  CounterRng(PhiloxKey key, std::uint64_t stream_hi = 0) : key_(key) {
    ctr_[2] = static_cast<std::uint32_t>(stream_hi);
    ctr_[3] = static_cast<std::uint32_t>(stream_hi >> 32);
  }
  CounterRng(std::uint64_t master_seed, StreamTag tag, std::uint64_t index,
             std::uint64_t stream_hi = 0)
      : CounterRng(derive_key(master_seed, tag, index), stream_hi) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint32_t lo = next_u32();
    return join64(lo, next_u32());
  }

  /// Uniform on (0, 1].
  double uniform() { return u64_to_open_unit(next_u64()); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  /// Uniform integer in [0, n) by rejection (n > 0).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x < limit) return x % n;
    }
  }

 private:
  void refill() {
    buf_ = philox4x32(ctr_, key_);
    if (++ctr_[0] == 0) ++ctr_[1];
    pos_ = 0;
  }

  PhiloxKey key_{};
  Counter128 ctr_{};
  Counter128 buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace brw
