#pragma once

// Batched elementary functions for the simulator's hot loops.
//
// On x86-64 builds with AVX-512 or AVX2 enabled these call glibc's libmvec
// vector variants directly (link with -lmvec); otherwise they fall back to the
// scalar <cmath> functions. Every element goes through the same code path
// regardless of its position in the batch, so results only depend on the
// input values.

#include <cmath>
#include <cstddef>
#include <span>

#if defined(__x86_64__) && (defined(__AVX512F__) || defined(__AVX2__)) && \
    !defined(BRW_NO_MVEC)
#include <immintrin.h>
#define BRW_HAVE_MVEC 1
#endif

namespace brw::vec {

#if defined(BRW_HAVE_MVEC)
#if defined(__AVX512F__)
extern "C" {
__m512d _ZGVeN8v_exp(__m512d);
__m512d _ZGVeN8v_log(__m512d);
__m512d _ZGVeN8v_sin(__m512d);
__m512d _ZGVeN8v_cos(__m512d);
}
namespace detail {
inline constexpr std::size_t kWidth = 8;
using vd = __m512d;
inline vd load(const double* p) { return _mm512_loadu_pd(p); }
inline void store(double* p, vd v) { _mm512_storeu_pd(p, v); }
inline vd vexp(vd v) { return _ZGVeN8v_exp(v); }
inline vd vlog(vd v) { return _ZGVeN8v_log(v); }
inline vd vsin(vd v) { return _ZGVeN8v_sin(v); }
inline vd vcos(vd v) { return _ZGVeN8v_cos(v); }
}  // namespace detail
#else
extern "C" {
__m256d _ZGVdN4v_exp(__m256d);
__m256d _ZGVdN4v_log(__m256d);
__m256d _ZGVdN4v_sin(__m256d);
__m256d _ZGVdN4v_cos(__m256d);
}
namespace detail {
inline constexpr std::size_t kWidth = 4;
using vd = __m256d;
inline vd load(const double* p) { return _mm256_loadu_pd(p); }
inline void store(double* p, vd v) { _mm256_storeu_pd(p, v); }
inline vd vexp(vd v) { return _ZGVdN4v_exp(v); }
inline vd vlog(vd v) { return _ZGVdN4v_log(v); }
inline vd vsin(vd v) { return _ZGVdN4v_sin(v); }
inline vd vcos(vd v) { return _ZGVdN4v_cos(v); }
}  // namespace detail
#endif

namespace detail {
template <class F>
inline void apply(std::span<const double> in, std::span<double> out, F f) {
  const std::size_t n = in.size();
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) store(out.data() + i, f(load(in.data() + i)));
  if (i < n) {
    // Tail goes through the vector routine too (padded with 0).
    alignas(64) double buf[kWidth] = {};
    for (std::size_t j = i; j < n; ++j) buf[j - i] = in[j];
    store(buf, f(load(buf)));
    for (std::size_t j = i; j < n; ++j) out[j] = buf[j - i];
  }
}
}  // namespace detail

inline void exp(std::span<const double> in, std::span<double> out) {
  detail::apply(in, out, detail::vexp);
}
inline void log(std::span<const double> in, std::span<double> out) {
  detail::apply(in, out, detail::vlog);
}
inline void sin(std::span<const double> in, std::span<double> out) {
  detail::apply(in, out, detail::vsin);
}
inline void cos(std::span<const double> in, std::span<double> out) {
  detail::apply(in, out, detail::vcos);
}

inline constexpr bool accelerated = true;

#else

inline void exp(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
}
inline void log(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::log(in[i]);
}
inline void sin(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::sin(in[i]);
}
inline void cos(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::cos(in[i]);
}

inline constexpr bool accelerated = false;

#endif

// Fixed-order sums over kLanes interleaved accumulators: vectorizable and
// deterministic for a given input length.
inline constexpr std::size_t kLanes = 8;

inline double fold_lanes(const double* acc) {
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

inline double sum(const double* __restrict x, std::size_t n) {
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += x[i + l];
  for (std::size_t l = 0; i < n; ++i, ++l) acc[l] += x[i];
  return fold_lanes(acc);
}

inline double dot(const double* __restrict x, const double* __restrict y, std::size_t n) {
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += x[i + l] * y[i + l];
  for (std::size_t l = 0; i < n; ++i, ++l) acc[l] += x[i] * y[i];
  return fold_lanes(acc);
}

}  // namespace brw::vec
