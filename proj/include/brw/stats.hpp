#pragma once

// Statistical tests on complex samples.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "brw/error.hpp"
#include "brw/model.hpp"
#include "brw/rng.hpp"
#include "brw/vecmath.hpp"

namespace brw {

struct TestReport {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
  int resamples = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;
};

inline constexpr int kDefaultResamples = 500;

namespace stats_detail {

inline bool lex_less(const cplx& a, const cplx& b) {
  return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
}

inline std::vector<cplx> canonical(std::vector<cplx> v) {
  std::sort(v.begin(), v.end(), lex_less);
  return v;
}

// Sum of d(z_i, z_j) over i in I, j in J, in a fixed order.
inline double cross_sum(const std::vector<double>& dist, std::size_t n,
                        const std::vector<std::size_t>& I, const std::vector<std::size_t>& J) {
  double s = 0.0;
  for (std::size_t i : I) {
    double row = 0.0;
    const double* d = dist.data() + i * n;
    for (std::size_t j : J) row += d[j];
    s += row;
  }
  return s;
}

}  // namespace stats_detail

/// Two-sample energy test on C = R^2 with a permutation null.
///
/// The statistic is (n_a n_b / (n_a + n_b)) times the V-statistic energy
/// distance. Samples are sorted canonically and the pair is ordered, so equal
/// multisets give exactly 0 and swapping A and B changes nothing.
inline TestReport energy_test(const std::vector<cplx>& a_in, const std::vector<cplx>& b_in,
                              int resamples = kDefaultResamples, std::uint64_t seed = 0) {
  if (a_in.size() < 50 || b_in.size() < 50)
    throw Error(ErrorKind::too_few_samples, "energy_test needs at least 50 samples per side");
  if (resamples < 1) throw Error(ErrorKind::validation, "resamples must be >= 1");
  std::vector<cplx> a = stats_detail::canonical(a_in), b = stats_detail::canonical(b_in);
  if (b.size() < a.size() ||
      (b.size() == a.size() &&
       std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end(), stats_detail::lex_less)))
    std::swap(a, b);
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<cplx> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<double> dist(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = std::abs(pooled[i] - pooled[j]);

  const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
  const double scale = fa * fb / (fa + fb);
  auto energy = [&](double s_ab, double s_aa, double s_bb) {
    const double e = (s_ab / (fa * fb) - s_aa / (fa * fa)) + (s_ab / (fa * fb) - s_bb / (fb * fb));
    return std::max(0.0, scale * e);
  };

  std::vector<std::size_t> ia(na), ib(nb);
  std::iota(ia.begin(), ia.end(), 0);
  std::iota(ib.begin(), ib.end(), na);
  const double obs = energy(stats_detail::cross_sum(dist, n, ia, ib),
                            stats_detail::cross_sum(dist, n, ia, ia),
                            stats_detail::cross_sum(dist, n, ib, ib));

  // Permutation null via one masked matrix-vector product per relabelling.
  std::vector<double> rowsum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += dist[i * n + j];
    rowsum[i] = s;
  }
  double total = 0.0;
  for (double r : rowsum) total += r;
  std::vector<std::size_t> perm(n);
  std::vector<double> mask(n);
  int exceed = 0;
  const double guard = 1e-12 * (1.0 + obs);
  for (int r = 0; r < resamples; ++r) {
    std::iota(perm.begin(), perm.end(), 0);
    CounterRng rng(seed, StreamTag::permutation, static_cast<std::uint64_t>(r));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::fill(mask.begin(), mask.end(), 0.0);
    for (std::size_t i = 0; i < na; ++i) mask[perm[i]] = 1.0;
    double s_aa = 0.0, s_bb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* d = dist.data() + i * n;
      const double row_a = vec::dot(d, mask.data(), n);
      if (mask[i] != 0.0)
        s_aa += row_a;
      else
        s_bb += rowsum[i] - row_a;
    }
    const double s_ab = 0.5 * (total - s_aa - s_bb);
    if (energy(s_ab, s_aa, s_bb) >= obs - guard) ++exceed;
  }
  TestReport rep;
  rep.statistic = obs;
  rep.p_value = (1.0 + exceed) / (1.0 + resamples);
  rep.method = "energy distance, permutation null";
  rep.resamples = resamples;
  rep.seed = seed;
  return rep;
}

struct HillResult {
  double alpha_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int k = 0;
  bool unreliable = false;  // too few order statistics for the asymptotic CI
};

/// Hill estimator of the tail index from the k largest order statistics,
/// with the asymptotic 90% interval alpha_hat (1 +- 1.645 / sqrt(k)).
inline HillResult hill_estimator(std::vector<double> mags, int k) {
  for (double x : mags)
    if (!(x > 0.0) || !std::isfinite(x))
      throw Error(ErrorKind::validation, "hill_estimator needs finite positive magnitudes");
  if (k < 1 || 2 * static_cast<std::size_t>(k) >= mags.size())
    throw Error(ErrorKind::precondition, "hill_estimator needs 1 <= k < n/2");
  std::sort(mags.begin(), mags.end(), std::greater<>());
  const double logk = std::log(mags[static_cast<std::size_t>(k)]);
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += std::log(mags[static_cast<std::size_t>(i)]) - logk;
  HillResult h;
  h.k = k;
  h.alpha_hat = k / s;
  const double half = 1.645 / std::sqrt(static_cast<double>(k));
  h.ci_lo = h.alpha_hat * (1.0 - half);
  h.ci_hi = h.alpha_hat * (1.0 + half);
  h.unreliable = k < 30;
  return h;
}

/// Pseudo-moment ratio |sum z^2| / sum |z|^2, in [0, 1].
inline double pseudo_ratio(const std::vector<cplx>& z) {
  cplx p(0.0, 0.0);
  double a = 0.0;
  for (const auto& x : z) {
    p += x * x;
    a += std::norm(x);
  }
  return a > 0.0 ? std::min(1.0, std::abs(p) / a) : 0.0;
}

/// Isotropy test for a centered complex sample: E[zeta^2] = 0, equivalently
/// equal coordinate variances and zero covariance. The null distribution of
/// the pseudo-moment ratio comes from multiplying every sample by an
/// independent uniform phase, which leaves a rotation-invariant law unchanged.
inline TestReport complex_normal_structure(const std::vector<cplx>& z, int resamples = 2000,
                                           std::uint64_t seed = 0) {
  if (z.size() < 100)
    throw Error(ErrorKind::too_few_samples, "complex_normal_structure needs at least 100 samples");
  TestReport rep;
  rep.method = "pseudo-moment ratio, phase randomization";
  rep.resamples = resamples;
  rep.seed = seed;
  double a = 0.0;
  for (const auto& x : z) a += std::norm(x);
  if (!(a > 0.0)) {
    rep.degenerate = true;
    rep.p_value = 1.0;
    return rep;
  }
  rep.statistic = pseudo_ratio(z);
  int exceed = 0;
  for (int r = 0; r < resamples; ++r) {
    CounterRng rng(seed, StreamTag::rotation, static_cast<std::uint64_t>(r));
    cplx p(0.0, 0.0);
    for (const auto& x : z) {
      const cplx y = x * std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
      p += y * y;
    }
    if (std::min(1.0, std::abs(p) / a) >= rep.statistic) ++exceed;
  }
  rep.p_value = (1.0 + exceed) / (1.0 + resamples);
  return rep;
}

struct ComplexEstimate {
  cplx value;
  cplx se;  // standard errors of the real and imaginary parts
};

struct RealEstimate {
  double value = 0.0;
  double se = 0.0;
};

struct MomentSummary {
  ComplexEstimate mean;
  RealEstimate abs2;
  ComplexEstimate pseudo2;
  std::size_t n = 0;
};

namespace stats_detail {

// Jackknife standard error of a plug-in mean of the values x.
inline double jackknife_se(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (double v : x) total += v;
  double mean_loo = 0.0;
  std::vector<double> loo(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    loo[i] = (total - x[i]) / (n - 1.0);
    mean_loo += loo[i];
  }
  mean_loo /= n;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean_loo) * (v - mean_loo);
  return std::sqrt((n - 1.0) / n * ss);
}

inline double plain_mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace stats_detail

/// Plug-in mean, E|z|^2 and E[z^2] with jackknife standard errors. The
/// pseudo moment is shrunk onto the disc |pseudo2| <= abs2 if rounding
/// pushes it outside.
inline MomentSummary moment_summary(const std::vector<cplx>& z) {
  if (z.size() < 2) throw Error(ErrorKind::too_few_samples, "moment_summary needs >= 2 samples");
  std::vector<double> re(z.size()), im(z.size()), ab(z.size()), pr(z.size()), pi(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    re[i] = z[i].real();
    im[i] = z[i].imag();
    ab[i] = std::norm(z[i]);
    const cplx q = z[i] * z[i];
    pr[i] = q.real();
    pi[i] = q.imag();
  }
  using namespace stats_detail;
  MomentSummary m;
  m.n = z.size();
  m.mean = {{plain_mean(re), plain_mean(im)}, {jackknife_se(re), jackknife_se(im)}};
  m.abs2 = {plain_mean(ab), jackknife_se(ab)};
  cplx p(plain_mean(pr), plain_mean(pi));
  if (std::abs(p) > m.abs2.value) p *= m.abs2.value / std::abs(p);
  m.pseudo2 = {p, {jackknife_se(pr), jackknife_se(pi)}};
  return m;
}

/// Asymptotic Kolmogorov-Smirnov two-sample test; diagnostics only.
inline TestReport ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::too_few_samples, "ks_two_sample: empty input");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  const double lam = (en + 0.12 + 0.11 / en) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  TestReport rep;
  rep.statistic = d;
  rep.p_value = std::clamp(lam < 1e-3 ? 1.0 : p, 0.0, 1.0);
  rep.method = "two-sample Kolmogorov-Smirnov (asymptotic)";
  return rep;
}

}  // namespace brw
