#pragma once

// Executable checks of the auxiliary inequalities: the complex
// Topchii-Vatutin inequality, the pointwise bound behind it, the tail bound
// for weighted sums of iid variables and geometric cancellation of weighted
// branching sums.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "brw/error.hpp"
#include "brw/format.hpp"
#include "brw/model.hpp"
#include "brw/rng.hpp"

namespace brw {

/// Laws of the centered complex innovations driving the test martingales.
enum class IncrementLaw { gaussian, rademacher, uniform_disc, student3, mixed };

inline const char* to_string(IncrementLaw l) {
  switch (l) {
    case IncrementLaw::gaussian: return "gaussian";
    case IncrementLaw::rademacher: return "rademacher";
    case IncrementLaw::uniform_disc: return "uniform_disc";
    case IncrementLaw::student3: return "student3";
    case IncrementLaw::mixed: return "mixed";
  }
  return "?";
}

inline IncrementLaw increment_law_from(const std::string& s) {
  for (auto l : {IncrementLaw::gaussian, IncrementLaw::rademacher, IncrementLaw::uniform_disc,
                 IncrementLaw::student3, IncrementLaw::mixed})
    if (s == to_string(l)) return l;
  throw Error(ErrorKind::validation, "unknown increment law '" + s + "'");
}

/// Centered complex draw with E|xi|^2 = 1.
inline cplx draw_increment(IncrementLaw law, CounterRng& rng) {
  switch (law) {
    case IncrementLaw::gaussian:
      return cplx(rng.normal(), rng.normal()) * (0.5 * std::numbers::sqrt2);
    case IncrementLaw::rademacher: {
      const std::uint32_t b = rng.next_u32();
      return cplx((b & 1u) ? 1.0 : -1.0, (b & 2u) ? 1.0 : -1.0) * (0.5 * std::numbers::sqrt2);
    }
    case IncrementLaw::uniform_disc: {
      const double r = std::sqrt(rng.uniform()), phi = 2.0 * std::numbers::pi * rng.uniform();
      return std::polar(r * std::numbers::sqrt2, phi);
    }
    case IncrementLaw::student3: {
      // t_3 has variance 3; chi^2_3 from three squared normals.
      const double g1 = rng.normal(), g2 = rng.normal(), g3 = rng.normal();
      const double s = std::sqrt((g1 * g1 + g2 * g2 + g3 * g3) / 3.0);
      return cplx(rng.normal(), rng.normal()) / s * std::sqrt(1.0 / 6.0);
    }
    case IncrementLaw::mixed: break;
  }
  throw Error(ErrorKind::precondition, "mixed is not a concrete increment law");
}

/// f(x) = x^p, p in [1, 2].
inline double power_f(double x, double p) { return p == 2.0 ? x * x : std::pow(x, p); }

/// f(|z|) computed from |z|^2.
inline double power_f_norm(double norm, double p) {
  if (p == 2.0) return norm;
  return norm > 0.0 ? std::exp(0.5 * p * std::log(norm)) : 0.0;
}

// ---------------------------------------------------------------------------
// Topchii-Vatutin inequality E f(|M_n|) <= 4 sum_k E f(|D_k|)

struct TrialSpec {
  int trials = 10000;
  int martingale_length = 8;      // maximum length; drawn per trial unless fixed_length
  bool fixed_length = false;
  IncrementLaw law = IncrementLaw::mixed;
  std::optional<double> p;        // exponent of f; drawn from [1, 2] per trial when empty
  int inner = 10000;              // Monte Carlo paths per trial
  std::uint64_t seed = 1;
};

struct TvTrial {
  int length = 0;
  double p = 0.0;
  IncrementLaw law = IncrementLaw::gaussian;
  double lhs = 0.0;        // mean f(|M_n|)
  double rhs_sum = 0.0;    // mean sum_k f(|D_k|)
  double diff_se = 0.0;    // SE of the paired f(|M_n|) - 4 sum_k f(|D_k|)
  double exact_se = 0.0;   // SE of the paired f(|M_n|) - sum_k f(|D_k|)
};

struct TvResult {
  int trials = 0;
  int violations = 0;
  double max_ratio = 0.0;  // max over trials of lhs / (4 rhs_sum)
  std::vector<TvTrial> detail;
};

inline void validate(const TrialSpec& s) {
  if (s.trials < 1) throw Error(ErrorKind::validation, "props.trials must be >= 1");
  if (s.martingale_length < 1) throw Error(ErrorKind::validation, "props.martingale_length must be >= 1");
  if (s.inner < 2) throw Error(ErrorKind::validation, "props.inner must be >= 2");
  if (s.p && !(*s.p >= 1.0 && *s.p <= 2.0))
    throw Error(ErrorKind::validation, "props.p must lie in [1, 2]");
}

/// One trial: D_k = H_k xi_k with predictable H_k = s_k (alpha + beta M_{k-1}/(1 + |M_{k-1}|)).
inline TvTrial tv_trial(const TrialSpec& spec, std::uint64_t t) {
  CounterRng setup(spec.seed, StreamTag::props, t);
  TvTrial tr;
  tr.length = spec.fixed_length ? spec.martingale_length
                                : 1 + static_cast<int>(setup.below(spec.martingale_length));
  tr.p = spec.p ? *spec.p : 1.0 + setup.uniform();
  tr.law = spec.law == IncrementLaw::mixed ? static_cast<IncrementLaw>(setup.below(4)) : spec.law;
  const cplx alpha = std::polar(0.2 + 1.8 * setup.uniform(), 2.0 * std::numbers::pi * setup.uniform());
  const cplx beta = std::polar(2.0 * setup.uniform(), 2.0 * std::numbers::pi * setup.uniform());
  std::vector<double> scale(static_cast<std::size_t>(tr.length));
  for (auto& s : scale) s = std::exp(2.0 * (setup.uniform() - 0.5));

  CounterRng rng(spec.seed, StreamTag::props, t, 1);
  double s_lhs = 0.0, s_rhs = 0.0, s_d = 0.0, s_d2 = 0.0, s_e = 0.0, s_e2 = 0.0;
  for (int i = 0; i < spec.inner; ++i) {
    cplx m(0.0, 0.0);
    double sum_f = 0.0;
    for (int k = 0; k < tr.length; ++k) {
      const cplx h = scale[static_cast<std::size_t>(k)] * (alpha + beta * m / (1.0 + std::sqrt(std::norm(m))));
      const cplx d = h * draw_increment(tr.law, rng);
      sum_f += power_f_norm(std::norm(d), tr.p);
      m += d;
    }
    const double fm = power_f_norm(std::norm(m), tr.p);
    const double diff = fm - 4.0 * sum_f, ex = fm - sum_f;
    s_lhs += fm;
    s_rhs += sum_f;
    s_d += diff;
    s_d2 += diff * diff;
    s_e += ex;
    s_e2 += ex * ex;
  }
  const double n = spec.inner;
  tr.lhs = s_lhs / n;
  tr.rhs_sum = s_rhs / n;
  auto se = [n](double s, double s2) {
    const double mean = s / n;
    return std::sqrt(std::max(0.0, s2 / n - mean * mean) / (n - 1.0));
  };
  tr.diff_se = se(s_d, s_d2);
  tr.exact_se = se(s_e, s_e2);
  return tr;
}

inline TvResult check_tv_inequality(const TrialSpec& spec, bool keep_detail = false) {
  validate(spec);
  TvResult r;
  r.trials = spec.trials;
  for (int t = 0; t < spec.trials; ++t) {
    const TvTrial tr = tv_trial(spec, static_cast<std::uint64_t>(t));
    const double excess = tr.lhs - 4.0 * tr.rhs_sum;
    if (excess > 5.0 * tr.diff_se) ++r.violations;
    if (tr.rhs_sum > 0.0) r.max_ratio = std::max(r.max_ratio, tr.lhs / (4.0 * tr.rhs_sum));
    if (keep_detail) r.detail.push_back(tr);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Pointwise bound f(|z+w|) + f(|z-w|) <= 2 (f(|z|) + f(|w|))

struct ParallelogramResult {
  std::size_t points = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // max of lhs / rhs
  double min_ratio = 0.0;  // min of lhs / rhs over points with rhs > 0
};

inline ParallelogramResult check_parallelogram_bound(std::size_t points, std::optional<double> p,
                                                     std::uint64_t seed) {
  if (p && !(*p >= 1.0 && *p <= 2.0)) throw Error(ErrorKind::validation, "p must lie in [1, 2]");
  ParallelogramResult r;
  r.points = points;
  r.min_ratio = std::numeric_limits<double>::infinity();
  CounterRng rng(seed, StreamTag::props, std::uint64_t{1} << 40);
  for (std::size_t i = 0; i < points; ++i) {
    const double pp = p ? *p : 1.0 + rng.uniform();
    // Log-uniform moduli over several decades, with occasional exact zeros.
    const std::uint32_t tag = rng.next_u32();
    const cplx z = (tag % 97 == 0) ? cplx(0.0, 0.0)
                                   : std::polar(std::exp(8.0 * (rng.uniform() - 0.5)),
                                                2.0 * std::numbers::pi * rng.uniform());
    const cplx w = (tag % 89 == 1) ? cplx(0.0, 0.0)
                                   : std::polar(std::exp(8.0 * (rng.uniform() - 0.5)),
                                                2.0 * std::numbers::pi * rng.uniform());
    const double lhs = power_f(std::abs(z + w), pp) + power_f(std::abs(z - w), pp);
    const double rhs = 2.0 * (power_f(std::abs(z), pp) + power_f(std::abs(w), pp));
    if (lhs > rhs * (1.0 + 1e-12)) ++r.violations;
    if (rhs > 0.0) {
      r.max_ratio = std::max(r.max_ratio, lhs / rhs);
      r.min_ratio = std::min(r.min_ratio, lhs / rhs);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Tail bound for weighted sums: P(|sum c_k Y_k| > eps) <= (8/eps^2) I(c)

/// Centered complex law of Y for the tail-bound check.
enum class TailLaw { gaussian, rademacher, uniform_disc, student3, bounded_unit };

struct TailPoint {
  double eps = 0.0;
  double p_hat = 0.0;
  double se = 0.0;
  double bound = 0.0;
  bool violated = false;
};

struct TailBoundReport {
  double c_max = 0.0;
  double integral = 0.0;  // I(c) from the empirical tail of |Y|
  std::vector<TailPoint> grid;
  int violations = 0;
};

inline cplx draw_tail_law(TailLaw law, CounterRng& rng) {
  switch (law) {
    case TailLaw::gaussian: return draw_increment(IncrementLaw::gaussian, rng);
    case TailLaw::rademacher: return draw_increment(IncrementLaw::rademacher, rng);
    case TailLaw::uniform_disc: return draw_increment(IncrementLaw::uniform_disc, rng);
    case TailLaw::student3: return draw_increment(IncrementLaw::student3, rng);
    case TailLaw::bounded_unit: return std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
  }
  return {};
}

/// Integral term of the bound for the empirical law of |Y|:
/// int_0^{1/c} c x P(|Y|>x) dx + int_{1/c}^inf P(|Y|>x) dx, integrated exactly
/// against the empirical tail (a step function).
inline double tail_integral(const std::vector<double>& abs_y, double c) {
  const double a = 1.0 / c;
  double s = 0.0;
  for (double y : abs_y) {
    const double t = std::min(y, a);
    s += c * t * t / 2.0 + std::max(0.0, y - a);
  }
  return s / static_cast<double>(abs_y.size());
}

inline TailBoundReport check_weighted_tail_bound(const std::vector<cplx>& weights, TailLaw law,
                                                 const std::vector<double>& eps_grid,
                                                 std::size_t draws, std::uint64_t seed) {
  if (weights.empty()) throw Error(ErrorKind::validation, "empty weight vector");
  double total = 0.0, cmax = 0.0;
  for (const auto& c : weights) {
    total += std::abs(c);
    cmax = std::max(cmax, std::abs(c));
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::validation, "weights must satisfy sum |c_k| = 1");
  for (double e : eps_grid)
    if (!(e > 0.0 && e < 1.0)) throw Error(ErrorKind::validation, "eps must lie in (0, 1)");
  if (draws < 2) throw Error(ErrorKind::validation, "too few draws");

  TailBoundReport r;
  r.c_max = cmax;
  // Separate stream for the tail of |Y| so the bound does not reuse the sums.
  std::vector<double> abs_y(draws);
  CounterRng ry(seed, StreamTag::props, (std::uint64_t{2} << 40));
  for (auto& y : abs_y) y = std::abs(draw_tail_law(law, ry));
  r.integral = tail_integral(abs_y, cmax);

  std::vector<double> mods(draws);
  CounterRng rs(seed, StreamTag::props, (std::uint64_t{3} << 40));
  for (auto& m : mods) {
    cplx s(0.0, 0.0);
    for (const auto& c : weights) s += c * draw_tail_law(law, rs);
    m = std::abs(s);
  }
  for (double e : eps_grid) {
    TailPoint tp;
    tp.eps = e;
    const auto hits = std::count_if(mods.begin(), mods.end(), [e](double m) { return m > e; });
    tp.p_hat = static_cast<double>(hits) / static_cast<double>(draws);
    tp.se = std::sqrt(tp.p_hat * (1.0 - tp.p_hat) / static_cast<double>(draws));
    tp.bound = 8.0 / (e * e) * r.integral;
    tp.violated = tp.p_hat > tp.bound + 5.0 * tp.se;
    r.violations += tp.violated;
    r.grid.push_back(tp);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Cancellation: Z_n = sum_{|u|=n} L(u) -> 0 when E W_1 = 1, |E Z_1| < 1 and E sum |L|^p < 1

enum class WeightKind {
  symmetric_phase,  // two children, L = (1/2) e^{sigma G - sigma^2/2} e^{i U}
  gaussian_lambda,  // two children, L = e^{-lambda X}/m(theta), X ~ N(0,1)
  positive,         // two children, L = (1/2) e^{sigma G - sigma^2/2} (a = 1)
};

struct WeightFamily {
  WeightKind kind = WeightKind::symmetric_phase;
  double sigma = 0.5;
  cplx lambda{0.3, 0.5};

  static constexpr int kChildren = 2;

  /// a = E Z_1.
  cplx mean_z1() const {
    switch (kind) {
      case WeightKind::symmetric_phase: return {0.0, 0.0};
      case WeightKind::gaussian_lambda: {
        const double th = lambda.real();
        return std::exp((lambda * lambda - th * th) / 2.0);
      }
      case WeightKind::positive: return {1.0, 0.0};
    }
    return {};
  }

  /// E sum_v |L(v)|^p.
  double abs_moment(double p) const {
    switch (kind) {
      case WeightKind::symmetric_phase:
      case WeightKind::positive:
        return std::pow(2.0, 1.0 - p) * std::exp(p * (p - 1.0) * sigma * sigma / 2.0);
      case WeightKind::gaussian_lambda: {
        const double th = lambda.real();
        return 2.0 * std::exp(p * p * th * th / 2.0) / std::pow(2.0 * std::exp(th * th / 2.0), p);
      }
    }
    return 0.0;
  }

  /// E sum_{v != v'} L(v) conj(L(v')).
  double cross_moment() const {
    switch (kind) {
      case WeightKind::symmetric_phase: return 0.0;
      case WeightKind::positive: return 0.5;
      case WeightKind::gaussian_lambda: return 0.5 * std::exp(-lambda.imag() * lambda.imag());
    }
    return 0.0;
  }

  void sample(CounterRng& rng, cplx* out) const {
    for (int v = 0; v < kChildren; ++v) {
      switch (kind) {
        case WeightKind::symmetric_phase:
          out[v] = std::polar(0.5 * std::exp(sigma * rng.normal() - sigma * sigma / 2.0),
                              2.0 * std::numbers::pi * rng.uniform());
          break;
        case WeightKind::positive:
          out[v] = 0.5 * std::exp(sigma * rng.normal() - sigma * sigma / 2.0);
          break;
        case WeightKind::gaussian_lambda: {
          const double th = lambda.real();
          out[v] = std::exp(-lambda * rng.normal()) / (2.0 * std::exp(th * th / 2.0));
          break;
        }
      }
    }
  }
};

/// E|Z_n|^2 by the exact recursion e_n = s2 e_{n-1} + c2 |a|^{2(n-1)}, e_0 = 1.
inline double exact_second_moment(const WeightFamily& f, int n) {
  const double s2 = f.abs_moment(2.0), c2 = f.cross_moment(), a2 = std::norm(f.mean_z1());
  double e = 1.0;
  for (int k = 1; k <= n; ++k) e = s2 * e + c2 * std::pow(a2, k - 1);
  return e;
}

struct CancellationRow {
  int n = 0;
  double mean = 0.0;  // empirical E|Z_n|^{p wedge 2}
  double se = 0.0;
  double exact = std::numeric_limits<double>::quiet_NaN();  // when p wedge 2 = 2
};

struct CancellationReport {
  std::vector<CancellationRow> rows;
  double slope = 0.0;
  double r_squared = 0.0;
  bool decays = false;  // slope < 0 and R^2 > 0.9
};

inline void validate(const WeightFamily& f, double p) {
  if (!(p > 1.0)) throw Error(ErrorKind::precondition, "cancellation needs p > 1");
  if (std::abs(f.mean_z1()) >= 1.0 - 1e-12)
    throw Error(ErrorKind::precondition, "|E Z_1| < 1 violated (a = " + std::to_string(std::abs(f.mean_z1())) + ")");
  if (!(f.abs_moment(p) < 1.0))
    throw Error(ErrorKind::precondition, "E sum |L|^p < 1 violated");
}

/// Least-squares slope and R^2 of y on x.
inline std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return {slope, r2};
}

inline CancellationReport check_cancellation(const WeightFamily& f, double p,
                                             const std::vector<int>& n_grid, std::size_t replicas,
                                             std::uint64_t seed) {
  validate(f, p);
  if (n_grid.size() < 2) throw Error(ErrorKind::validation, "need at least two depths");
  if (replicas < 2) throw Error(ErrorKind::validation, "too few replicas");
  const double q = std::min(p, 2.0);
  const int depth = *std::max_element(n_grid.begin(), n_grid.end());
  std::vector<std::vector<double>> vals(n_grid.size(), std::vector<double>(replicas));
  std::vector<cplx> gen, next;
  for (std::size_t r = 0; r < replicas; ++r) {
    CounterRng rng(seed, StreamTag::props, (std::uint64_t{4} << 40) + r);
    gen.assign(1, cplx(1.0, 0.0));
    for (int d = 1; d <= depth; ++d) {
      next.resize(gen.size() * WeightFamily::kChildren);
      for (std::size_t i = 0; i < gen.size(); ++i) {
        f.sample(rng, &next[i * WeightFamily::kChildren]);
        for (int v = 0; v < WeightFamily::kChildren; ++v) next[i * WeightFamily::kChildren + v] *= gen[i];
      }
      gen.swap(next);
      for (std::size_t g = 0; g < n_grid.size(); ++g) {
        if (n_grid[g] != d) continue;
        cplx z(0.0, 0.0);
        for (const auto& x : gen) z += x;
        vals[g][r] = power_f(std::abs(z), q);
      }
    }
  }
  CancellationReport rep;
  std::vector<double> xs, ys;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    CancellationRow row;
    row.n = n_grid[g];
    double s = 0.0, s2 = 0.0;
    for (double v : vals[g]) {
      s += v;
      s2 += v * v;
    }
    const double n = static_cast<double>(replicas);
    row.mean = s / n;
    row.se = std::sqrt(std::max(0.0, s2 / n - row.mean * row.mean) / (n - 1.0));
    if (q == 2.0) row.exact = exact_second_moment(f, row.n);
    rep.rows.push_back(row);
    xs.push_back(row.n);
    ys.push_back(std::log(row.mean));
  }
  std::tie(rep.slope, rep.r_squared) = linear_fit(xs, ys);
  rep.decays = rep.slope < 0.0 && rep.r_squared > 0.9;
  return rep;
}

struct SuiteOptions {
  int trials = 10000;
  int martingale_length = 8;
  int inner = 10000;
  std::size_t parallelogram_points = 1000000;
  std::size_t tail_draws = 100000;
  std::size_t cancellation_replicas = 2000;
  std::uint64_t seed = 1;
};

struct SuiteReport {
  TvResult tv;
  ParallelogramResult parallelogram;
  int tail_points = 0;
  int tail_violations = 0;
  int cancellation_fits = 0;
  int cancellation_violations = 0;  // fits without decay plus rows off the exact value by > 5 SE
  double cancellation_min_r2 = 1.0;

  int violations() const {
    return tv.violations + static_cast<int>(parallelogram.violations) + tail_violations + cancellation_violations;
  }

  std::string text() const {
    std::string s;
    s += "tv.trials: " + std::to_string(tv.trials) + "\n";
    s += "tv.violations: " + std::to_string(tv.violations) + "\n";
    s += "tv.max_ratio: " + fmt17(tv.max_ratio) + "\n";
    s += "parallelogram.points: " + std::to_string(parallelogram.points) + "\n";
    s += "parallelogram.violations: " + std::to_string(parallelogram.violations) + "\n";
    s += "parallelogram.max_ratio: " + fmt17(parallelogram.max_ratio) + "\n";
    s += "tail.points: " + std::to_string(tail_points) + "\n";
    s += "tail.violations: " + std::to_string(tail_violations) + "\n";
    s += "cancellation.fits: " + std::to_string(cancellation_fits) + "\n";
    s += "cancellation.violations: " + std::to_string(cancellation_violations) + "\n";
    s += "cancellation.min_r_squared: " + fmt17(cancellation_min_r2) + "\n";
    s += std::string("overall: ") + (violations() == 0 ? "pass" : "FAIL") + "\n";
    return s;
  }
};

/// Runs the four inequality checks on fixed parameter grids.
inline SuiteReport run_appendix_suite(const SuiteOptions& o) {
  SuiteReport r;
  TrialSpec tv;
  tv.trials = o.trials;
  tv.martingale_length = o.martingale_length;
  tv.inner = o.inner;
  tv.seed = o.seed;
  r.tv = check_tv_inequality(tv);
  r.parallelogram = check_parallelogram_bound(o.parallelogram_points, std::nullopt, o.seed);

  const std::vector<std::vector<cplx>> weight_sets{
      {cplx(0.5, 0.0), cplx(0.0, 0.3), cplx(-0.2, 0.0)},
      {cplx(0.25, 0.0), cplx(0.0, 0.25), cplx(-0.25, 0.0), cplx(0.0, -0.25)},
      {std::polar(0.9, 1.0), std::polar(0.1, 2.0)},
  };
  const std::vector<double> eps{0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9};
  for (const auto& w : weight_sets)
    for (auto law : {TailLaw::gaussian, TailLaw::rademacher, TailLaw::uniform_disc, TailLaw::student3,
                     TailLaw::bounded_unit}) {
      const auto t = check_weighted_tail_bound(w, law, eps, o.tail_draws, o.seed);
      r.tail_violations += t.violations;
      r.tail_points += static_cast<int>(t.grid.size());
    }

  for (auto kind : {WeightKind::symmetric_phase, WeightKind::gaussian_lambda})
    for (double p : {1.5, 2.0}) {
      WeightFamily f;
      f.kind = kind;
      const auto c = check_cancellation(f, p, {2, 4, 6, 8, 10}, o.cancellation_replicas, o.seed);
      ++r.cancellation_fits;
      r.cancellation_min_r2 = std::min(r.cancellation_min_r2, c.r_squared);
      if (!c.decays) ++r.cancellation_violations;
      for (const auto& row : c.rows)
        if (!std::isnan(row.exact) && std::abs(row.mean - row.exact) > 5.0 * row.se) ++r.cancellation_violations;
    }
  return r;
}

}  // namespace brw
