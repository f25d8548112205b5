#pragma once

// Classification of (law, lambda) into fluctuation regimes, the regime
// scaling constants a_n, and the multiplicative group generated by the
// normalized weights on the stable boundary.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "brw/error.hpp"
#include "brw/model.hpp"

namespace brw {

// ---------------------------------------------------------------------------
// Boundary parameter

struct BoundaryParams {
  double theta_star = 0.0;        // root of theta (log m)'(theta) = log m(theta)
  double log_m_theta_star = 0.0;  // log m(theta_star)
  double sigma_sq = 0.0;          // E sum V^2 e^{-V} in the boundary normalization
  double c = 0.0;                 // sqrt(2 / (pi sigma^2))
};

/// g(theta) = theta (log m)'(theta) - log m(theta); nondecreasing on theta > 0.
inline double boundary_defect(const ReproductionLaw& law, double theta) {
  return theta * log_m_derivatives(law, theta, 1) - log_laplace_m_real(law, theta);
}

struct RootBracket {
  double lo = 1e-6;
  double hi = 50.0;
};

inline BoundaryParams solve_theta_star(const ReproductionLaw& law, RootBracket bracket = {}) {
  double lo = bracket.lo, hi = bracket.hi;
  double glo = boundary_defect(law, lo);
  const double ghi = boundary_defect(law, hi);
  if (!(glo < 0.0 && ghi > 0.0))
    throw Error(ErrorKind::no_root, "theta (log m)'(theta) = log m(theta) has no root in (" +
                                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double g = boundary_defect(law, mid);
    if (std::abs(g) < 1e-12 && hi - lo < 1e-13) break;
    if (g < 0.0) {
      lo = mid;
      glo = g;
    } else {
      hi = mid;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  BoundaryParams bp;
  bp.theta_star = mid;
  bp.log_m_theta_star = log_laplace_m_real(law, mid);
  bp.sigma_sq = mid * mid * log_m_derivatives(law, mid, 2);
  if (!(bp.sigma_sq > 0.0)) throw Error(ErrorKind::degenerate, "boundary variance sigma^2 = 0");
  bp.c = std::sqrt(2.0 / (std::numbers::pi * bp.sigma_sq));
  return bp;
}

inline std::optional<BoundaryParams> try_theta_star(const ReproductionLaw& law,
                                                    RootBracket bracket = {}) {
  try {
    return solve_theta_star(law, bracket);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::no_root) return std::nullopt;
    throw;
  }
}

// ---------------------------------------------------------------------------
// One-dimensional convex minimization

struct Minimum {
  double x = 0.0;
  double f = 0.0;
};

template <class F>
Minimum golden_section(F&& f, double a, double b, double tol = 1e-10) {
  constexpr double r = 0.61803398874989484820;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  Minimum best{0.5 * (a + b), f(0.5 * (a + b))};
  // A convex function can attain its minimum on the boundary of the window.
  for (double x : {a, b}) {
    const double fx = f(x);
    if (fx < best.f) best = {x, fx};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Membership in Lambda

struct LambdaProbe {
  bool inside = false;
  double p_min = 1.0;          // minimizer over p in [1, 2]
  double log_ratio_min = 0.0;  // min_p log(m(p theta) / |m(lambda)|^p)
  /// Moment condition E[Z_1(theta)^gamma] < infinity; automatic for the
  /// supported light-tailed, finite-N laws.
  bool moment_condition = true;
};

inline LambdaProbe probe_lambda(const ReproductionLaw& law, cplx lambda, double gamma = 2.0) {
  const double log_abs_m = std::log(std::abs(laplace_m(law, lambda)));
  const double theta = lambda.real();
  auto f = [&](double p) { return log_laplace_m_real(law, p * theta) - p * log_abs_m; };
  const Minimum mn = golden_section(f, 1.0, gamma, 1e-10);
  LambdaProbe out;
  out.p_min = mn.x;
  out.log_ratio_min = mn.f;
  out.inside = mn.f < std::log1p(-1e-12);
  return out;
}

inline bool in_lambda(const ReproductionLaw& law, cplx lambda) {
  return probe_lambda(law, lambda).inside;
}

// ---------------------------------------------------------------------------
// Stable-boundary exponent alpha

enum class AlphaVariant {
  equality,    // both (C1) relations hold: lambda on the stable boundary
  upper_bound  // m(alpha theta) = |m|^alpha with theta m'(alpha theta)/|m|^alpha <= log|m|
};

struct AlphaRoot {
  double alpha = 0.0;
  AlphaVariant variant = AlphaVariant::equality;
  double residual = 0.0;             // |m(alpha theta)/|m(lambda)|^alpha - 1|
  double derivative_residual = 0.0;  // theta m'(alpha theta)/|m|^alpha - log|m(lambda)|
};

struct AlphaOptions {
  double window_lo = 1.0 + 1e-9;
  double window_hi = 2.0 - 1e-9;
  double equality_tol = 1e-9;
};

inline std::optional<AlphaRoot> solve_alpha(const ReproductionLaw& law, cplx lambda,
                                            AlphaOptions opt = {}) {
  const double theta = lambda.real();
  if (!(theta > 0.0)) return std::nullopt;
  const cplx m = laplace_m(law, lambda);
  if (std::abs(m) < kZeroTransform) return std::nullopt;
  const double L = std::log(std::abs(m));
  auto h = [&](double a) { return log_laplace_m_real(law, a * theta) - a * L; };
  auto dh = [&](double a) { return theta * log_m_derivatives(law, a * theta, 1) - L; };

  auto finish = [&](double a, AlphaVariant v) {
    AlphaRoot r;
    r.alpha = a;
    r.variant = v;
    r.residual = std::abs(std::expm1(h(a)));
    r.derivative_residual = theta * log_m_derivatives(law, a * theta, 1) *
                                std::exp(log_laplace_m_real(law, a * theta) - a * L) -
                            L;
    return r;
  };

  Minimum mn = golden_section(h, opt.window_lo, opt.window_hi, 1e-12);
  // Polish the tangency point with Newton on h'(alpha) = 0.
  double a = mn.x;
  for (int it = 0; it < 50; ++it) {
    const double d2 = theta * theta * log_m_derivatives(law, a * theta, 2);
    if (!(d2 > 0.0)) break;
    const double step = dh(a) / d2;
    const double next = a - step;
    if (!(next > opt.window_lo && next < opt.window_hi)) break;
    a = next;
    if (std::abs(step) < 1e-15) break;
  }
  // Near a tangency h is flat to rounding, so compare slopes instead of values.
  if (std::abs(dh(a)) <= std::abs(dh(mn.x)) && h(a) <= mn.f + 1e-13) mn = {a, h(a)};

  const bool interior = mn.x > opt.window_lo + 1e-8 && mn.x < opt.window_hi - 1e-8;
  if (std::abs(mn.f) <= opt.equality_tol && interior) return finish(mn.x, AlphaVariant::equality);
  if (mn.f < -opt.equality_tol && h(opt.window_lo) > 0.0) {
    double lo = opt.window_lo, hi = mn.x;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (h(mid) > 0.0 ? lo : hi) = mid;
    }
    return finish(0.5 * (lo + hi), AlphaVariant::upper_bound);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Group of normalized weights

struct GroupOptions {
  std::int64_t denominator_cap = 1000;
  double tolerance = 1e-12;
};

struct GroupSpec {
  bool full_circle = false;
  std::optional<std::int64_t> u1_order;  // empty: infinite (full circle)
  cplx w{1.0, 0.0};
  double generator_phase = 0.0;  // U_1 is generated by exp(i * generator_phase)
  std::int64_t phase_num = 0;    // generator_phase / (2 pi) = phase_num / phase_den
  std::int64_t phase_den = 1;
  bool numerically_rational = false;
};

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

/// Smallest-denominator continued-fraction convergent of x in [0, 1) within
/// tol, with denominator at most cap.
inline std::optional<Rational> detect_rational(double x, std::int64_t cap, double tol) {
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double r = x;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(r);
    if (a > static_cast<double>(cap) * 4.0) break;
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > cap) break;
    if (std::abs(x - static_cast<double>(p2) / static_cast<double>(q2)) <= tol)
      return Rational{p2, q2};
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    const double frac = r - a;
    if (frac <= 0.0) break;
    r = 1.0 / frac;
  }
  return std::nullopt;
}

inline ReproductionLaw mirror(const ReproductionLaw& law);

inline GroupSpec compute_group(const ReproductionLaw& law, cplx lambda, GroupOptions opt = {}) {
  if (law.lattice())
    throw Error(ErrorKind::lattice_law,
                "point-mass displacements give lattice weights; the group analysis requires a "
                "non-lattice law");
  const double theta = lambda.real(), eta = lambda.imag();
  if (!(theta > 0.0)) throw Error(ErrorKind::precondition, "compute_group requires theta > 0");
  const cplx m = laplace_m(law, lambda);
  // Weights exp(-lambda x)/m(lambda) fill the coset m(lambda)^{-1} {e^{lambda t}}; the
  // unit-modulus part of the generated group is generated by this phase.
  const double phase = (eta / theta) * std::log(std::abs(m)) - std::arg(m);
  const double two_pi = 2.0 * std::numbers::pi;
  double x = phase / two_pi;
  x -= std::floor(x);
  if (x >= 1.0) x = 0.0;

  GroupSpec g;
  g.generator_phase = phase;
  auto rat = detect_rational(x, opt.denominator_cap, opt.tolerance);
  if (!rat && std::abs(1.0 - x) <= opt.tolerance) rat = Rational{0, 1};
  if (rat) {
    g.numerically_rational = true;
    g.full_circle = false;
    g.phase_num = rat->num % rat->den;
    g.phase_den = rat->den;
    g.u1_order = rat->den;
    g.w = lambda / theta;
  } else {
    g.full_circle = true;
    g.u1_order.reset();
    g.w = cplx(1.0, 0.0);
  }
  return g;
}

struct Polyline {
  int index = 0;
  std::vector<cplx> points;
};

/// The connected components z0 * exp(lambda x), z0 in U_1, of a group with
/// finite unit-circle part.
inline std::vector<Polyline> snail_curves(const GroupSpec& g, cplx lambda, double x_min = -5.0,
                                          double x_max = 2.25, int samples = 100) {
  if (g.full_circle || !g.u1_order)
    throw Error(ErrorKind::validation, "the group is all of C*; it has no snail decomposition");
  if (samples < 2) throw Error(ErrorKind::validation, "snail curves need at least 2 samples");
  const std::int64_t q = *g.u1_order;
  std::vector<Polyline> out;
  for (std::int64_t k = 1; k <= q; ++k) {
    Polyline pl;
    pl.index = static_cast<int>(k);
    const cplx z0 = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(k) /
                                        static_cast<double>(q));
    for (int s = 0; s < samples; ++s) {
      const double x = x_min + (x_max - x_min) * s / (samples - 1);
      pl.points.push_back(z0 * std::exp(lambda * x));
    }
    out.push_back(std::move(pl));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regime labels

struct GaussianInterior {
  bool limit_is_complex = true;
  bool nondegenerate_2theta = true;
  bool degenerate = false;  // sigma_lambda^2 = 0
};

struct GaussianBoundary {
  bool limit_is_complex = true;
  BoundaryParams boundary;
};

struct Extremal {
  BoundaryParams boundary;
};

struct StableBoundary {
  double alpha = 0.0;
  cplx w{1.0, 0.0};
  BoundaryParams boundary;
  GroupSpec group;
};

struct OutOfTheory {
  std::string reason;
};

using RegimeLabel =
    std::variant<GaussianInterior, GaussianBoundary, Extremal, StableBoundary, OutOfTheory>;

enum class Regime { gaussian, gaussian_boundary, extremal, stable_boundary, out_of_theory };

inline Regime regime_of(const RegimeLabel& l) { return static_cast<Regime>(l.index()); }

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::gaussian: return "gaussian";
    case Regime::gaussian_boundary: return "gaussian_boundary";
    case Regime::extremal: return "extremal";
    case Regime::stable_boundary: return "stable_boundary";
    case Regime::out_of_theory: return "out_of_theory";
  }
  return "?";
}

inline const char* regime_name(const RegimeLabel& l) { return regime_name(regime_of(l)); }

struct ClassifyOptions {
  double equality_tol = 1e-9;  // absolute tolerance on defining residuals
  RootBracket theta_star_bracket{};
  GroupOptions group{};
};

/// Reflect displacements x -> -x; (law, lambda) and (mirror(law), -lambda)
/// describe the same weights.
inline ReproductionLaw mirror(const ReproductionLaw& law) {
  const DisplacementFamily flipped = std::visit(
      [](const auto& f) -> DisplacementFamily {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PointMass>)
          return PointMass{-f.x};
        else if constexpr (std::is_same_v<T, Gaussian>)
          return Gaussian{-f.mean, f.sd};
        else
          return Uniform{-f.b, -f.a};
      },
      law.displacement());
  return ReproductionLaw(law.offspring_probs(), flipped);
}

inline RegimeLabel classify(const ReproductionLaw& law, cplx lambda,
                            const std::optional<BoundaryParams>& boundary,
                            const ClassifyOptions& opt = {}) {
  const double theta = lambda.real();
  if (theta < 0.0)
    throw Error(ErrorKind::precondition, "classify expects theta >= 0; mirror the law first");
  const cplx m = laplace_m(law, lambda);
  if (std::abs(m) < kZeroTransform) return OutOfTheory{"m(lambda) = 0"};

  const double log_abs_m = std::log(std::abs(m));
  const double log_m2theta = log_laplace_m_real(law, 2.0 * theta);
  const double gauss_margin = 2.0 * log_abs_m - log_m2theta;  // > 0 iff m(2theta) < |m|^2
  const double sigma2 = sigma_lambda_sq_value(law, lambda);
  const bool limit_complex =
      log_m2theta - std::log(std::abs(laplace_m(law, 2.0 * lambda))) > 1e-12;

  std::string why;
  if (gauss_margin > opt.equality_tol) {
    if (sigma2 <= kDegenerateVariance) return GaussianInterior{limit_complex, true, true};
    if (boundary && std::abs(boundary_defect(law, 2.0 * theta)) <= opt.equality_tol)
      return GaussianBoundary{limit_complex, *boundary};
    const bool nondeg = boundary_defect(law, 2.0 * theta) < 0.0;
    return GaussianInterior{limit_complex, nondeg, false};
  }
  why = "m(2theta) >= |m(lambda)|^2";

  const bool inside = probe_lambda(law, lambda).inside;
  if (!boundary) {
    why += "; no boundary parameter theta*";
  } else if (!inside) {
    why += "; lambda not in Lambda";
  } else if (!(theta > 0.5 * boundary->theta_star && theta < boundary->theta_star)) {
    why += "; theta outside (theta*/2, theta*)";
  } else {
    return Extremal{*boundary};
  }

  if (!inside && theta > 0.0) {
    AlphaOptions ao;
    ao.equality_tol = opt.equality_tol;
    if (auto root = solve_alpha(law, lambda, ao); root && root->variant == AlphaVariant::equality) {
      if (!boundary) return OutOfTheory{why + "; stable boundary without theta*"};
      try {
        const GroupSpec g = compute_group(law, lambda, opt.group);
        return StableBoundary{root->alpha, g.w, *boundary, g};
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::lattice_law) throw;
        return OutOfTheory{why + "; lattice weights on the stable boundary"};
      }
    }
  }
  why += "; no (C1) root with alpha in (1,2)";
  return OutOfTheory{why};
}

inline RegimeLabel classify(const ReproductionLaw& law, cplx lambda,
                            const ClassifyOptions& opt = {}) {
  return classify(law, lambda, try_theta_star(law, opt.theta_star_bracket), opt);
}

/// Classification for any sign of theta: negative theta is handled by
/// mirroring the displacements.
inline RegimeLabel classify_any(const ReproductionLaw& law, cplx lambda,
                                const ClassifyOptions& opt = {}) {
  if (lambda.real() >= 0.0) return classify(law, lambda, opt);
  return classify(mirror(law), -lambda, opt);
}

// ---------------------------------------------------------------------------
// Scaling constants

inline cplx scaling_constant(const RegimeLabel& label, const ReproductionLaw& law, cplx lambda,
                             int n) {
  if (n < 0) throw Error(ErrorKind::precondition, "n must be >= 0");
  const double dn = static_cast<double>(n);
  const cplx log_m = std::log(laplace_m(law, lambda));
  auto gaussian_base = [&](bool limit_complex) {
    const cplx log_norm = limit_complex ? cplx(log_laplace_m_real(law, 2.0 * lambda.real()), 0.0)
                                        : std::log(laplace_m(law, 2.0 * lambda));
    return std::exp(dn * log_m - 0.5 * dn * log_norm);
  };
  return std::visit(
      [&](const auto& l) -> cplx {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, GaussianInterior>) {
          return gaussian_base(l.limit_is_complex);
        } else if constexpr (std::is_same_v<T, GaussianBoundary>) {
          if (n < 1) throw Error(ErrorKind::precondition, "boundary scaling needs n >= 1");
          return std::pow(dn, 0.25) * gaussian_base(l.limit_is_complex);
        } else if constexpr (std::is_same_v<T, Extremal>) {
          if (n < 1) throw Error(ErrorKind::precondition, "extremal scaling needs n >= 1");
          const double ts = l.boundary.theta_star;
          return std::exp(1.5 * lambda / ts * std::log(dn) +
                          dn * (log_m - lambda / ts * l.boundary.log_m_theta_star));
        } else if constexpr (std::is_same_v<T, StableBoundary>) {
          if (n < 1) throw Error(ErrorKind::precondition, "stable scaling needs n >= 1");
          return std::exp(l.w / (2.0 * l.alpha) * std::log(dn));
        } else {
          throw Error(ErrorKind::precondition,
                      "no scaling constant outside the covered regimes: " + l.reason);
        }
      },
      label);
}

// ---------------------------------------------------------------------------
// Regime map

struct RegimeGrid {
  std::vector<double> thetas;
  std::vector<double> etas;
  std::vector<RegimeLabel> labels;  // row-major: labels[i_eta * thetas.size() + i_theta]

  const RegimeLabel& at(std::size_t i_theta, std::size_t i_eta) const {
    return labels[i_eta * thetas.size() + i_theta];
  }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

inline RegimeGrid regime_map(const ReproductionLaw& law, std::vector<double> thetas,
                             std::vector<double> etas, const ClassifyOptions& opt = {}) {
  RegimeGrid grid{std::move(thetas), std::move(etas), {}};
  const auto bp = try_theta_star(law, opt.theta_star_bracket);
  const ReproductionLaw flipped = mirror(law);
  const auto bp_flipped = try_theta_star(flipped, opt.theta_star_bracket);
  grid.labels.reserve(grid.thetas.size() * grid.etas.size());
  for (double eta : grid.etas)
    for (double theta : grid.thetas)
      grid.labels.push_back(theta >= 0.0
                                ? classify(law, cplx(theta, eta), bp, opt)
                                : classify(flipped, cplx(-theta, -eta), bp_flipped, opt));
  return grid;
}

}  // namespace brw
