#pragma once

// Reproduction laws of the branching random walk and their closed-form
// Laplace transforms.
//
// A law is an offspring-count distribution on {0, ..., N_max} together with a
// displacement family; displacements are iid and independent of the count.
// The intensity transform is m(lambda) = E[N] * phi(lambda) with
// phi(lambda) = E[exp(-lambda X)].

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "brw/error.hpp"
#include "brw/rng.hpp"

namespace brw {

using cplx = std::complex<double>;

struct PointMass {
  double x = 0.0;
};

struct Gaussian {
  double mean = 0.0;
  double sd = 1.0;
};

struct Uniform {
  double a = 0.0;
  double b = 1.0;
};

using DisplacementFamily = std::variant<PointMass, Gaussian, Uniform>;

inline void validate(const DisplacementFamily& fam) {
  if (const auto* g = std::get_if<Gaussian>(&fam)) {
    if (!(g->sd > 0.0) || !std::isfinite(g->sd) || !std::isfinite(g->mean))
      throw Error(ErrorKind::validation, "displacement.sd must be finite and > 0");
  } else if (const auto* u = std::get_if<Uniform>(&fam)) {
    if (!(u->a < u->b) || !std::isfinite(u->a) || !std::isfinite(u->b))
      throw Error(ErrorKind::validation, "displacement requires finite a < b");
  } else if (!std::isfinite(std::get<PointMass>(fam).x)) {
    throw Error(ErrorKind::validation, "displacement.x must be finite");
  }
}

inline std::string describe(const DisplacementFamily& fam) {
  char buf[128];
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PointMass>)
          std::snprintf(buf, sizeof buf, "point_mass(%.17g)", f.x);
        else if constexpr (std::is_same_v<T, Gaussian>)
          std::snprintf(buf, sizeof buf, "gaussian(%.17g,%.17g)", f.mean, f.sd);
        else
          std::snprintf(buf, sizeof buf, "uniform(%.17g,%.17g)", f.a, f.b);
      },
      fam);
  return buf;
}

namespace detail {

// sinh(z)/z, entire; series near the origin.
inline cplx sinhc(cplx z) {
  if (std::abs(z) < 1e-4) {
    const cplx z2 = z * z;
    return 1.0 + z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sinh(z) / z;
}

// log(sinh(x)/x) for real x, stable for large |x|.
inline double log_sinhc(double x) {
  x = std::abs(x);
  if (x < 1e-4) return x * x / 6.0 - x * x * x * x / 180.0;
  if (x > 20.0) return x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0) - std::log(x);
  return std::log(std::sinh(x) / x);
}

// Langevin function coth(x) - 1/x and its derivative 1/x^2 - 1/sinh^2(x).
inline double langevin(double x) {
  if (std::abs(x) < 1e-2) {
    const double x2 = x * x;
    return x / 3.0 - x * x2 / 45.0 + 2.0 * x * x2 * x2 / 945.0;
  }
  return 1.0 / std::tanh(x) - 1.0 / x;
}

inline double langevin_prime(double x) {
  if (std::abs(x) < 1e-2) {
    const double x2 = x * x;
    return 1.0 / 3.0 - x2 / 15.0 + 2.0 * x2 * x2 / 189.0;
  }
  const double s = std::sinh(x);
  return 1.0 / (x * x) - 1.0 / (s * s);
}

}  // namespace detail

/// phi(lambda) = E[exp(-lambda X)] for complex lambda.
inline cplx transform(const DisplacementFamily& fam, cplx lambda) {
  return std::visit(
      [&](const auto& f) -> cplx {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PointMass>) {
          return std::exp(-lambda * f.x);
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return std::exp(-lambda * f.mean + lambda * lambda * (f.sd * f.sd / 2.0));
        } else {
          const double c = 0.5 * (f.a + f.b);
          const double h = 0.5 * (f.b - f.a);
          return std::exp(-lambda * c) * detail::sinhc(lambda * h);
        }
      },
      fam);
}

/// log phi(theta) for real theta, computed without forming phi.
inline double log_transform(const DisplacementFamily& fam, double theta) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PointMass>) {
          return -theta * f.x;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return -theta * f.mean + theta * theta * f.sd * f.sd / 2.0;
        } else {
          const double c = 0.5 * (f.a + f.b);
          const double h = 0.5 * (f.b - f.a);
          return -theta * c + detail::log_sinhc(theta * h);
        }
      },
      fam);
}

/// d/dtheta and d^2/dtheta^2 of log phi(theta).
inline double log_transform_derivative(const DisplacementFamily& fam, double theta, int order) {
  if (order != 1 && order != 2)
    throw Error(ErrorKind::precondition, "derivative order must be 1 or 2");
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PointMass>) {
          return order == 1 ? -f.x : 0.0;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return order == 1 ? -f.mean + theta * f.sd * f.sd : f.sd * f.sd;
        } else {
          const double c = 0.5 * (f.a + f.b);
          const double h = 0.5 * (f.b - f.a);
          return order == 1 ? -c + h * detail::langevin(theta * h)
                            : h * h * detail::langevin_prime(theta * h);
        }
      },
      fam);
}

class ReproductionLaw {
 public:
  ReproductionLaw(std::vector<double> offspring_probs, DisplacementFamily displacement)
      : probs_(std::move(offspring_probs)), displacement_(displacement) {
    if (probs_.empty()) throw Error(ErrorKind::validation, "offspring: empty probability vector");
    double total = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k) {
      if (!(probs_[k] >= 0.0) || !std::isfinite(probs_[k]))
        throw Error(ErrorKind::validation,
                    "offspring: entry " + std::to_string(k) + " is not a probability");
      total += probs_[k];
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw Error(ErrorKind::validation, "offspring: probabilities sum to " +
                                             std::to_string(total) + ", expected 1");
    while (probs_.size() > 1 && probs_.back() == 0.0) probs_.pop_back();
    validate(displacement_);
    for (std::size_t k = 0; k < probs_.size(); ++k) {
      mean_ += static_cast<double>(k) * probs_[k];
      fact2_ += static_cast<double>(k) * static_cast<double>(k > 0 ? k - 1 : 0) * probs_[k];
    }
    if (!(mean_ > 1.0))
      throw Error(ErrorKind::validation, "offspring: E[N] = " + std::to_string(mean_) +
                                             " must exceed 1 (supercritical)");
    cdf_.resize(probs_.size());
    std::partial_sum(probs_.begin(), probs_.end(), cdf_.begin());
    cdf_.back() = 1.0;
    for (std::size_t k = 0; k < probs_.size(); ++k)
      if (probs_[k] == 1.0) fixed_count_ = static_cast<int>(k);
  }

  /// Binary splitting with standard Gaussian increments.
  static ReproductionLaw binary_gaussian() { return {{0.0, 0.0, 1.0}, Gaussian{0.0, 1.0}}; }

  const std::vector<double>& offspring_probs() const { return probs_; }
  const DisplacementFamily& displacement() const { return displacement_; }
  /// Displacements are iid and independent of N for every supported law.
  static constexpr bool displacements_iid() { return true; }

  double mean_offspring() const { return mean_; }
  /// E[N(N-1)].
  double factorial_moment2() const { return fact2_; }
  int max_offspring() const { return static_cast<int>(probs_.size()) - 1; }
  std::optional<int> fixed_count() const { return fixed_count_; }
  bool lattice() const { return std::holds_alternative<PointMass>(displacement_); }

  /// Offspring count for a uniform u in (0, 1] (inverse CDF).
  int count_from_uniform(double u) const {
    if (fixed_count_) return *fixed_count_;
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf_.begin(), max_offspring()));
  }

  std::string id() const {
    std::string s = "offspring=[";
    char buf[32];
    for (std::size_t k = 0; k < probs_.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", probs_[k]);
      if (k) s += ",";
      s += buf;
    }
    return s + "];" + describe(displacement_);
  }

 private:
  std::vector<double> probs_;
  std::vector<double> cdf_;
  DisplacementFamily displacement_;
  double mean_ = 0.0;
  double fact2_ = 0.0;
  std::optional<int> fixed_count_;
};

/// m(lambda) = E[sum_{|u|=1} exp(-lambda S(u))].
inline cplx laplace_m(const ReproductionLaw& law, cplx lambda) {
  return law.mean_offspring() * transform(law.displacement(), lambda);
}

/// log m(theta) for real theta.
inline double log_laplace_m_real(const ReproductionLaw& law, double theta) {
  return std::log(law.mean_offspring()) + log_transform(law.displacement(), theta);
}

inline double laplace_m(const ReproductionLaw& law, double theta) {
  return std::exp(log_laplace_m_real(law, theta));
}

/// (log m)'(theta) for order 1, (log m)''(theta) for order 2.
inline double log_m_derivatives(const ReproductionLaw& law, double theta, int order) {
  return log_transform_derivative(law.displacement(), theta, order);
}

/// Values below this are treated as a vanishing variance E|Z_1 - 1|^2.
inline constexpr double kDegenerateVariance = 1e-14;
/// |m(lambda)| below this is treated as a zero of the transform.
inline constexpr double kZeroTransform = 1e-12;

/// E|Z_1(lambda) - 1|^2 from the closed form; no degeneracy check.
inline double sigma_lambda_sq_value(const ReproductionLaw& law, cplx lambda) {
  const auto& fam = law.displacement();
  const cplx phi = transform(fam, lambda);
  const double phi2theta = std::exp(log_transform(fam, 2.0 * lambda.real()));
  const double num = law.mean_offspring() * phi2theta + law.factorial_moment2() * std::norm(phi);
  const double den = law.mean_offspring() * law.mean_offspring() * std::norm(phi);
  return std::max(0.0, num / den - 1.0);
}

/// E[(Z_1(lambda) - 1)^2], the pseudo second moment.
inline cplx pseudo_sigma_lambda(const ReproductionLaw& law, cplx lambda) {
  const auto& fam = law.displacement();
  const cplx phi = transform(fam, lambda);
  const cplx num = law.mean_offspring() * transform(fam, 2.0 * lambda) +
                   law.factorial_moment2() * phi * phi;
  return num / (law.mean_offspring() * law.mean_offspring() * phi * phi) - 1.0;
}

/// lambda = theta + i eta with the transform values every consumer needs.
class ComplexParam {
 public:
  ComplexParam(const ReproductionLaw& law, cplx lambda) : lambda_(lambda) {
    m_lambda_ = laplace_m(law, lambda);
    if (!(std::abs(m_lambda_) >= kZeroTransform))
      throw Error(ErrorKind::degenerate, "m(lambda) vanishes at lambda = " +
                                             std::to_string(lambda.real()) + "+" +
                                             std::to_string(lambda.imag()) + "i");
    log_m_2theta_ = log_laplace_m_real(law, 2.0 * lambda.real());
    m_2theta_ = std::exp(log_m_2theta_);
    m_2lambda_ = laplace_m(law, 2.0 * lambda);
    if (std::abs(m_2lambda_) > m_2theta_ * (1.0 + 1e-12))
      throw Error(ErrorKind::validation, "|m(2 lambda)| exceeds m(2 theta)");
    sigma_lambda_sq_ = sigma_lambda_sq_value(law, lambda);
  }
  ComplexParam(const ReproductionLaw& law, double theta, double eta)
      : ComplexParam(law, cplx(theta, eta)) {}

  cplx lambda() const { return lambda_; }
  double theta() const { return lambda_.real(); }
  double eta() const { return lambda_.imag(); }
  cplx m_lambda() const { return m_lambda_; }
  double m_2theta() const { return m_2theta_; }
  double log_m_2theta() const { return log_m_2theta_; }
  cplx m_2lambda() const { return m_2lambda_; }
  double sigma_lambda_sq() const { return sigma_lambda_sq_; }
  /// rho = m(2 theta) / |m(lambda)|^2.
  double rho() const { return m_2theta_ / std::norm(m_lambda_); }

 private:
  cplx lambda_;
  cplx m_lambda_;
  double m_2theta_ = 0.0;
  double log_m_2theta_ = 0.0;
  cplx m_2lambda_;
  double sigma_lambda_sq_ = 0.0;
};

/// sigma_lambda^2 = E|Z_1(lambda) - 1|^2; a vanishing value is a degenerate law.
inline double sigma_lambda_sq(const ReproductionLaw& law, const ComplexParam& p) {
  const double s = p.sigma_lambda_sq();
  if (s <= kDegenerateVariance)
    throw Error(ErrorKind::degenerate, "sigma_lambda^2 = 0: Z_1(lambda) is a.s. 1");
  (void)law;
  return s;
}

inline double draw_displacement(const DisplacementFamily& fam, CounterRng& rng) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PointMass>)
          return f.x;
        else if constexpr (std::is_same_v<T, Gaussian>)
          return f.mean + f.sd * rng.normal();
        else
          return f.a + (f.b - f.a) * rng.uniform();
      },
      fam);
}

/// One draw of the reproduction point process: the displacements of the
/// children of a single individual.
inline std::vector<double> sample_offspring(const ReproductionLaw& law, CounterRng& rng) {
  const int n = law.count_from_uniform(law.fixed_count() ? 1.0 : rng.uniform());
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (auto& x : xs) x = draw_displacement(law.displacement(), rng);
  return xs;
}

}  // namespace brw
