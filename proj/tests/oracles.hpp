#pragma once

// Closed-form answers for the binary-Gaussian model (two children, N(0,1)
// displacements), m(lambda) = 2 exp(lambda^2 / 2).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "brw/regimes.hpp"

namespace oracle {

using brw::cplx;
using brw::Regime;

inline const double kLog2 = std::log(2.0);
inline const double kTheta = std::sqrt(2.0 * std::log(2.0));

/// sigma_lambda^2 = (e^{theta^2 + eta^2} - 1) / 2.
inline double sigma_lambda_sq(cplx l) { return std::expm1(std::norm(l)) / 2.0; }

/// rho = m(2 theta) / |m(lambda)|^2 = e^{theta^2 + eta^2} / 2.
inline double rho(cplx l) { return std::exp(std::norm(l)) / 2.0; }

/// E|a_n (Z_{n+m} - Z_n)|^2.
inline double residual_abs2(cplx l, int m) {
  const double r = rho(l);
  return sigma_lambda_sq(l) * (1.0 - std::pow(r, m)) / (1.0 - r);
}

/// Stable-boundary exponent on |eta| = vartheta - theta.
inline double alpha(double theta) { return kTheta / theta; }

/// Seneta-Heyde constant sqrt(2 / (pi sigma^2)) with sigma^2 = 2 log 2.
inline double seneta_heyde_c() { return std::sqrt(2.0 / (std::numbers::pi * 2.0 * kLog2)); }

/// Regime by the region description: the disc theta^2 + eta^2 < log 2, the
/// triangles vartheta/2 < |theta| < vartheta with |eta| < vartheta - |theta|,
/// and their boundary lines.
inline Regime regime(cplx l) {
  const double t = std::abs(l.real()), e = std::abs(l.imag());
  if (t * t + e * e < kLog2) return t == kTheta / 2.0 ? Regime::gaussian_boundary : Regime::gaussian;
  if (t > kTheta / 2.0 && t < kTheta) {
    if (e < kTheta - t) return Regime::extremal;
    if (e == kTheta - t) return Regime::stable_boundary;
  }
  return Regime::out_of_theory;
}

/// Distance from lambda to the nearest boundary curve of regime().
inline double boundary_distance(cplx l) {
  const double t = std::abs(l.real()), e = std::abs(l.imag());
  double d = std::abs(std::hypot(t, e) - std::sqrt(kLog2));
  d = std::min(d, std::abs(t - kTheta / 2.0));
  d = std::min(d, std::abs(t - kTheta));
  d = std::min(d, std::abs(e + t - kTheta) / std::numbers::sqrt2);
  return d;
}

/// theta = vartheta - sqrt(pi/10), eta = sqrt(pi/10): the unit-modulus group has order 20.
inline cplx order20_lambda() {
  const double s = std::sqrt(std::numbers::pi / 10.0);
  return {kTheta - s, s};
}

}  // namespace oracle
