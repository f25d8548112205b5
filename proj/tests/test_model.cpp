#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "brw/model.hpp"

using namespace brw;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("binary Gaussian transform matches 2 exp(lambda^2 / 2)") {
  const auto law = ReproductionLaw::binary_gaussian();
  for (cplx l : {cplx(0.3, 0.2), cplx(0.9, -0.4), cplx(0.0, 1.5), cplx(-0.7, 0.1)}) {
    const cplx want = 2.0 * std::exp(l * l / 2.0);
    CHECK(std::abs(laplace_m(law, l) - want) < 1e-14 * std::abs(want));
  }
  CHECK_THAT(log_laplace_m_real(law, 1.1), WithinAbs(std::log(2.0) + 0.605, 1e-15));
  CHECK_THAT(log_m_derivatives(law, 0.7, 1), WithinAbs(0.7, 1e-15));
  CHECK_THAT(log_m_derivatives(law, 0.7, 2), WithinAbs(1.0, 1e-15));
}

TEST_CASE("sigma_lambda^2 closed form for the binary Gaussian law") {
  const auto law = ReproductionLaw::binary_gaussian();
  for (cplx l : {cplx(0.3, 0.2), cplx(0.1, 0.5), cplx(0.5, 0.0)}) {
    const double t = l.real(), e = l.imag();
    const ComplexParam p(law, l);
    CHECK_THAT(p.sigma_lambda_sq(), WithinRel((std::exp(t * t + e * e) - 1.0) / 2.0, 1e-12));
    CHECK_THAT(p.rho(), WithinRel(std::exp(e * e + t * t) / 2.0, 1e-12));
  }
}

TEST_CASE("pseudo second moment for the binary Gaussian law") {
  const auto law = ReproductionLaw::binary_gaussian();
  const cplx l(0.3, 0.2);
  // E[(Z_1 - 1)^2] = (exp(l^2) - 1) / 2 for two iid N(0,1) children.
  CHECK(std::abs(pseudo_sigma_lambda(law, l) - (std::exp(l * l) - 1.0) / 2.0) < 1e-14);
}

TEST_CASE("uniform and point-mass transforms") {
  const DisplacementFamily u = Uniform{-1.0, 3.0};
  const cplx l(0.4, 0.3);
  const cplx want = (std::exp(l) - std::exp(-3.0 * l)) / (4.0 * l);
  CHECK(std::abs(transform(u, l) - want) < 1e-14);
  CHECK_THAT(std::exp(log_transform(u, 0.4)), WithinRel(transform(u, cplx(0.4, 0.0)).real(), 1e-13));
  // Derivatives against central differences.
  const double h = 1e-5, th = 0.6;
  const double d1 = (log_transform(u, th + h) - log_transform(u, th - h)) / (2 * h);
  const double d2 = (log_transform(u, th + h) - 2 * log_transform(u, th) + log_transform(u, th - h)) / (h * h);
  CHECK_THAT(log_transform_derivative(u, th, 1), WithinAbs(d1, 1e-8));
  CHECK_THAT(log_transform_derivative(u, th, 2), WithinAbs(d2, 1e-4));
  const DisplacementFamily pm = PointMass{0.5};
  CHECK(std::abs(transform(pm, l) - std::exp(-0.5 * l)) < 1e-15);
  CHECK(log_transform_derivative(pm, 1.0, 2) == 0.0);
}

TEST_CASE("reproduction law validation") {
  CHECK_THROWS_AS(ReproductionLaw({0.5, 0.6}, Gaussian{}), Error);
  CHECK_THROWS_AS(ReproductionLaw({0.5, 0.5}, Gaussian{}), Error);  // not supercritical
  CHECK_THROWS_AS(ReproductionLaw({}, Gaussian{}), Error);
  CHECK_THROWS_AS(ReproductionLaw({0.0, 0.0, 1.0}, Gaussian{0.0, 0.0}), Error);
  CHECK_THROWS_AS(ReproductionLaw({0.0, 0.0, 1.0}, Uniform{1.0, 1.0}), Error);
  try {
    ReproductionLaw({0.2, 0.2, 0.2}, Gaussian{});
    FAIL("sum != 1 accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
  }
  const ReproductionLaw l({0.25, 0.25, 0.5}, Gaussian{});
  CHECK_THAT(l.mean_offspring(), WithinAbs(1.25, 1e-15));
  CHECK_THAT(l.factorial_moment2(), WithinAbs(1.0, 1e-15));
  CHECK_FALSE(l.fixed_count().has_value());
  CHECK(ReproductionLaw::binary_gaussian().fixed_count() == 2);
}

TEST_CASE("sigma_lambda^2 = 0 is reported as degenerate") {
  // Deterministic single displacement with one child per individual would be
  // subcritical; two children at the same point make Z_1 = 1 at lambda real.
  const ReproductionLaw law({0.0, 0.0, 1.0}, PointMass{0.0});
  const ComplexParam p(law, cplx(0.4, 0.0));
  CHECK_THROWS_AS(sigma_lambda_sq(law, p), Error);
}

TEST_CASE("m(lambda) = 0 is rejected") {
  // Gaussian transform never vanishes; Uniform(-1, 1) vanishes at lambda = i pi.
  const ReproductionLaw law({0.0, 0.0, 1.0}, Uniform{-1.0, 1.0});
  try {
    ComplexParam p(law, cplx(0.0, std::numbers::pi));
    FAIL("zero transform accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate);
  }
}

TEST_CASE("sample_offspring draws the configured counts and displacements") {
  const ReproductionLaw law({0.25, 0.25, 0.5}, Gaussian{1.0, 2.0});
  CounterRng rng(5, StreamTag::model_mc, 0);
  const int n = 100000;
  double count = 0.0, s = 0.0, s2 = 0.0;
  int draws = 0;
  for (int i = 0; i < n; ++i) {
    const auto xs = sample_offspring(law, rng);
    count += static_cast<double>(xs.size());
    for (double x : xs) {
      s += x;
      s2 += x * x;
      ++draws;
    }
  }
  CHECK_THAT(count / n, WithinAbs(1.25, 0.02));
  CHECK_THAT(s / draws, WithinAbs(1.0, 0.03));
  CHECK_THAT(s2 / draws - (s / draws) * (s / draws), WithinAbs(4.0, 0.1));
}

TEST_CASE("Monte Carlo E Z_1 = 1 and E|Z_1 - 1|^2 = sigma_lambda^2") {
  const auto law = ReproductionLaw::binary_gaussian();
  const cplx l(0.3, 0.2);
  const ComplexParam p(law, l);
  CounterRng rng(9, StreamTag::model_mc, 0);
  const int n = 200000;
  cplx mean(0.0, 0.0);
  double abs2 = 0.0;
  for (int i = 0; i < n; ++i) {
    cplx z(0.0, 0.0);
    for (double x : sample_offspring(law, rng)) z += std::exp(-l * x);
    z /= p.m_lambda();
    mean += z;
    abs2 += std::norm(z - 1.0);
  }
  mean /= static_cast<double>(n);
  abs2 /= n;
  CHECK(std::abs(mean - 1.0) < 5.0 * std::sqrt(p.sigma_lambda_sq() / n));
  CHECK_THAT(abs2, WithinRel(p.sigma_lambda_sq(), 0.05));
}
