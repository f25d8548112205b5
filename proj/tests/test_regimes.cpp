#include <catch_amalgamated.hpp>

#include <cmath>

#include "brw/regimes.hpp"
#include "brw/rng.hpp"
#include "oracles.hpp"

using namespace brw;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const ReproductionLaw kLaw = ReproductionLaw::binary_gaussian();
}

TEST_CASE("boundary parameter of the binary Gaussian law") {
  const BoundaryParams bp = solve_theta_star(kLaw);
  CHECK_THAT(bp.theta_star, WithinAbs(oracle::kTheta, 1e-9));
  CHECK_THAT(bp.log_m_theta_star, WithinAbs(2.0 * oracle::kLog2, 1e-9));
  CHECK_THAT(bp.sigma_sq, WithinAbs(2.0 * oracle::kLog2, 1e-9));
  CHECK_THAT(bp.c, WithinAbs(oracle::seneta_heyde_c(), 1e-9));
}

TEST_CASE("theta* for other laws satisfies its defining equation") {
  const ReproductionLaw u({0.0, 0.0, 0.5, 0.5}, Uniform{-1.0, 2.0});
  const BoundaryParams bp = solve_theta_star(u);
  CHECK(std::abs(boundary_defect(u, bp.theta_star)) < 1e-10);
  const ReproductionLaw drifted({0.0, 0.0, 1.0}, Gaussian{0.3, 1.5});
  const BoundaryParams bd = solve_theta_star(drifted);
  // theta (theta s^2 - mu) = log 2 - mu theta + theta^2 s^2 / 2.
  CHECK_THAT(bd.theta_star, WithinAbs(std::sqrt(2.0 * std::log(2.0)) / 1.5, 1e-9));
}

TEST_CASE("missing root is reported as no_root") {
  // Deterministic displacements have no boundary parameter.
  const ReproductionLaw pm({0.0, 0.0, 1.0}, PointMass{1.0});
  CHECK_FALSE(try_theta_star(pm).has_value());
  try {
    solve_theta_star(pm);
    FAIL("root found");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::no_root);
  }
}

TEST_CASE("membership in Lambda") {
  CHECK(in_lambda(kLaw, {0.5, 0.3}));
  CHECK(in_lambda(kLaw, {0.9, 0.2}));
  CHECK_FALSE(in_lambda(kLaw, {1.3, 0.0}));
  CHECK_FALSE(in_lambda(kLaw, {0.3, 1.5}));
}

TEST_CASE("alpha on the stable boundary is vartheta / theta") {
  for (double t : {0.6, 0.7, 0.8, 0.9, 1.0, 1.1}) {
    const auto root = solve_alpha(kLaw, {t, oracle::kTheta - t});
    REQUIRE(root.has_value());
    CHECK(root->variant == AlphaVariant::equality);
    CHECK_THAT(root->alpha, WithinAbs(oracle::alpha(t), 1e-9));
  }
  // 2 theta = vartheta puts the root at the edge alpha = 2, outside the window.
  const auto edge = solve_alpha(kLaw, {oracle::kTheta / 2.0, 0.0});
  CHECK((!edge || edge->variant != AlphaVariant::equality));
}

TEST_CASE("named points classify as expected") {
  CHECK(regime_of(classify(kLaw, {0.3, 0.2})) == Regime::gaussian);
  CHECK(std::get<GaussianInterior>(classify(kLaw, {0.3, 0.2})).limit_is_complex);
  CHECK(std::get<GaussianInterior>(classify(kLaw, {0.3, 0.2})).nondegenerate_2theta);
  CHECK_FALSE(std::get<GaussianInterior>(classify(kLaw, {0.3, 0.0})).limit_is_complex);
  CHECK(regime_of(classify(kLaw, {0.9, 0.2})) == Regime::extremal);
  CHECK(regime_of(classify(kLaw, {oracle::kTheta / 2.0, 0.1})) == Regime::gaussian_boundary);
  CHECK(regime_of(classify(kLaw, {1.3, 0.0})) == Regime::out_of_theory);
  const auto sb = classify(kLaw, {0.9, oracle::kTheta - 0.9});
  REQUIRE(regime_of(sb) == Regime::stable_boundary);
  CHECK_THAT(std::get<StableBoundary>(sb).alpha, WithinAbs(oracle::alpha(0.9), 1e-9));
  CHECK_THROWS_AS(classify(kLaw, {-0.3, 0.2}), Error);
}

TEST_CASE("classifier agrees with the closed-form regions away from boundaries") {
  CounterRng rng(11, StreamTag::synthetic, 0);
  int tested = 0, disagreements = 0;
  for (int i = 0; i < 2000; ++i) {
    const cplx l(5.0 * rng.uniform() - 2.5, 5.0 * rng.uniform() - 2.5);
    if (oracle::boundary_distance(l) < 1e-8) continue;
    ++tested;
    if (regime_of(classify_any(kLaw, l)) != oracle::regime(l)) ++disagreements;
  }
  CHECK(tested > 1900);
  CHECK(disagreements == 0);
}

TEST_CASE("mirroring the law and lambda preserves the label") {
  const ReproductionLaw drifted({0.1, 0.2, 0.7}, Gaussian{0.4, 1.2});
  const ReproductionLaw flipped = mirror(drifted);
  CounterRng rng(12, StreamTag::synthetic, 0);
  for (int i = 0; i < 300; ++i) {
    const cplx l(3.0 * rng.uniform(), 4.0 * rng.uniform() - 2.0);
    CHECK(regime_of(classify_any(drifted, l)) == regime_of(classify_any(flipped, -l)));
  }
}

TEST_CASE("regime map matches pointwise classification") {
  const auto g = regime_map(kLaw, linspace(-2.0, 2.0, 21), linspace(-1.0, 1.0, 11));
  REQUIRE(g.labels.size() == 21 * 11);
  for (std::size_t j = 0; j < g.etas.size(); ++j)
    for (std::size_t i = 0; i < g.thetas.size(); ++i)
      CHECK(regime_of(g.at(i, j)) == regime_of(classify_any(kLaw, {g.thetas[i], g.etas[j]})));
  const auto empty = regime_map(kLaw, {}, {});
  CHECK(empty.labels.empty());
}

TEST_CASE("rational detection") {
  const auto r = detect_rational(0.15, 1000, 1e-12);
  REQUIRE(r.has_value());
  CHECK(r->num == 3);
  CHECK(r->den == 20);
  CHECK_FALSE(detect_rational(1.0 / std::numbers::pi, 1000, 1e-12).has_value());
  CHECK(detect_rational(0.0, 1000, 1e-12)->den == 1);
}

TEST_CASE("group of normalized weights at an order-20 point") {
  const cplx l = oracle::order20_lambda();
  const GroupSpec g = compute_group(kLaw, l);
  CHECK_FALSE(g.full_circle);
  REQUIRE(g.u1_order.has_value());
  CHECK(*g.u1_order == 20);
  CHECK(std::abs(g.w - l / l.real()) < 1e-12);
  const auto label = classify(kLaw, l);
  REQUIRE(regime_of(label) == Regime::stable_boundary);
  CHECK_THAT(std::get<StableBoundary>(label).alpha, WithinAbs(oracle::alpha(l.real()), 1e-9));

  const GroupSpec full = compute_group(kLaw, {oracle::kTheta - 0.2, 0.2});
  CHECK(full.full_circle);
  CHECK_FALSE(full.u1_order.has_value());
  CHECK(full.w == cplx(1.0, 0.0));
  CHECK_THROWS_AS(compute_group(ReproductionLaw({0.0, 0.0, 1.0}, PointMass{1.0}), {0.5, 0.1}), Error);
}

TEST_CASE("snail curves: one polyline per element of U_1") {
  const cplx l = oracle::order20_lambda();
  const auto curves = snail_curves(compute_group(kLaw, l), l);
  REQUIRE(curves.size() == 20);
  for (const auto& c : curves) {
    CHECK(c.points.size() == 100);
    // z0 on the unit circle at x = 0 is not sampled exactly; check the ratio law.
    const cplx ratio = c.points[1] / c.points[0];
    CHECK(std::abs(ratio - std::exp(l * (7.25 / 99.0))) < 1e-12);
  }
  CHECK_THROWS_AS(snail_curves(compute_group(kLaw, {oracle::kTheta - 0.2, 0.2}), l), Error);
}

TEST_CASE("scaling constants") {
  const cplx l(0.3, 0.2);
  const auto gl = classify(kLaw, l);
  // a_n = m(lambda)^n / m(2 theta)^{n/2}.
  const cplx an = scaling_constant(gl, kLaw, l, 12);
  const cplx want = std::pow(laplace_m(kLaw, l), 12) / std::pow(laplace_m(kLaw, 0.6), 6.0);
  CHECK(std::abs(an - want) < 1e-10 * std::abs(want));
  const cplx ls(0.9, oracle::kTheta - 0.9);
  const auto sl = classify(kLaw, ls);
  const cplx as = scaling_constant(sl, kLaw, ls, 16);
  CHECK(std::abs(as - std::pow(16.0, 1.0 / (2.0 * oracle::alpha(0.9)))) < 1e-9);
  CHECK_THROWS_AS(scaling_constant(classify(kLaw, {1.3, 0.0}), kLaw, {1.3, 0.0}, 5), Error);
}
