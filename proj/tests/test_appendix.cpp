#include <catch_amalgamated.hpp>

#include <cmath>

#include "brw/appendix.hpp"

using namespace brw;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("increment laws are centered with unit second moment") {
  for (auto law : {IncrementLaw::gaussian, IncrementLaw::rademacher, IncrementLaw::uniform_disc,
                   IncrementLaw::student3}) {
    CounterRng rng(1, StreamTag::props, 99);
    cplx mean(0.0, 0.0);
    double abs2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const cplx x = draw_increment(law, rng);
      mean += x;
      abs2 += std::norm(x);
    }
    INFO(to_string(law));
    CHECK(std::abs(mean) / n < 0.01);
    CHECK_THAT(abs2 / n, WithinAbs(1.0, law == IncrementLaw::student3 ? 0.08 : 0.02));
  }
  CHECK(increment_law_from("student3") == IncrementLaw::student3);
  CHECK_THROWS_AS(increment_law_from("cauchy"), Error);
}

TEST_CASE("power function helpers agree") {
  for (double p : {1.0, 1.37, 2.0})
    for (double x : {0.0, 0.3, 1.0, 7.5}) CHECK_THAT(power_f_norm(x * x, p), WithinRel(power_f(x, p), 1e-14));
}

TEST_CASE("martingale inequality: zero violations across seeds") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    TrialSpec spec;
    spec.trials = 40;
    spec.inner = 2000;
    spec.seed = seed;
    const TvResult r = check_tv_inequality(spec);
    CHECK(r.violations == 0);
    CHECK(r.max_ratio < 1.0);
  }
}

TEST_CASE("martingale inequality: one step gives lhs = rhs") {
  TrialSpec spec;
  spec.trials = 5;
  spec.inner = 500;
  spec.martingale_length = 1;
  spec.fixed_length = true;
  const TvResult r = check_tv_inequality(spec, true);
  REQUIRE(r.detail.size() == 5);
  for (const auto& t : r.detail) CHECK_THAT(t.lhs, WithinRel(t.rhs_sum, 1e-12));
  CHECK_THAT(r.max_ratio, WithinRel(0.25, 1e-12));
}

TEST_CASE("martingale inequality: p = 2 orthogonality of increments") {
  TrialSpec spec;
  spec.trials = 10;
  spec.inner = 4000;
  spec.p = 2.0;
  const TvResult r = check_tv_inequality(spec, true);
  for (const auto& t : r.detail) CHECK(std::abs(t.lhs - t.rhs_sum) < 5.0 * t.exact_se);
  TrialSpec bad;
  bad.p = 2.5;
  CHECK_THROWS_AS(check_tv_inequality(bad), Error);
}

TEST_CASE("parallelogram bound") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto r = check_parallelogram_bound(20000, std::nullopt, seed);
    CHECK(r.violations == 0);
    CHECK(r.max_ratio <= 1.0 + 1e-12);
  }
  // At p = 2 the bound is the parallelogram identity.
  const auto eq = check_parallelogram_bound(20000, 2.0, 4);
  CHECK_THAT(eq.max_ratio, WithinAbs(1.0, 1e-12));
  CHECK_THAT(eq.min_ratio, WithinAbs(1.0, 1e-12));
}

TEST_CASE("empirical tail integral is exact for a point mass") {
  // |Y| = 2 and c = 1: int_0^1 x dx + int_1^2 1 dx = 1.5.
  CHECK_THAT(tail_integral({2.0, 2.0}, 1.0), WithinAbs(1.5, 1e-15));
  // |Y| = 0.5 and c = 1: int_0^0.5 x dx = 0.125.
  CHECK_THAT(tail_integral({0.5}, 1.0), WithinAbs(0.125, 1e-15));
}

TEST_CASE("weighted tail bound holds on a grid") {
  const std::vector<cplx> w{cplx(0.5, 0.0), cplx(0.0, 0.3), cplx(-0.2, 0.0)};
  for (auto law : {TailLaw::gaussian, TailLaw::rademacher, TailLaw::student3, TailLaw::bounded_unit})
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto r = check_weighted_tail_bound(w, law, {0.1, 0.3, 0.6, 0.9}, 20000, seed);
      CHECK(r.violations == 0);
      CHECK(r.c_max == 0.5);
    }
  CHECK_THROWS_AS(check_weighted_tail_bound({cplx(0.5, 0.0)}, TailLaw::gaussian, {0.5}, 100, 1), Error);
  CHECK_THROWS_AS(check_weighted_tail_bound(w, TailLaw::gaussian, {1.5}, 100, 1), Error);
}

TEST_CASE("weight families: closed-form moments") {
  WeightFamily f;
  f.kind = WeightKind::gaussian_lambda;
  f.lambda = {0.3, 0.5};
  CounterRng rng(3, StreamTag::props, 5);
  cplx mean(0.0, 0.0);
  double abs2 = 0.0;
  const int n = 200000;
  cplx out[2];
  for (int i = 0; i < n; ++i) {
    f.sample(rng, out);
    mean += out[0] + out[1];
    abs2 += std::norm(out[0]) + std::norm(out[1]);
  }
  CHECK(std::abs(mean / static_cast<double>(n) - f.mean_z1()) < 0.01);
  CHECK_THAT(abs2 / n, WithinRel(f.abs_moment(2.0), 0.02));
  CHECK_THAT(exact_second_moment(f, 0), WithinAbs(1.0, 1e-15));
}

TEST_CASE("cancellation: E|Z_n|^p decays geometrically") {
  for (auto kind : {WeightKind::symmetric_phase, WeightKind::gaussian_lambda}) {
    WeightFamily f;
    f.kind = kind;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto r = check_cancellation(f, 2.0, {2, 4, 6, 8}, 300, seed);
      CHECK(r.decays);
      for (const auto& row : r.rows) CHECK(std::abs(row.mean - row.exact) < 5.0 * row.se);
    }
  }
  WeightFamily pos;
  pos.kind = WeightKind::positive;
  try {
    check_cancellation(pos, 2.0, {2, 4}, 10, 1);
    FAIL("|E Z_1| = 1 accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precondition);
  }
}
