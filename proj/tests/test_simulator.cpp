#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "brw/regimes.hpp"
#include "brw/simulator.hpp"
#include "oracles.hpp"

using namespace brw;
using Catch::Matchers::WithinRel;

namespace {

const ReproductionLaw kLaw = ReproductionLaw::binary_gaussian();

SimConfig basic_config(int n, int m, std::uint64_t seed = 3) {
  SimConfig cfg;
  cfg.depth_n = n;
  cfg.extra_m = m;
  cfg.params.emplace_back(kLaw, cplx(0.3, 0.2));
  cfg.params.emplace_back(kLaw, cplx(0.9, 0.2));
  cfg.master_seed = seed;
  return cfg;
}

bool same_bits(const ReplicaResult& a, const ReplicaResult& b) {
  auto eq = [](const auto& x, const auto& y) {
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(x[0])) == 0;
  };
  return eq(a.z, b.z) && eq(a.w, b.w) && eq(a.dw, b.dw) && eq(a.min_v, b.min_v) &&
         a.population == b.population && a.nodes == b.nodes;
}

}  // namespace

TEST_CASE("replicas are reproducible and independent of the thread count") {
  SimConfig cfg = basic_config(8, 4);
  cfg.boundary = solve_theta_star(kLaw);
  const auto one = run_replicas(kLaw, cfg, 0, 12, 1);
  const auto three = run_replicas(kLaw, cfg, 0, 12, 3);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(same_bits(one[i], three[i]));
  cfg.replica_index = 5;
  CHECK(same_bits(run_replica(kLaw, cfg), one[5]));
  CHECK_FALSE(same_bits(one[0], one[1]));
}

TEST_CASE("Z_d, W_d and dW_d agree with a brute-force generation sum") {
  SimConfig cfg = basic_config(9, 0, 17);
  const BoundaryParams bp = solve_theta_star(kLaw);
  cfg.boundary = bp;
  cfg.replica_index = 2;
  const ReplicaResult r = run_replica(kLaw, cfg);
  for (int d : {0, 1, 5, 9}) {
    const Generation g = collect_generation(kLaw, 17, StreamTag::tree, 2, d);
    REQUIRE(g.pos.size() == r.population[static_cast<std::size_t>(d)]);
    for (std::size_t p = 0; p < cfg.params.size(); ++p) {
      const cplx l = cfg.params[p].lambda();
      cplx z(0.0, 0.0);
      for (double x : g.pos) z += std::exp(-l * x);
      z /= std::pow(cfg.params[p].m_lambda(), d);
      CHECK(std::abs(r.Z(d, p) - z) < 1e-11 * (1.0 + std::abs(z)));
    }
    double w = 0.0, dw = 0.0, mv = INFINITY;
    for (double x : g.pos) {
      const double v = bp.theta_star * x + d * bp.log_m_theta_star;
      w += std::exp(-v);
      dw += v * std::exp(-v);
      mv = std::min(mv, v);
    }
    const auto ud = static_cast<std::size_t>(d);
    CHECK_THAT(r.w[ud], WithinRel(w, 1e-11));
    CHECK(std::abs(r.dw[ud] - dw) < 1e-10 * (1.0 + std::abs(dw)));
    CHECK_THAT(r.min_v[ud], WithinRel(mv, 1e-12));
    CHECK_THAT(r.sup_weight[ud], WithinRel(std::exp(-mv), 1e-11));
  }
}

TEST_CASE("on the stable boundary sum |L|^alpha equals W") {
  const double t = 0.9;
  const cplx l(t, oracle::kTheta - t);
  const double alpha = oracle::alpha(t);
  const BoundaryParams bp = solve_theta_star(kLaw);
  SimConfig cfg;
  cfg.depth_n = 8;
  cfg.params.emplace_back(kLaw, l);
  cfg.boundary = bp;
  cfg.master_seed = 4;
  const ReplicaResult r = run_replica(kLaw, cfg);
  const Generation g = collect_generation(kLaw, 4, StreamTag::tree, 0, 8);
  double s = 0.0;
  const double log_abs_m = std::log(std::abs(cfg.params[0].m_lambda()));
  for (double x : g.pos) s += std::exp(alpha * (-t * x - 8.0 * log_abs_m));
  CHECK_THAT(s, WithinRel(r.w[8], 1e-10));
}

TEST_CASE("Z_n(lambda) is a mean-one martingale") {
  SimConfig cfg = basic_config(6, 0, 23);
  cfg.params.pop_back();
  const std::size_t N = 4000;
  const auto reps = run_replicas(kLaw, cfg, 0, N, 2);
  // E|Z_6 - 1|^2 = sigma_lambda^2 (rho^6 - 1) / (rho - 1).
  const double rho = oracle::rho({0.3, 0.2});
  const double var = oracle::sigma_lambda_sq({0.3, 0.2}) * (std::pow(rho, 6) - 1.0) / (rho - 1.0);
  cplx mean(0.0, 0.0);
  for (const auto& r : reps) mean += r.Z(6);
  mean /= static_cast<double>(N);
  CHECK(std::abs(mean - 1.0) < 5.0 * std::sqrt(var / N));
}

TEST_CASE("tip records equal the k smallest brute-force positions") {
  const BoundaryParams bp = solve_theta_star(kLaw);
  SimConfig cfg = basic_config(10, 3, 31);
  cfg.boundary = bp;
  cfg.tip_k = 25;
  cfg.tip_window = 1.0;
  const ReplicaResult r = run_replica(kLaw, cfg);
  const Generation g = collect_generation(kLaw, 31, StreamTag::tree, 0, 10);
  std::vector<std::pair<double, std::uint64_t>> all;
  std::uint64_t in_window = 0;
  const double centering = 1.5 * std::log(10.0);
  for (std::size_t i = 0; i < g.pos.size(); ++i) {
    const double vc = bp.theta_star * g.pos[i] + 10.0 * bp.log_m_theta_star - centering;
    all.emplace_back(vc, i);
    in_window += vc <= 1.0;
  }
  std::sort(all.begin(), all.end());
  REQUIRE(r.tips.size() == 25);
  for (std::size_t k = 0; k < 25; ++k) {
    CHECK(r.tips[k].order == all[k].second);
    CHECK(std::abs(r.tips[k].v_centered - all[k].first) < 1e-9);
  }
  CHECK(r.tips_in_window == in_window);
}

TEST_CASE("subtree Z values recombine into Z_{n+m}") {
  // Keeping every depth-n individual, sum_u L(u) [Z_m]_u = Z_{n+m}.
  const BoundaryParams bp = solve_theta_star(kLaw);
  SimConfig cfg = basic_config(6, 4, 41);
  cfg.boundary = bp;
  cfg.tip_k = 64;
  const ReplicaResult r = run_replica(kLaw, cfg);
  REQUIRE(r.tips.size() == 64);
  const Generation g = collect_generation(kLaw, 41, StreamTag::tree, 0, 6);
  for (std::size_t p = 0; p < cfg.params.size(); ++p) {
    const cplx l = cfg.params[p].lambda(), m = cfg.params[p].m_lambda();
    cplx z(0.0, 0.0);
    for (const auto& t : r.tips) z += std::exp(-l * g.pos[t.order]) / std::pow(m, 6) * t.subtree_z[p];
    CHECK(std::abs(z - r.Z(10, p)) < 1e-10 * (1.0 + std::abs(z)));
  }
}

TEST_CASE("tip heap merge is order independent") {
  CounterRng rng(5, StreamTag::synthetic, 0);
  std::vector<sim_detail::TipCandidate> cands;
  for (std::uint64_t i = 0; i < 500; ++i) cands.push_back({std::floor(20.0 * rng.uniform()), i, {}, 0.0});
  TipHeap whole(40), a(40), b(40), c(40);
  for (const auto& x : cands) whole.push(x);
  for (std::size_t i = 0; i < cands.size(); ++i) (i % 3 == 0 ? a : i % 3 == 1 ? b : c).push(cands[i]);
  TipHeap ab = a, bc = b;
  ab.merge(b);
  ab.merge(c);
  bc.merge(c);
  bc.merge(a);
  auto key = [](const std::vector<sim_detail::TipCandidate>& v) {
    std::vector<std::pair<double, std::uint64_t>> k;
    for (const auto& x : v) k.emplace_back(x.v, x.order);
    return k;
  };
  CHECK(key(ab.sorted()) == key(whole.sorted()));
  CHECK(key(bc.sorted()) == key(whole.sorted()));
  CHECK(TipHeap(0).sorted().empty());
}

TEST_CASE("memory stays bounded by the depth, not the population") {
  SimConfig cfg;
  cfg.depth_n = 22;
  cfg.params.emplace_back(kLaw, cplx(0.3, 0.2));
  cfg.z_depths = {22};
  const ReplicaResult r = run_replica(kLaw, cfg);
  CHECK(r.population[22] == (std::uint64_t{1} << 22));
  const std::size_t bound = 24 * (sim_detail::kPiece * 2 + sim_detail::kPiece) + 1;
  CHECK(r.peak_arena_nodes <= bound);
  CHECK(r.peak_arena_nodes * 20 < r.population[22]);
  CHECK(std::isnan(r.Z(10).real()));
}

TEST_CASE("extinction with a random offspring count") {
  const ReproductionLaw law({0.3, 0.2, 0.5}, Gaussian{});
  SimConfig cfg;
  cfg.depth_n = 10;
  cfg.params.emplace_back(law, cplx(0.2, 0.1));
  cfg.master_seed = 8;
  const auto reps = run_replicas(law, cfg, 0, 300, 1);
  int extinct = 0;
  for (const auto& r : reps) {
    if (!r.extinct) continue;
    ++extinct;
    CHECK(r.population[10] == 0);
    CHECK(r.Z(10) == cplx(0.0, 0.0));
  }
  // Extinction probability q solves q = 0.3 + 0.2 q + 0.5 q^2, so q = 0.6.
  CHECK(extinct > 130);
  CHECK(extinct < 230);
}

TEST_CASE("configuration errors") {
  SimConfig cfg = basic_config(20, 10);
  try {
    run_replica(kLaw, cfg);
    FAIL("depth cap not enforced");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::cap_exceeded);
  }
  SimConfig tips = basic_config(5, 0);
  tips.tip_k = 3;
  CHECK_THROWS_AS(run_replica(kLaw, tips), Error);
  SimConfig neg = basic_config(5, 0);
  neg.extra_m = -1;
  CHECK_THROWS_AS(run_replica(kLaw, neg), Error);
  SimConfig zd = basic_config(5, 0);
  zd.z_depths = {6};
  CHECK_THROWS_AS(run_replica(kLaw, zd), Error);
}

TEST_CASE("residual helper") {
  SimConfig cfg = basic_config(4, 3);
  const ReplicaResult r = run_replica(kLaw, cfg);
  CHECK(residual(r, 0, 4, 2.0) == 2.0 * (r.Z(7) - r.Z(4)));
  CHECK(residual(r, 0, 4, 2.0, 0) == cplx(0.0, 0.0));
  CHECK_THROWS_AS(residual(r, 0, 5, 1.0), Error);
}
