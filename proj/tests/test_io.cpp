#include <catch_amalgamated.hpp>

#include <filesystem>

#include "brw/io.hpp"
#include "oracles.hpp"

using namespace brw;

namespace {
const ReproductionLaw kLaw = ReproductionLaw::binary_gaussian();

std::size_t count(const std::string& s, const std::string& part) {
  std::size_t n = 0;
  for (auto p = s.find(part); p != std::string::npos; p = s.find(part, p + 1)) ++n;
  return n;
}
}  // namespace

TEST_CASE("empty grid gives a header-only CSV") {
  const RegimeGrid g = regime_map(kLaw, {}, {});
  CHECK(regime_grid_csv(g) == "# schema: brw-regime-map/1\ntheta,eta,regime,alpha\n");
  const std::string svg = regime_map_svg(g);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count(svg, "<text") == 5);  // legend only
}

TEST_CASE("regime map CSV rows and alpha column") {
  const double t = 0.9;
  const RegimeGrid g = regime_map(kLaw, {0.3, t}, {0.2, oracle::kTheta - t});
  const std::string csv = regime_grid_csv(g);
  CHECK(count(csv, "\n") == 2 + 4);
  // Both theta = 0.3 points lie inside the disc.
  CHECK(count(csv, ",gaussian,\n") == 2);
  CHECK(count(csv, ",extremal,\n") == 1);
  CHECK(count(csv, ",stable_boundary,1.3082") == 1);
}

TEST_CASE("regime map SVG is stable and has a fixed view box") {
  const RegimeGrid g = regime_map(kLaw, linspace(-2.5, 2.5, 41), linspace(-2.5, 2.5, 41));
  const std::string a = regime_map_svg(g), b = regime_map_svg(g);
  CHECK(a == b);
  CHECK(a.find("viewBox=\"0 0 880.0000 670.0000\"") != std::string::npos);
  for (const char* name : {"gaussian", "gaussian_boundary", "extremal", "stable_boundary", "out_of_theory"})
    CHECK(a.find(std::string(">") + name + "</text>") != std::string::npos);
  CHECK(a.find(regime_color(Regime::extremal)) != std::string::npos);
}

TEST_CASE("snail CSV for the order-20 group has 20 polylines") {
  const cplx l = oracle::order20_lambda();
  const auto curves = snail_curves(compute_group(kLaw, l), l);
  const std::string csv = snail_csv(curves);
  CHECK(csv.rfind("# schema: brw-snail/1\ncurve,point,re,im\n", 0) == 0);
  CHECK(count(csv, "\n") == 2 + 20 * 100);
  CHECK(count(csv, "\n20,99,") == 1);
}

TEST_CASE("replica dump and tip CSVs") {
  SimConfig cfg;
  cfg.depth_n = 3;
  cfg.extra_m = 1;
  cfg.params.emplace_back(kLaw, cplx(0.3, 0.2));
  cfg.boundary = solve_theta_star(kLaw);
  cfg.tip_k = 2;
  const auto reps = run_replicas(kLaw, cfg, 0, 2, 1);
  const std::string dump = replica_dump_csv(reps);
  CHECK(count(dump, "\n") == 2 + 2 * 5);
  CHECK(dump.find("\n1,4,0,") != std::string::npos);
  const std::string tips = tips_csv(reps, 10);
  CHECK(count(tips, "\n") == 2 + 2 * 2);
  CHECK(tips.find("\n11,1,") != std::string::npos);
}

TEST_CASE("file helpers report the path on failure") {
  const auto dir = std::filesystem::temp_directory_path() / "brw_io_test";
  std::filesystem::remove_all(dir);
  const auto file = dir / "nested" / "x.csv";
  write_file(file, "abc\n");
  CHECK(read_file(file) == "abc\n");
  try {
    read_file(dir / "missing.csv");
    FAIL("missing file read");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
    CHECK(std::string(e.what()).find("missing.csv") != std::string::npos);
  }
  CHECK_THROWS_AS(write_file(file / "below_a_file", "x"), Error);
  std::filesystem::remove_all(dir);
}
