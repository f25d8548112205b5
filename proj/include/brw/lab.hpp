#pragma once

// Monte Carlo experiments: residual samplers, reference-law samplers and the
// regime-specific comparisons built on them.

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "brw/error.hpp"
#include "brw/format.hpp"
#include "brw/model.hpp"
#include "brw/quantile.hpp"
#include "brw/regimes.hpp"
#include "brw/simulator.hpp"
#include "brw/stats.hpp"

namespace brw {

// ---------------------------------------------------------------------------
// Sample sets

struct SampleMeta {
  std::string kind;  // residual, gaussian_reference, boundary_reference, extremal_series, ...
  std::string law_id;
  cplx lambda{0.0, 0.0};
  int n = 0;
  int extra_m = 0;
  std::size_t replicas = 0;
  std::string regime;
  std::uint64_t seed = 0;
  std::size_t extinct_count = 0;
  std::vector<std::pair<std::string, std::string>> extra;  // further provenance
};

struct SampleSet {
  std::vector<cplx> samples;
  SampleMeta meta;
};

inline constexpr const char* kSampleSchema = "brw-samples/1";

inline std::string to_csv(const SampleSet& s) {
  std::string out = std::string("# schema: ") + kSampleSchema + "\n";
  auto kv = [&](const std::string& k, const std::string& v) { out += "# " + k + ": " + v + "\n"; };
  kv("kind", s.meta.kind);
  kv("law", s.meta.law_id);
  kv("lambda_re", fmt17(s.meta.lambda.real()));
  kv("lambda_im", fmt17(s.meta.lambda.imag()));
  kv("n", std::to_string(s.meta.n));
  kv("extra_m", std::to_string(s.meta.extra_m));
  kv("replicas", std::to_string(s.meta.replicas));
  kv("regime", s.meta.regime);
  kv("seed", std::to_string(s.meta.seed));
  kv("extinct_count", std::to_string(s.meta.extinct_count));
  for (const auto& [k, v] : s.meta.extra) kv("x." + k, v);
  out += "index,re,im\n";
  for (std::size_t i = 0; i < s.samples.size(); ++i)
    out += std::to_string(i) + "," + fmt17(s.samples[i].real()) + "," +
           fmt17(s.samples[i].imag()) + "\n";
  return out;
}

inline SampleSet sample_set_from_csv(const std::string& text) {
  SampleSet s;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  double lre = 0.0, lim = 0.0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::parse, "sample csv line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != std::string("# schema: ") + kSampleSchema) fail("missing or unknown schema");
      continue;
    }
    if (!header && line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) fail("malformed metadata");
      const std::string k = line.substr(2, colon - 2), v = line.substr(colon + 2);
      if (k == "kind") s.meta.kind = v;
      else if (k == "law") s.meta.law_id = v;
      else if (k == "lambda_re") lre = parse_double(v, k);
      else if (k == "lambda_im") lim = parse_double(v, k);
      else if (k == "n") s.meta.n = std::stoi(v);
      else if (k == "extra_m") s.meta.extra_m = std::stoi(v);
      else if (k == "replicas") s.meta.replicas = std::stoull(v);
      else if (k == "regime") s.meta.regime = v;
      else if (k == "seed") s.meta.seed = std::stoull(v);
      else if (k == "extinct_count") s.meta.extinct_count = std::stoull(v);
      else if (k.rfind("x.", 0) == 0) s.meta.extra.emplace_back(k.substr(2), v);
      else fail("unknown metadata key '" + k + "'");
      continue;
    }
    if (!header) {
      if (line != "index,re,im") fail("expected column header");
      header = true;
      continue;
    }
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) fail("expected 3 columns");
    if (std::stoull(line.substr(0, c1)) != s.samples.size()) fail("index out of sequence");
    s.samples.emplace_back(parse_double(line.substr(c1 + 1, c2 - c1 - 1), "re"),
                           parse_double(line.substr(c2 + 1), "im"));
  }
  if (!header) throw Error(ErrorKind::parse, "sample csv: no column header");
  s.meta.lambda = cplx(lre, lim);
  return s;
}

// ---------------------------------------------------------------------------
// Analytic second moments of the truncated residual (Gaussian regime)

/// E|a_n (Z_{n+m} - Z_n)|^2 = sigma_lambda^2 (1 - rho^m) / (1 - rho) with
/// rho = m(2 theta)/|m(lambda)|^2 and a_n = m(lambda)^n / m(2 theta)^{n/2}.
inline double gaussian_residual_abs2(const ReproductionLaw& law, cplx lambda, int m) {
  const ComplexParam p(law, lambda);
  const double rho = p.rho();
  return p.sigma_lambda_sq() * (1.0 - std::pow(rho, m)) / (1.0 - rho);
}

/// E[(a_n (Z_{n+m} - Z_n))^2] for the same a_n.
inline cplx gaussian_residual_pseudo2(const ReproductionLaw& law, cplx lambda, int n, int m) {
  const ComplexParam p(law, lambda);
  const cplx r = p.m_2lambda() / (p.m_lambda() * p.m_lambda());
  cplx geo(0.0, 0.0), pw(1.0, 0.0);
  for (int i = 0; i < m; ++i, pw *= r) geo += pw;
  return pseudo_sigma_lambda(law, lambda) * std::pow(p.m_2lambda() / p.m_2theta(), n) * geo;
}

// ---------------------------------------------------------------------------
// Samplers

struct SamplerOptions {
  std::uint64_t seed = 0;
  unsigned threads = default_threads();
};

inline std::string regime_string(const RegimeLabel& l) { return regime_name(l); }

/// Residuals a_n (Z_{n+m} - Z_n) for every n in n_grid, from one set of
/// N trees of depth max(n_grid) + extra_m.
inline std::vector<SampleSet> sample_residuals(const ReproductionLaw& law, cplx lambda,
                                               const RegimeLabel& label,
                                               const std::vector<int>& n_grid, int extra_m,
                                               std::size_t replicas, const SamplerOptions& opt) {
  if (n_grid.empty()) throw Error(ErrorKind::validation, "empty n grid");
  SimConfig cfg;
  cfg.depth_n = *std::max_element(n_grid.begin(), n_grid.end());
  cfg.extra_m = extra_m;
  cfg.params.emplace_back(law, lambda);
  cfg.master_seed = opt.seed;
  cfg.stream = StreamTag::tree;
  for (int n : n_grid) {
    cfg.z_depths.push_back(n);
    cfg.z_depths.push_back(n + extra_m);
  }
  std::vector<cplx> scale;
  for (int n : n_grid) scale.push_back(scaling_constant(label, law, lambda, n));

  std::vector<SampleSet> out(n_grid.size());
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    out[g].samples.resize(replicas);
    auto& m = out[g].meta;
    m.kind = "residual";
    m.law_id = law.id();
    m.lambda = lambda;
    m.n = n_grid[g];
    m.extra_m = extra_m;
    m.replicas = replicas;
    m.regime = regime_string(label);
    m.seed = opt.seed;
  }
  std::vector<std::vector<char>> extinct(n_grid.size(), std::vector<char>(replicas, 0));
  for_each_replica(law, cfg, 0, replicas, opt.threads, [&](std::size_t i, ReplicaResult&& r) {
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
      out[g].samples[i] = residual(r, 0, n_grid[g], scale[g], extra_m);
      extinct[g][i] = r.population[static_cast<std::size_t>(n_grid[g])] == 0;
    }
  });
  for (std::size_t g = 0; g < n_grid.size(); ++g)
    out[g].meta.extinct_count =
        static_cast<std::size_t>(std::count(extinct[g].begin(), extinct[g].end(), 1));
  return out;
}

inline SampleSet sample_residuals(const ReproductionLaw& law, cplx lambda, const RegimeLabel& label,
                                  int n, int extra_m, std::size_t replicas,
                                  const SamplerOptions& opt) {
  return sample_residuals(law, lambda, label, std::vector<int>{n}, extra_m, replicas, opt).front();
}

/// Draws of the Gaussian-regime limit sigma_lambda/sqrt(1 - rho) sqrt(Z(2 theta)) X
/// with Z(2 theta) approximated by Z_{n_ref}(2 theta) from independent trees.
inline SampleSet sample_gaussian_reference(const ReproductionLaw& law, cplx lambda,
                                           std::size_t replicas, int n_ref,
                                           const SamplerOptions& opt,
                                           std::vector<double>* mixture = nullptr) {
  const RegimeLabel label = classify(law, lambda);
  const auto* g = std::get_if<GaussianInterior>(&label);
  if (!g) throw Error(ErrorKind::precondition, "gaussian reference needs a Gaussian-interior lambda");
  if (g->degenerate) throw Error(ErrorKind::degenerate, "sigma_lambda^2 = 0");
  if (!g->nondegenerate_2theta)
    throw Error(ErrorKind::degenerate, "2 theta >= theta*: Z(2 theta) = 0 a.s., degenerate limit");
  const ComplexParam p(law, lambda);
  const double c = std::sqrt(p.sigma_lambda_sq() / (1.0 - p.rho()));

  SimConfig cfg;
  cfg.depth_n = n_ref;
  cfg.params.emplace_back(law, cplx(2.0 * lambda.real(), 0.0));
  cfg.master_seed = opt.seed;
  cfg.stream = StreamTag::reference_tree;
  cfg.z_depths = {n_ref};
  SampleSet s;
  s.samples.resize(replicas);
  std::vector<double> mix(replicas);
  std::vector<char> extinct(replicas, 0);
  for_each_replica(law, cfg, 0, replicas, opt.threads, [&](std::size_t i, ReplicaResult&& r) {
    const double z2 = std::max(0.0, r.Z(n_ref, 0).real());
    mix[i] = c * std::sqrt(z2);
    extinct[i] = r.extinct;
  });
  for (std::size_t i = 0; i < replicas; ++i) {
    CounterRng rng(opt.seed, StreamTag::normals, i);
    const cplx x = g->limit_is_complex
                       ? cplx(rng.normal(), rng.normal()) * (0.5 * std::numbers::sqrt2)
                       : cplx(rng.normal(), 0.0);
    s.samples[i] = mix[i] * x;
  }
  s.meta = {"gaussian_reference", law.id(), lambda, n_ref, 0, replicas, regime_string(label),
            opt.seed, static_cast<std::size_t>(std::count(extinct.begin(), extinct.end(), 1)), {}};
  s.meta.extra.emplace_back("limit_is_complex", g->limit_is_complex ? "true" : "false");
  if (mixture) *mixture = std::move(mix);
  return s;
}

/// Draws of the boundary-case limit sqrt(2/pi) (sigma_lambda/sigma)/sqrt(1 - rho) sqrt(D) X
/// with D approximated by the derivative martingale dW_{n_ref}; negative
/// approximants are redrawn from fresh trees and counted.
inline SampleSet sample_boundary_reference(const ReproductionLaw& law, cplx lambda,
                                           std::size_t replicas, int n_ref,
                                           const SamplerOptions& opt) {
  const RegimeLabel label = classify(law, lambda);
  const auto* g = std::get_if<GaussianBoundary>(&label);
  if (!g) throw Error(ErrorKind::precondition, "boundary reference needs a Gaussian-boundary lambda");
  const ComplexParam p(law, lambda);
  const double c = std::sqrt(2.0 / std::numbers::pi) *
                   std::sqrt(p.sigma_lambda_sq() / g->boundary.sigma_sq) /
                   std::sqrt(1.0 - p.rho());
  SimConfig cfg;
  cfg.depth_n = n_ref;
  cfg.master_seed = opt.seed;
  cfg.stream = StreamTag::boundary_tree;
  cfg.boundary = g->boundary;
  std::vector<double> d(replicas);
  for_each_replica(law, cfg, 0, replicas, opt.threads, [&](std::size_t i, ReplicaResult&& r) {
    d[i] = r.dw[static_cast<std::size_t>(n_ref)];
  });
  std::size_t rejections = 0;
  ReplicaRunner runner;
  for (std::size_t i = 0; i < replicas; ++i) {
    for (std::uint64_t attempt = 1; d[i] < 0.0; ++attempt) {
      ++rejections;
      cfg.replica_index = (std::uint64_t{1} << 40) + i * 4096 + attempt;
      d[i] = runner.run(law, cfg).dw[static_cast<std::size_t>(n_ref)];
    }
  }
  SampleSet s;
  s.samples.resize(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    CounterRng rng(opt.seed, StreamTag::normals, (std::uint64_t{1} << 40) + i);
    const cplx x = g->limit_is_complex
                       ? cplx(rng.normal(), rng.normal()) * (0.5 * std::numbers::sqrt2)
                       : cplx(rng.normal(), 0.0);
    s.samples[i] = c * std::sqrt(d[i]) * x;
  }
  s.meta = {"boundary_reference", law.id(), lambda, n_ref, 0, replicas, regime_string(label),
            opt.seed, 0, {}};
  s.meta.extra.emplace_back("rejections", std::to_string(rejections));
  return s;
}

/// f_K: 1 on (-inf, K], linear on [K, K+1], 0 on [K+1, inf).
inline double f_window(double K, double x) {
  if (x <= K) return 1.0;
  if (x >= K + 1.0) return 0.0;
  return K + 1.0 - x;
}

struct SeriesOptions {
  int tip_n = 18;
  int extra_m = 8;  // depth of the independent Z(lambda) - 1 surrogates
};

/// Truncated extremal series sum_k e^{-(lambda/theta*) P_k} f_K(P_k) Z^(k), one
/// SampleSet per K. The atoms P_k are the centered depth-tip_n positions of one
/// tree per replica; the Z^(k) are Z_{extra_m}(lambda) - 1 of fresh trees.
/// Atoms are streamed from the walk, so every atom below max K + 1 is used.
inline std::vector<SampleSet> sample_extremal_series(const ReproductionLaw& law, cplx lambda,
                                                     std::size_t replicas,
                                                     const std::vector<double>& K_grid,
                                                     const SeriesOptions& so,
                                                     const SamplerOptions& opt) {
  if (K_grid.empty()) throw Error(ErrorKind::validation, "empty K grid");
  if (so.tip_n < 1) throw Error(ErrorKind::validation, "tip_n must be >= 1");
  const RegimeLabel label = classify(law, lambda);
  const auto* ex = std::get_if<Extremal>(&label);
  if (!ex) throw Error(ErrorKind::precondition, "extremal series needs an extremal lambda");
  const double window = *std::max_element(K_grid.begin(), K_grid.end()) + 1.0;
  const cplx expo = lambda / ex->boundary.theta_star;
  const double ts = ex->boundary.theta_star;
  const double shift = so.tip_n * ex->boundary.log_m_theta_star - 1.5 * std::log(static_cast<double>(so.tip_n));

  SimConfig tree;
  tree.depth_n = so.tip_n;
  tree.master_seed = opt.seed;
  tree.stream = StreamTag::series_tips;
  validate(tree, law);

  SimConfig copy;
  copy.depth_n = so.extra_m;
  copy.params.emplace_back(law, lambda);
  copy.master_seed = opt.seed;
  copy.stream = StreamTag::series_copies;
  copy.z_depths = {so.extra_m};
  validate(copy, law);

  std::vector<std::vector<cplx>> sums(K_grid.size(), std::vector<cplx>(replicas));
  std::vector<std::uint64_t> atoms(replicas, 0);
  const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(replicas)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    sim_detail::Walker walker;
    ReplicaRunner runner;
    SimConfig c = copy;
    std::vector<double> in_window;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= replicas || failed.load()) return;
      try {
        in_window.clear();
        const auto keys = sim_detail::tree_keys(opt.seed, StreamTag::series_tips, i);
        walker.walk(law, keys, keys.root, 0.0, 0, so.tip_n, [&](int d, const sim_detail::NodeView& v) {
          if (d != so.tip_n) return;
          for (std::size_t j = 0; j < v.size; ++j) {
            const double P = ts * v.pos[j] + shift;
            if (P < window) in_window.push_back(P);
          }
        });
        atoms[i] = in_window.size();
        for (std::size_t k = 0; k < in_window.size(); ++k) {
          const double P = in_window[k];
          c.replica_index = (static_cast<std::uint64_t>(i) << 32) + k;
          const cplx w = std::exp(-expo * P) * (runner.run(law, c).Z(so.extra_m, 0) - 1.0);
          for (std::size_t g = 0; g < K_grid.size(); ++g) sums[g][i] += f_window(K_grid[g], P) * w;
        }
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const std::uint64_t most = *std::max_element(atoms.begin(), atoms.end());
  std::vector<SampleSet> out;
  for (std::size_t g = 0; g < K_grid.size(); ++g) {
    SampleSet s;
    s.samples = std::move(sums[g]);
    s.meta = {"extremal_series", law.id(), lambda, so.tip_n, so.extra_m, replicas,
              regime_string(label), opt.seed, 0, {}};
    s.meta.extra.emplace_back("K", fmt17(K_grid[g]));
    s.meta.extra.emplace_back("max_window_atoms", std::to_string(most));
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seneta-Heyde and stable-boundary probes

struct SenetaHeydeRow {
  int n = 0;
  double median = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // extinct replicas
};

struct SenetaHeydeTable {
  std::vector<SenetaHeydeRow> rows;
  double target = 0.0;  // c = sqrt(2 / (pi sigma^2))
};

inline SenetaHeydeTable seneta_heyde_check(const ReproductionLaw& law, const BoundaryParams& bp,
                                           const std::vector<int>& n_grid, std::size_t replicas,
                                           const SamplerOptions& opt) {
  if (n_grid.empty()) throw Error(ErrorKind::validation, "empty n grid");
  SimConfig cfg;
  cfg.depth_n = *std::max_element(n_grid.begin(), n_grid.end());
  cfg.boundary = bp;
  cfg.master_seed = opt.seed;
  cfg.stream = StreamTag::boundary_tree;
  std::vector<std::vector<double>> ratio(n_grid.size(), std::vector<double>(replicas));
  std::vector<std::vector<char>> dead(n_grid.size(), std::vector<char>(replicas, 0));
  for_each_replica(law, cfg, 0, replicas, opt.threads, [&](std::size_t i, ReplicaResult&& r) {
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
      const auto n = static_cast<std::size_t>(n_grid[g]);
      dead[g][i] = r.population[n] == 0;
      ratio[g][i] = std::sqrt(static_cast<double>(n)) * r.w[n] / r.dw[n];
    }
  });
  SenetaHeydeTable t;
  t.target = bp.c;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    std::vector<double> keep;
    for (std::size_t i = 0; i < replicas; ++i)
      if (!dead[g][i]) keep.push_back(ratio[g][i]);
    SenetaHeydeRow row;
    row.n = n_grid[g];
    row.used = keep.size();
    row.excluded = replicas - keep.size();
    row.median = keep.empty() ? std::numeric_limits<double>::quiet_NaN() : median(keep);
    t.rows.push_back(row);
  }
  return t;
}

struct StableProbe {
  double alpha_target = 0.0;
  cplx w{1.0, 0.0};
  HillResult hill;
  std::vector<std::pair<int, double>> iqr;  // (n, IQR of |n^{w/(2 alpha)} (Z_{n+m} - Z_n)|)
  SampleSet magnitudes;  // |Z_{hill_n}(lambda)| as real samples
  std::vector<SampleSet> residuals;
};

struct StableOptions {
  std::vector<int> n_grid{10, 18};
  int extra_m = 8;
  std::size_t residual_replicas = 200;
  int hill_n = 18;
  std::size_t hill_replicas = 20000;
  int hill_k = 500;
};

inline StableProbe stable_boundary_probe(const ReproductionLaw& law, cplx lambda,
                                         const StableOptions& so, const SamplerOptions& opt) {
  const RegimeLabel label = classify(law, lambda);
  const auto* sb = std::get_if<StableBoundary>(&label);
  if (!sb) throw Error(ErrorKind::precondition, "stable probe needs a stable-boundary lambda");
  StableProbe out;
  out.alpha_target = sb->alpha;
  out.w = sb->w;

  SimConfig cfg;
  cfg.depth_n = so.hill_n;
  cfg.params.emplace_back(law, lambda);
  cfg.master_seed = opt.seed;
  cfg.stream = StreamTag::reference_tree;
  cfg.z_depths = {so.hill_n};
  std::vector<double> mags(so.hill_replicas);
  out.magnitudes.samples.resize(so.hill_replicas);
  for_each_replica(law, cfg, 0, so.hill_replicas, opt.threads,
                   [&](std::size_t i, ReplicaResult&& r) {
                     mags[i] = std::abs(r.Z(so.hill_n, 0));
                     out.magnitudes.samples[i] = cplx(mags[i], 0.0);
                   });
  out.magnitudes.meta = {"abs_Z", law.id(), lambda, so.hill_n, 0, so.hill_replicas,
                         regime_string(label), opt.seed, 0, {}};
  std::vector<double> positive;
  for (double m : mags)
    if (m > 0.0) positive.push_back(m);
  out.hill = hill_estimator(positive, so.hill_k);

  out.residuals =
      sample_residuals(law, lambda, label, so.n_grid, so.extra_m, so.residual_replicas, opt);
  for (std::size_t g = 0; g < so.n_grid.size(); ++g) {
    std::vector<double> a;
    for (const auto& z : out.residuals[g].samples) a.push_back(std::abs(z));
    out.iqr.emplace_back(so.n_grid[g], iqr(a));
  }
  return out;
}

/// Fraction of random half-splits of one sample whose energy test has p > alpha.
inline double energy_split_pass_rate(const std::vector<cplx>& z, int repetitions, int resamples,
                                     double alpha, std::uint64_t seed) {
  int pass = 0;
  std::vector<cplx> v(z);
  for (int r = 0; r < repetitions; ++r) {
    CounterRng rng(seed, StreamTag::permutation, (std::uint64_t{1} << 32) + r);
    for (std::size_t i = v.size() - 1; i > 0; --i) std::swap(v[i], v[rng.below(i + 1)]);
    const std::size_t h = v.size() / 2;
    const std::vector<cplx> a(v.begin(), v.begin() + h), b(v.begin() + h, v.end());
    if (energy_test(a, b, resamples, seed + r).p_value > alpha) ++pass;
  }
  return static_cast<double>(pass) / repetitions;
}

// ---------------------------------------------------------------------------
// Experiments

enum class ExperimentKind { gaussian, gaussian_boundary, extremal, stable_boundary, seneta_heyde, minimum };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::gaussian: return "gaussian";
    case ExperimentKind::gaussian_boundary: return "gaussian_boundary";
    case ExperimentKind::extremal: return "extremal";
    case ExperimentKind::stable_boundary: return "stable_boundary";
    case ExperimentKind::seneta_heyde: return "seneta_heyde";
    case ExperimentKind::minimum: return "minimum";
  }
  return "?";
}

inline ExperimentKind experiment_kind_from(const std::string& s) {
  for (auto k : {ExperimentKind::gaussian, ExperimentKind::gaussian_boundary,
                 ExperimentKind::extremal, ExperimentKind::stable_boundary,
                 ExperimentKind::seneta_heyde, ExperimentKind::minimum})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::validation, "experiment.kind: unknown kind '" + s + "'");
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::gaussian;
  ReproductionLaw law = ReproductionLaw::binary_gaussian();
  cplx lambda{0.3, 0.2};
  std::vector<int> n_grid{12};
  int extra_m = 8;
  std::size_t replicas = 2000;
  std::size_t reference_replicas = 2000;
  int resamples = kDefaultResamples;
  int n_ref = 18;
  // extremal
  int tip_n = 18;
  double K = 6.0;
  std::vector<double> K_sweep{4.0, 6.0, 8.0};
  // stable boundary
  int hill_n = 18;
  std::size_t hill_replicas = 20000;
  int hill_k = 500;
  std::size_t iqr_replicas = 200;
  std::uint64_t seed = 1;
  unsigned threads = default_threads();
  ClassifyOptions classify{};
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentReport {
  std::vector<std::pair<std::string, std::string>> body;
  std::vector<std::pair<std::string, std::string>> timing;
  std::vector<CheckResult> checks;
  std::vector<SampleSet> samples;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }

  void put(const std::string& k, const std::string& v) { body.emplace_back(k, v); }
  void put(const std::string& k, double v) { body.emplace_back(k, fmt17(v)); }
  void check(const std::string& name, bool pass, const std::string& detail) {
    checks.push_back({name, pass, detail});
  }

  /// Deterministic body: identical inputs and seeds give identical text.
  std::string body_text() const {
    std::string s;
    for (const auto& [k, v] : body) s += k + ": " + v + "\n";
    for (const auto& c : checks)
      s += "check." + c.name + ": " + (c.pass ? "pass" : "FAIL") + " (" + c.detail + ")\n";
    s += std::string("overall: ") + (all_pass() ? "pass" : "FAIL") + "\n";
    return s;
  }

  std::string text() const {
    std::string s = body_text();
    for (const auto& [k, v] : timing) s += "timing." + k + ": " + v + "\n";
    return s;
  }
};

namespace lab_detail {

inline bool compatible(ExperimentKind k, const RegimeLabel& l) {
  switch (k) {
    case ExperimentKind::gaussian: return std::holds_alternative<GaussianInterior>(l);
    case ExperimentKind::gaussian_boundary: return std::holds_alternative<GaussianBoundary>(l);
    case ExperimentKind::extremal: return std::holds_alternative<Extremal>(l);
    case ExperimentKind::stable_boundary: return std::holds_alternative<StableBoundary>(l);
    default: return true;
  }
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline std::string se_ratio(double diff, double se) {
  return fmt17(se > 0.0 ? diff / se : std::numeric_limits<double>::infinity()) + " SE";
}

inline void put_moments(ExperimentReport& rep, const std::string& prefix, const MomentSummary& m) {
  rep.put(prefix + ".mean", fmt_complex(m.mean.value));
  rep.put(prefix + ".mean_se", fmt_complex(m.mean.se));
  rep.put(prefix + ".abs2", m.abs2.value);
  rep.put(prefix + ".abs2_se", m.abs2.se);
  rep.put(prefix + ".pseudo2", fmt_complex(m.pseudo2.value));
  rep.put(prefix + ".pseudo2_se", fmt_complex(m.pseudo2.se));
}

inline double complex_se_norm(cplx v, cplx se) {
  const double s = std::hypot(se.real(), se.imag());
  return s > 0.0 ? std::abs(v) / s : std::numeric_limits<double>::infinity();
}

}  // namespace lab_detail

inline void validate(const ExperimentSpec& s) {
  if (s.n_grid.empty()) throw Error(ErrorKind::validation, "experiment.n_grid must not be empty");
  for (int n : s.n_grid)
    if (n < 1) throw Error(ErrorKind::validation, "experiment.n_grid entries must be >= 1");
  if (s.extra_m < 0) throw Error(ErrorKind::validation, "experiment.extra_m must be >= 0");
  if (s.replicas < 2) throw Error(ErrorKind::validation, "experiment.replicas must be >= 2");
  if (s.resamples < 200) throw Error(ErrorKind::validation, "experiment.resamples must be >= 200");
  if (s.lambda.real() < 0.0)
    throw Error(ErrorKind::validation, "experiment.lambda needs theta >= 0 (mirror the law)");
}

inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  using namespace lab_detail;
  validate(spec);
  ExperimentReport rep;
  Stopwatch sw;
  const SamplerOptions opt{spec.seed, spec.threads};
  const auto& law = spec.law;
  rep.put("experiment", to_string(spec.kind));
  rep.put("law", law.id());
  rep.put("seed", std::to_string(spec.seed));

  const bool needs_label = spec.kind != ExperimentKind::seneta_heyde &&
                           spec.kind != ExperimentKind::minimum;
  std::optional<RegimeLabel> label;
  if (needs_label) {
    label = classify(law, spec.lambda, spec.classify);
    rep.put("lambda", fmt_complex(spec.lambda));
    rep.put("regime", regime_name(*label));
    if (!compatible(spec.kind, *label))
      throw Error(ErrorKind::validation, std::string("experiment kind ") + to_string(spec.kind) +
                                             " does not match the regime of lambda (" +
                                             regime_name(*label) + ")");
  }
  const int n = spec.n_grid.front();

  switch (spec.kind) {
    case ExperimentKind::gaussian:
    case ExperimentKind::gaussian_boundary: {
      const bool boundary = spec.kind == ExperimentKind::gaussian_boundary;
      SampleSet res = sample_residuals(law, spec.lambda, *label, n, spec.extra_m, spec.replicas, opt);
      rep.timing.emplace_back("residuals_s", fmt17(sw.lap()));
      std::vector<double> mixture;
      SampleSet ref = boundary ? sample_boundary_reference(law, spec.lambda,
                                                           spec.reference_replicas, spec.n_ref, opt)
                               : sample_gaussian_reference(law, spec.lambda,
                                                           spec.reference_replicas, spec.n_ref,
                                                           opt, &mixture);
      rep.timing.emplace_back("reference_s", fmt17(sw.lap()));
      const ComplexParam p(law, spec.lambda);
      rep.put("n", std::to_string(n));
      rep.put("extra_m", std::to_string(spec.extra_m));
      rep.put("replicas", std::to_string(spec.replicas));
      rep.put("n_ref", std::to_string(spec.n_ref));
      rep.put("sigma_lambda_sq", p.sigma_lambda_sq());
      rep.put("rho", p.rho());
      const MomentSummary ms = moment_summary(res.samples);
      put_moments(rep, "residual", ms);
      const MomentSummary mr = moment_summary(ref.samples);
      put_moments(rep, "reference", mr);

      rep.check("residual_mean_zero", complex_se_norm(ms.mean.value, ms.mean.se) < 4.0,
                "|mean| = " + fmt17(complex_se_norm(ms.mean.value, ms.mean.se)) + " SE");
      if (!boundary) {
        const double target = gaussian_residual_abs2(law, spec.lambda, spec.extra_m);
        rep.put("oracle.abs2", target);
        rep.check("second_moment_identity", std::abs(ms.abs2.value - target) < 3.0 * ms.abs2.se,
                  se_ratio(ms.abs2.value - target, ms.abs2.se));
        const cplx pseudo = gaussian_residual_pseudo2(law, spec.lambda, n, spec.extra_m);
        rep.put("oracle.pseudo2", fmt_complex(pseudo));
      }
      const auto* gi = std::get_if<GaussianInterior>(&*label);
      const auto* gb = std::get_if<GaussianBoundary>(&*label);
      const bool complex_limit = gi ? gi->limit_is_complex : gb->limit_is_complex;
      if (complex_limit) {
        const double z = complex_se_norm(ms.pseudo2.value, ms.pseudo2.se);
        rep.check("pseudo_moment_vanishes", z < 3.0, "|pseudo2| = " + fmt17(z) + " SE");
      } else {
        const double d = std::abs(ms.pseudo2.value - ms.abs2.value);
        rep.check("pseudo_equals_absolute", d < 3.0 * ms.abs2.se, se_ratio(d, ms.abs2.se));
      }
      const TestReport et = energy_test(res.samples, ref.samples, spec.resamples, spec.seed);
      rep.put("energy.statistic", et.statistic);
      rep.put("energy.p_value", et.p_value);
      rep.check("energy_test", et.p_value > 0.01, "p = " + fmt17(et.p_value));
      if (!boundary && !mixture.empty()) {
        // Divide each residual by an independently resampled mixture factor.
        std::vector<cplx> normalized;
        for (std::size_t i = 0; i < res.samples.size(); ++i) {
          const double f = mixture[(i * 7919 + 13) % mixture.size()];
          if (f > 0.0) normalized.push_back(res.samples[i] / f);
        }
        if (normalized.size() >= 100) {
          const TestReport cn = complex_normal_structure(normalized, 2000, spec.seed);
          rep.put("diagnostic.complex_normal_structure.statistic", cn.statistic);
          rep.put("diagnostic.complex_normal_structure.p_value", cn.p_value);
        }
      }
      rep.timing.emplace_back("tests_s", fmt17(sw.lap()));
      rep.samples.push_back(std::move(res));
      rep.samples.push_back(std::move(ref));
      break;
    }
    case ExperimentKind::extremal: {
      SampleSet res = sample_residuals(law, spec.lambda, *label, n, spec.extra_m, spec.replicas, opt);
      rep.timing.emplace_back("residuals_s", fmt17(sw.lap()));
      std::vector<double> ks = spec.K_sweep;
      if (std::find(ks.begin(), ks.end(), spec.K) == ks.end()) ks.push_back(spec.K);
      SeriesOptions so;
      so.tip_n = spec.tip_n;
      so.extra_m = spec.extra_m;
      auto series = sample_extremal_series(law, spec.lambda, spec.replicas, ks, so, opt);
      rep.timing.emplace_back("series_s", fmt17(sw.lap()));
      rep.put("n", std::to_string(n));
      rep.put("extra_m", std::to_string(spec.extra_m));
      rep.put("replicas", std::to_string(spec.replicas));
      rep.put("tip_n", std::to_string(spec.tip_n));
      rep.put("K", spec.K);
      put_moments(rep, "residual", moment_summary(res.samples));
      std::size_t main = 0;
      for (std::size_t g = 0; g < ks.size(); ++g) {
        put_moments(rep, "series_K" + fmt17(ks[g]), moment_summary(series[g].samples));
        if (ks[g] == spec.K) main = g;
      }
      const TestReport et = energy_test(res.samples, series[main].samples, spec.resamples, spec.seed);
      rep.put("energy.statistic", et.statistic);
      rep.put("energy.p_value", et.p_value);
      rep.check("energy_test", et.p_value > 0.01, "p = " + fmt17(et.p_value));
      // Partial-sum stabilization across consecutive K of the sweep.
      std::vector<std::size_t> order(ks.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](auto x, auto y) { return ks[x] < ks[y]; });
      std::vector<double> med;
      for (std::size_t j = 0; j + 1 < order.size(); ++j) {
        std::vector<double> d;
        for (std::size_t i = 0; i < spec.replicas; ++i)
          d.push_back(std::abs(series[order[j + 1]].samples[i] - series[order[j]].samples[i]));
        med.push_back(median(d));
        rep.put("series.median_abs_diff_K" + fmt17(ks[order[j]]) + "_K" + fmt17(ks[order[j + 1]]),
                med.back());
      }
      bool decreasing = med.size() >= 2;
      for (std::size_t j = 0; j + 1 < med.size(); ++j) decreasing = decreasing && med[j + 1] < med[j];
      rep.check("series_stabilizes", decreasing, "median |S_K' - S_K| decreasing along the sweep");
      rep.timing.emplace_back("tests_s", fmt17(sw.lap()));
      rep.samples.push_back(std::move(res));
      for (auto& s : series) rep.samples.push_back(std::move(s));
      break;
    }
    case ExperimentKind::stable_boundary: {
      StableOptions so;
      so.n_grid = spec.n_grid;
      so.extra_m = spec.extra_m;
      so.residual_replicas = spec.iqr_replicas;
      so.hill_n = spec.hill_n;
      so.hill_replicas = spec.hill_replicas;
      so.hill_k = spec.hill_k;
      StableProbe pr = stable_boundary_probe(law, spec.lambda, so, opt);
      rep.timing.emplace_back("simulation_s", fmt17(sw.lap()));
      rep.put("alpha_target", pr.alpha_target);
      rep.put("w", fmt_complex(pr.w));
      rep.put("hill.alpha_hat", pr.hill.alpha_hat);
      rep.put("hill.ci90", "[" + fmt17(pr.hill.ci_lo) + ", " + fmt17(pr.hill.ci_hi) + "]");
      rep.put("hill.k", std::to_string(pr.hill.k));
      rep.check("tail_index", std::abs(pr.hill.alpha_hat - pr.alpha_target) <= 0.2,
                "alpha_hat = " + fmt17(pr.hill.alpha_hat) + ", target " + fmt17(pr.alpha_target));
      for (const auto& [nn, q] : pr.iqr) rep.put("iqr.n" + std::to_string(nn), q);
      if (pr.iqr.size() >= 2) {
        const double ratio = pr.iqr.back().second / pr.iqr.front().second;
        rep.put("iqr.ratio", ratio);
        rep.check("scaling_tightness", ratio >= 0.5 && ratio <= 2.0, "ratio = " + fmt17(ratio));
      }
      rep.samples.push_back(std::move(pr.magnitudes));
      for (auto& s : pr.residuals) rep.samples.push_back(std::move(s));
      break;
    }
    case ExperimentKind::seneta_heyde: {
      const BoundaryParams bp = solve_theta_star(law, spec.classify.theta_star_bracket);
      const auto t = seneta_heyde_check(law, bp, spec.n_grid, spec.replicas, opt);
      rep.timing.emplace_back("simulation_s", fmt17(sw.lap()));
      rep.put("theta_star", bp.theta_star);
      rep.put("target_c", t.target);
      bool monotone = true;
      for (std::size_t g = 0; g < t.rows.size(); ++g) {
        const auto& r = t.rows[g];
        rep.put("median.n" + std::to_string(r.n), r.median);
        rep.put("excluded.n" + std::to_string(r.n), std::to_string(r.excluded));
        if (g > 0)
          monotone = monotone && std::abs(r.median - t.target) < std::abs(t.rows[g - 1].median - t.target);
      }
      rep.check("trend_toward_c", monotone && t.rows.size() >= 2,
                "|median - c| strictly decreasing along n");
      break;
    }
    case ExperimentKind::minimum: {
      const BoundaryParams bp = solve_theta_star(law, spec.classify.theta_star_bracket);
      const auto rows = sup_weight_trend(law, bp, spec.n_grid, spec.replicas, spec.seed, spec.threads);
      rep.timing.emplace_back("simulation_s", fmt17(sw.lap()));
      bool decreasing = rows.size() >= 2;
      for (std::size_t g = 0; g < rows.size(); ++g) {
        rep.put("median.n" + std::to_string(rows[g].n), rows[g].median);
        if (g > 0) decreasing = decreasing && rows[g].median < rows[g - 1].median;
      }
      rep.check("strictly_decreasing", decreasing, "median sqrt(n) sup e^{-V} along n");
      break;
    }
  }
  return rep;
}

}  // namespace brw
