#pragma once

// Depth-first branching random walk engine.
//
// A replica is traversed once, depth first, in pieces of at most kPiece
// siblings. Per depth it streams Z_d(lambda) for every requested parameter and,
// when a boundary normalization is supplied, the statistics of
// V(u) = theta* S(u) + |u| log m(theta*). Memory is bounded by
// depth * kPiece * N_max nodes regardless of the population size.
//
// Randomness is hierarchical: every node owns a 128-bit seed, and a child's
// seed, its displacement and its offspring count are Philox outputs keyed by
// the parent's seed. A subtree is therefore a pure function of its root's seed,
// which lets tips be regenerated exactly and makes results independent of
// traversal and thread scheduling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <thread>
#include <vector>

#include "brw/error.hpp"
#include "brw/model.hpp"
#include "brw/quantile.hpp"
#include "brw/regimes.hpp"
#include "brw/rng.hpp"
#include "brw/vecmath.hpp"

namespace brw {

struct SimConfig {
  int depth_n = 0;  // observation generation
  int extra_m = 0;  // extra generations: Z is approximated by Z_{n+m}
  std::vector<ComplexParam> params;
  int tip_k = 0;  // number of smallest depth-n records kept
  std::uint64_t master_seed = 0;
  std::uint64_t replica_index = 0;
  StreamTag stream = StreamTag::tree;
  /// Enables W, dW, min V and the tip records.
  std::optional<BoundaryParams> boundary;
  /// Count depth-n individuals with v_centered <= tip_window.
  std::optional<double> tip_window;
  /// Depths at which Z_d is accumulated; empty means every depth. Z at other
  /// depths is reported as NaN.
  std::vector<int> z_depths;
  int depth_cap = 26;
  double node_cap = 134217728.0;  // bound on E[N]^{n+m}
};

inline constexpr int kMaxTipK = 10000;

inline void validate(const SimConfig& cfg, const ReproductionLaw& law) {
  if (cfg.depth_n < 0 || cfg.extra_m < 0)
    throw Error(ErrorKind::validation, "depth_n and extra_m must be >= 0");
  const int depth = cfg.depth_n + cfg.extra_m;
  if (depth > cfg.depth_cap)
    throw Error(ErrorKind::cap_exceeded, "depth_n + extra_m = " + std::to_string(depth) +
                                             " exceeds the depth cap " +
                                             std::to_string(cfg.depth_cap));
  const double log_nodes = depth * std::log(law.mean_offspring());
  if (log_nodes > std::log(cfg.node_cap) * (1.0 + 1e-12))
    throw Error(ErrorKind::cap_exceeded, "expected node count E[N]^" + std::to_string(depth) +
                                             " exceeds the node cap");
  if (cfg.tip_k < 0 || cfg.tip_k > kMaxTipK)
    throw Error(ErrorKind::validation, "tip_k must lie in [0, 10000]");
  if ((cfg.tip_k > 0 || cfg.tip_window) && !cfg.boundary)
    throw Error(ErrorKind::precondition, "tip records need the boundary normalization");
  for (int d : cfg.z_depths)
    if (d < 0 || d > depth) throw Error(ErrorKind::validation, "z_depths entry out of range");
}

struct TipRecord {
  double v_centered = 0.0;  // V(u) - 1.5 log n
  std::vector<cplx> subtree_z;  // [Z_{extra_m}(lambda)]_u per parameter
  std::uint64_t order = 0;      // DFS rank among depth-n individuals
};

struct ReplicaResult {
  int depth_n = 0;
  int extra_m = 0;
  std::size_t n_params = 0;
  std::vector<cplx> z;  // z[d * n_params + p]
  std::vector<double> w, dw, min_v, sup_weight;
  std::vector<std::uint64_t> population;
  std::vector<TipRecord> tips;
  std::uint64_t tips_in_window = 0;
  bool extinct = false;
  std::uint64_t nodes = 0;
  std::size_t peak_arena_nodes = 0;

  int depth() const { return depth_n + extra_m; }
  cplx Z(int d, std::size_t p = 0) const { return z[static_cast<std::size_t>(d) * n_params + p]; }
};

namespace sim_detail {

inline constexpr std::size_t kPiece = 2048;

struct TreeKeys {
  PhiloxKey child;
  PhiloxKey disp;
  PhiloxKey count;
  Counter128 root;
};

inline TreeKeys tree_keys(std::uint64_t seed, StreamTag tag, std::uint64_t replica) {
  const PhiloxKey k = derive_key(seed, tag, replica);
  TreeKeys t;
  t.child = k;
  t.disp = {k.k0 ^ 0x3C6EF372u, k.k1 ^ 0xA54FF53Au};
  t.count = {k.k0 ^ 0x510E527Fu, k.k1 ^ 0x9B05688Cu};
  t.root = philox4x32({0x243F6A88u, 0x85A308D3u, 0x13198A2Eu, 0x03707344u}, k);
  return t;
}

struct NodeView {
  std::size_t size = 0;
  const double* pos = nullptr;
  const std::uint32_t* s[4] = {};
};

class Walker {
 public:
  /// Visits every node of the subtree rooted at (seed, pos, depth) down to
  /// last_depth, calling visit(depth, NodeView) once per piece. Pieces of the
  /// same depth arrive in DFS (lexicographic) order.
  template <class Visit>
  void walk(const ReproductionLaw& law, const TreeKeys& keys, const Counter128& seed, double pos,
            int depth, int last_depth, Visit&& visit) {
    const std::size_t fan = static_cast<std::size_t>(std::max(1, law.max_offspring()));
    const std::size_t cap =
        static_cast<std::size_t>(last_depth - depth + 2) * (kPiece * fan + kPiece) + 1;
    reserve(cap);
    size_ = 0;
    stack_.clear();
    push_node(seed, pos);
    stack_.push_back({depth, 0, 1, 1});
    while (!stack_.empty()) {
      const Piece pc = stack_.back();
      stack_.pop_back();
      size_ = pc.group_end;
      visit(pc.depth, view(pc.begin, pc.size));
      if (pc.depth == last_depth) continue;
      const std::size_t out0 = size_;
      const std::size_t t = expand(law, keys, pc, pc.depth + 1 < last_depth);
      const std::size_t group_end = out0 + t;
      peak_ = std::max(peak_, group_end);
      const std::size_t pieces = (t + kPiece - 1) / kPiece;
      for (std::size_t k = pieces; k-- > 0;) {
        const std::size_t b = out0 + k * kPiece;
        stack_.push_back({pc.depth + 1, b, std::min(kPiece, t - k * kPiece), group_end});
      }
    }
  }

  std::size_t peak_nodes() const { return peak_; }

 private:
  struct Piece {
    int depth;
    std::size_t begin;
    std::size_t size;
    std::size_t group_end;
  };

  void reserve(std::size_t n) {
    if (pos_.size() >= n) return;
    pos_.resize(n);
    for (auto& s : s_) s.resize(n);
  }

  void push_node(const Counter128& seed, double pos) {
    pos_[size_] = pos;
    for (int j = 0; j < 4; ++j) s_[j][size_] = seed[j];
    ++size_;
  }

  NodeView view(std::size_t b, std::size_t n) const {
    NodeView v;
    v.size = n;
    v.pos = pos_.data() + b;
    for (int j = 0; j < 4; ++j) v.s[j] = s_[j].data() + b;
    return v;
  }

  template <class T>
  static void ensure(std::vector<T>& v, std::size_t n) {
    if (v.size() < n) v.resize(n);
  }

  // Appends the children of piece pc at the arena end; returns their number.
  std::size_t expand(const ReproductionLaw& law, const TreeKeys& keys, const Piece& pc,
                     bool need_seeds) {
    const auto fixed = law.fixed_count();
    if (fixed && *fixed == 2) return expand_impl<2>(law, keys, pc, need_seeds);
    return expand_impl<0>(law, keys, pc, need_seeds);
  }

  // K > 0: every individual has exactly K children (compile-time fan-out).
  template <int K>
  std::size_t expand_impl(const ReproductionLaw& law, const TreeKeys& keys, const Piece& pc,
                          bool need_seeds) {
    const std::size_t np = pc.size, b0 = pc.begin;
    const auto depth_tag = static_cast<std::uint32_t>(pc.depth);
    ensure(counts_, np);
    ensure(child_off_, np + 1);
    ensure(block_off_, np + 1);
    int* __restrict cnt = counts_.data();
    if (K > 0) {
      std::fill_n(cnt, np, K);
    } else if (const auto fixed = law.fixed_count()) {
      std::fill_n(cnt, np, *fixed);
    } else {
      for (auto& c : c_) ensure(c, np);
      for (int j = 0; j < 4; ++j) std::copy_n(s_[j].data() + b0, np, c_[j].data());
      philox4x32_batch(c_[0].data(), c_[1].data(), c_[2].data(), c_[3].data(), np, keys.count);
      for (std::size_t i = 0; i < np; ++i)
        cnt[i] = law.count_from_uniform(u64_to_open_unit(join64(c_[0][i], c_[1][i])));
    }
    std::size_t* __restrict coff = child_off_.data();
    std::size_t* __restrict boff = block_off_.data();
    std::size_t total = np * static_cast<std::size_t>(K);
    std::size_t blocks = np * static_cast<std::size_t>((K + 1) / 2);
    if (K == 0) {
      std::size_t ct = 0, bt = 0;
      for (std::size_t i = 0; i < np; ++i) {
        coff[i] = ct;
        boff[i] = bt;
        const auto ci = static_cast<std::size_t>(cnt[i]);
        ct += ci;
        bt += (ci + 1) / 2;
      }
      coff[np] = total = ct;
      boff[np] = blocks = bt;
    }
    if (total == 0) return 0;
    const std::size_t out0 = size_;
    size_ += total;

    const std::uint32_t* __restrict p0 = s_[0].data() + b0;
    const std::uint32_t* __restrict p1 = s_[1].data() + b0;
    const std::uint32_t* __restrict p2 = s_[2].data() + b0;
    const std::uint32_t* __restrict p3 = s_[3].data() + b0;
    const double* __restrict ppos = pos_.data() + b0;
    double* __restrict opos = pos_.data() + out0;

    // Displacements in padded layout: block q holds siblings 2q and 2q + 1.
    const auto& fam = law.displacement();
    ensure(xp_, 2 * blocks);
    double* __restrict xp = xp_.data();
    if (const auto* pm = std::get_if<PointMass>(&fam)) {
      std::fill_n(xp, 2 * blocks, pm->x);
    } else {
      for (auto& c : c_) ensure(c, blocks);
      std::uint32_t* __restrict q0 = c_[0].data();
      std::uint32_t* __restrict q1 = c_[1].data();
      std::uint32_t* __restrict q2 = c_[2].data();
      std::uint32_t* __restrict q3 = c_[3].data();
      if (K == 2) {
        for (std::size_t i = 0; i < np; ++i) {
          q0[i] = p0[i];
          q1[i] = p1[i] ^ depth_tag;
          q2[i] = p2[i];
          q3[i] = p3[i];
        }
      } else {
        for (std::size_t i = 0; i < np; ++i)
          for (std::size_t b = 0; b < boff[i + 1] - boff[i]; ++b) {
            const std::size_t q = boff[i] + b;
            q0[q] = p0[i] ^ static_cast<std::uint32_t>(b);
            q1[q] = p1[i] ^ depth_tag;
            q2[q] = p2[i];
            q3[q] = p3[i];
          }
      }
      philox4x32_batch(q0, q1, q2, q3, blocks, keys.disp);
      ensure(t0_, blocks);
      ensure(t1_, blocks);
      ensure(xa_, blocks);
      ensure(xb_, blocks);
      double* __restrict t0 = t0_.data();
      double* __restrict t1 = t1_.data();
      double* __restrict xa = xa_.data();
      double* __restrict xb = xb_.data();
      if (const auto* g = std::get_if<Gaussian>(&fam)) {
        for (std::size_t k = 0; k < blocks; ++k) {
          t0[k] = u64_to_open_unit(join64(q0[k], q1[k]));
          t1[k] = 2.0 * std::numbers::pi * u64_to_open_unit(join64(q2[k], q3[k]));
        }
        vec::log({t0, blocks}, {t0, blocks});
        vec::cos({t1, blocks}, {xa, blocks});
        vec::sin({t1, blocks}, {xb, blocks});
        const double mu = g->mean, sd = g->sd;
        for (std::size_t k = 0; k < blocks; ++k) {
          const double r = sd * std::sqrt(-2.0 * t0[k]);
          xp[2 * k] = mu + r * xa[k];
          xp[2 * k + 1] = mu + r * xb[k];
        }
      } else {
        const auto& u = std::get<Uniform>(fam);
        const double width = u.b - u.a;
        for (std::size_t k = 0; k < blocks; ++k) {
          xp[2 * k] = u.a + width * u64_to_open_unit(join64(q0[k], q1[k]));
          xp[2 * k + 1] = u.a + width * u64_to_open_unit(join64(q2[k], q3[k]));
        }
      }
    }

    if (K == 2) {
      for (std::size_t i = 0; i < np; ++i) {
        opos[2 * i] = ppos[i] + xp[2 * i];
        opos[2 * i + 1] = ppos[i] + xp[2 * i + 1];
      }
    } else {
      for (std::size_t i = 0; i < np; ++i) {
        const double p = ppos[i];
        const double* __restrict xi = xp + 2 * boff[i];
        double* __restrict oi = opos + coff[i];
        const int ci = cnt[i];
        for (int j = 0; j < ci; ++j) oi[j] = p + xi[j];
      }
    }

    if (need_seeds) {
      std::uint32_t* __restrict o0 = s_[0].data() + out0;
      std::uint32_t* __restrict o1 = s_[1].data() + out0;
      std::uint32_t* __restrict o2 = s_[2].data() + out0;
      std::uint32_t* __restrict o3 = s_[3].data() + out0;
      if (K == 2) {
        for (std::size_t i = 0; i < np; ++i) {
          o0[2 * i] = p0[i];
          o0[2 * i + 1] = p0[i] ^ 1u;
          o1[2 * i] = o1[2 * i + 1] = p1[i] ^ depth_tag;
          o2[2 * i] = o2[2 * i + 1] = p2[i];
          o3[2 * i] = o3[2 * i + 1] = p3[i];
        }
      } else {
        for (std::size_t i = 0; i < np; ++i) {
          const std::size_t c0 = coff[i];
          const int ci = cnt[i];
          for (int j = 0; j < ci; ++j) {
            o0[c0 + j] = p0[i] ^ static_cast<std::uint32_t>(j);
            o1[c0 + j] = p1[i] ^ depth_tag;
            o2[c0 + j] = p2[i];
            o3[c0 + j] = p3[i];
          }
        }
      }
      philox4x32_batch(o0, o1, o2, o3, total, keys.child);
    }
    return total;
  }

  std::vector<double> pos_;
  std::vector<std::uint32_t> s_[4];
  std::size_t size_ = 0;
  std::size_t peak_ = 0;
  std::vector<Piece> stack_;
  std::vector<int> counts_;
  std::vector<std::size_t> child_off_, block_off_;
  std::vector<std::uint32_t> c_[4];
  std::vector<double> t0_, t1_, xa_, xb_, xp_;
};

// Per-parameter constants of e^{-lambda S}/m(lambda)^d.
struct ParamConst {
  double theta, eta, log_abs_m, arg_m;
  bool real;
};

inline ParamConst param_const(const ComplexParam& p) {
  return {p.theta(), p.eta(), std::log(std::abs(p.m_lambda())), std::arg(p.m_lambda()),
          p.eta() == 0.0 && p.m_lambda().imag() == 0.0};
}

/// Scratch-backed summation of sum_i e^{-lambda (x_i - shift)} / m(lambda)^d.
class ZKernel {
 public:
  cplx sum(const ParamConst& pc, const double* pos, std::size_t n, double shift, int d) {
    ensure(n);
    const double la = pc.log_abs_m * d;
    for (std::size_t i = 0; i < n; ++i) a_[i] = -pc.theta * (pos[i] - shift) - la;
    vec::exp({a_.data(), n}, {e_.data(), n});
    if (pc.real) return {vec::sum(e_.data(), n), 0.0};
    const double ph = std::remainder(pc.arg_m * d, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) a_[i] = -pc.eta * (pos[i] - shift) - ph;
    vec::cos({a_.data(), n}, {c_.data(), n});
    vec::sin({a_.data(), n}, {s_.data(), n});
    return {vec::dot(e_.data(), c_.data(), n), vec::dot(e_.data(), s_.data(), n)};
  }

  std::vector<double>& scratch_a() { return a_; }
  std::vector<double>& scratch_e() { return e_; }
  void ensure(std::size_t n) {
    if (a_.size() >= n) return;
    a_.resize(n);
    e_.resize(n);
    c_.resize(n);
    s_.resize(n);
  }

 private:
  std::vector<double> a_, e_, c_, s_;
};

struct TipCandidate {
  double v;
  std::uint64_t order;
  Counter128 seed;
  double pos;
};

struct TipLess {
  bool operator()(const TipCandidate& a, const TipCandidate& b) const {
    return a.v < b.v || (a.v == b.v && a.order < b.order);
  }
};

}  // namespace sim_detail

/// Bounded max-heap keeping the k smallest (v, order) candidates.
class TipHeap {
 public:
  explicit TipHeap(std::size_t k) : k_(k) {}

  bool admits(double v, std::uint64_t order) const {
    if (k_ == 0) return false;
    if (heap_.size() < k_) return true;
    return sim_detail::TipLess{}({v, order, {}, 0.0}, heap_.front());
  }

  void push(const sim_detail::TipCandidate& c) {
    if (!admits(c.v, c.order)) return;
    heap_.push_back(c);
    std::push_heap(heap_.begin(), heap_.end(), sim_detail::TipLess{});
    if (heap_.size() > k_) {
      std::pop_heap(heap_.begin(), heap_.end(), sim_detail::TipLess{});
      heap_.pop_back();
    }
  }

  void merge(const TipHeap& other) {
    for (const auto& c : other.heap_) push(c);
  }

  /// Candidates in ascending (v, order).
  std::vector<sim_detail::TipCandidate> sorted() const {
    auto out = heap_;
    std::sort(out.begin(), out.end(), sim_detail::TipLess{});
    return out;
  }

 private:
  std::size_t k_;
  std::vector<sim_detail::TipCandidate> heap_;
};

/// One replica: a single bounded-memory depth-first pass.
class ReplicaRunner {
 public:
  ReplicaResult run(const ReproductionLaw& law, const SimConfig& cfg) {
    validate(cfg, law);
    const int depth = cfg.depth_n + cfg.extra_m;
    const std::size_t np = cfg.params.size();
    ReplicaResult r;
    r.depth_n = cfg.depth_n;
    r.extra_m = cfg.extra_m;
    r.n_params = np;
    r.z.assign(static_cast<std::size_t>(depth + 1) * np, cplx(0.0, 0.0));
    r.population.assign(static_cast<std::size_t>(depth + 1), 0);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const bool bnd = cfg.boundary.has_value();
    r.w.assign(static_cast<std::size_t>(depth + 1), bnd ? 0.0 : nan);
    r.dw.assign(static_cast<std::size_t>(depth + 1), bnd ? 0.0 : nan);
    r.min_v.assign(static_cast<std::size_t>(depth + 1),
                   bnd ? std::numeric_limits<double>::infinity() : nan);

    std::vector<char> record(static_cast<std::size_t>(depth + 1), cfg.z_depths.empty() ? 1 : 0);
    for (int d : cfg.z_depths) record[static_cast<std::size_t>(d)] = 1;
    for (int d = 0; d <= depth; ++d)
      if (!record[static_cast<std::size_t>(d)])
        for (std::size_t p = 0; p < np; ++p) r.z[d * np + p] = cplx(nan, nan);

    std::vector<sim_detail::ParamConst> pcs;
    for (const auto& p : cfg.params) pcs.push_back(sim_detail::param_const(p));

    const double ts = bnd ? cfg.boundary->theta_star : 0.0;
    const double lmt = bnd ? cfg.boundary->log_m_theta_star : 0.0;
    const double centering = cfg.depth_n > 0 ? 1.5 * std::log(static_cast<double>(cfg.depth_n)) : 0.0;
    TipHeap heap(static_cast<std::size_t>(cfg.tip_k));
    std::uint64_t tip_order = 0;
    const auto keys = sim_detail::tree_keys(cfg.master_seed, cfg.stream, cfg.replica_index);

    kernel_.ensure(sim_detail::kPiece);
    walker_.walk(law, keys, keys.root, 0.0, 0, depth, [&](int d, const sim_detail::NodeView& v) {
      const auto ud = static_cast<std::size_t>(d);
      r.population[ud] += v.size;
      r.nodes += v.size;
      if (record[ud])
        for (std::size_t p = 0; p < np; ++p)
          r.z[ud * np + p] += kernel_.sum(pcs[p], v.pos, v.size, 0.0, d);
      if (!bnd) return;
      auto& a = kernel_.scratch_a();
      auto& e = kernel_.scratch_e();
      const double shift = d * lmt;
      for (std::size_t i = 0; i < v.size; ++i) a[i] = -(ts * v.pos[i] + shift);
      vec::exp({a.data(), v.size}, {e.data(), v.size});
      r.w[ud] += vec::sum(e.data(), v.size);
      r.dw[ud] -= vec::dot(a.data(), e.data(), v.size);
      r.min_v[ud] = std::min(r.min_v[ud], -*std::max_element(a.data(), a.data() + v.size));
      if (d == cfg.depth_n) {
        for (std::size_t i = 0; i < v.size; ++i) {
          const double vc = -a[i] - centering;
          if (cfg.tip_window && vc <= *cfg.tip_window) ++r.tips_in_window;
          if (heap.admits(vc, tip_order + i))
            heap.push({vc, tip_order + i, {v.s[0][i], v.s[1][i], v.s[2][i], v.s[3][i]}, v.pos[i]});
        }
        tip_order += v.size;
      }
    });
    r.peak_arena_nodes = walker_.peak_nodes();

    r.sup_weight.resize(r.min_v.size());
    for (std::size_t d = 0; d < r.min_v.size(); ++d)
      r.sup_weight[d] = bnd ? std::exp(-r.min_v[d]) : nan;
    r.extinct = r.population[static_cast<std::size_t>(cfg.depth_n)] == 0;

    for (const auto& c : heap.sorted()) {
      TipRecord t;
      t.v_centered = c.v;
      t.order = c.order;
      t.subtree_z = subtree_z(law, keys, c, cfg.depth_n, cfg.extra_m, pcs);
      r.tips.push_back(std::move(t));
    }
    return r;
  }

 private:
  std::vector<cplx> subtree_z(const ReproductionLaw& law, const sim_detail::TreeKeys& keys,
                              const sim_detail::TipCandidate& c, int n, int m,
                              const std::vector<sim_detail::ParamConst>& pcs) {
    std::vector<cplx> out(pcs.size(), cplx(m == 0 ? 1.0 : 0.0, 0.0));
    if (m == 0) return out;
    walker_.walk(law, keys, c.seed, c.pos, n, n + m, [&](int d, const sim_detail::NodeView& v) {
      if (d != n + m) return;
      for (std::size_t p = 0; p < pcs.size(); ++p)
        out[p] += kernel_.sum(pcs[p], v.pos, v.size, c.pos, m);
    });
    return out;
  }

  sim_detail::Walker walker_;
  sim_detail::ZKernel kernel_;
};

inline ReplicaResult run_replica(const ReproductionLaw& law, const SimConfig& cfg) {
  ReplicaRunner runner;
  return runner.run(law, cfg);
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs replicas first..first+count-1 of cfg (replica_index is overwritten)
/// and hands each result to sink(i, result). The sink runs on worker threads;
/// results depend only on the replica index.
inline void for_each_replica(const ReproductionLaw& law, SimConfig cfg, std::uint64_t first,
                             std::size_t count, unsigned threads,
                             const std::function<void(std::size_t, ReplicaResult&&)>& sink) {
  validate(cfg, law);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    ReplicaRunner runner;
    SimConfig local = cfg;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        local.replica_index = first + i;
        sink(i, runner.run(law, local));
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
}

inline std::vector<ReplicaResult> run_replicas(const ReproductionLaw& law, const SimConfig& cfg,
                                               std::uint64_t first, std::size_t count,
                                               unsigned threads = default_threads()) {
  std::vector<ReplicaResult> out(count);
  for_each_replica(law, cfg, first, count, threads,
                   [&](std::size_t i, ReplicaResult&& r) { out[i] = std::move(r); });
  return out;
}

/// a_n (Z_{n+m} - Z_n) for parameter index p; m defaults to the replica's extra_m.
inline cplx residual(const ReplicaResult& rep, std::size_t p, int n, cplx a_n,
                     std::optional<int> m = std::nullopt) {
  const int mm = m.value_or(rep.extra_m);
  if (n < 0 || mm < 0 || n + mm > rep.depth())
    throw Error(ErrorKind::precondition, "residual horizon exceeds the simulated depth");
  if (mm == 0) return {0.0, 0.0};
  return a_n * (rep.Z(n + mm, p) - rep.Z(n, p));
}

struct TrendRow {
  int n = 0;
  double median = 0.0;
};

/// Medians over replicas of sqrt(n) sup_{|u|=n} e^{-V(u)}.
inline std::vector<TrendRow> sup_weight_trend(const ReproductionLaw& law, const BoundaryParams& bp,
                                              const std::vector<int>& n_grid,
                                              std::size_t replicas, std::uint64_t seed,
                                              unsigned threads = default_threads()) {
  if (n_grid.empty()) throw Error(ErrorKind::validation, "empty n grid");
  for (int n : n_grid)
    if (n < 1) throw Error(ErrorKind::precondition, "sup_weight_trend needs n >= 1");
  SimConfig cfg;
  cfg.depth_n = *std::max_element(n_grid.begin(), n_grid.end());
  cfg.master_seed = seed;
  cfg.boundary = bp;
  cfg.stream = StreamTag::boundary_tree;
  std::vector<std::vector<double>> vals(n_grid.size(), std::vector<double>(replicas));
  for_each_replica(law, cfg, 0, replicas, threads, [&](std::size_t i, ReplicaResult&& r) {
    for (std::size_t g = 0; g < n_grid.size(); ++g)
      vals[g][i] = std::sqrt(static_cast<double>(n_grid[g])) *
                   r.sup_weight[static_cast<std::size_t>(n_grid[g])];
  });
  std::vector<TrendRow> out;
  for (std::size_t g = 0; g < n_grid.size(); ++g) out.push_back({n_grid[g], median(vals[g])});
  return out;
}

/// Positions and seeds of one generation, by brute force; for small trees.
struct Generation {
  std::vector<double> pos;
  std::vector<Counter128> seeds;
};

inline Generation collect_generation(const ReproductionLaw& law, std::uint64_t master_seed,
                                     StreamTag tag, std::uint64_t replica, int depth) {
  Generation g;
  sim_detail::Walker w;
  const auto keys = sim_detail::tree_keys(master_seed, tag, replica);
  w.walk(law, keys, keys.root, 0.0, 0, depth + 1, [&](int d, const sim_detail::NodeView& v) {
    if (d != depth) return;
    for (std::size_t i = 0; i < v.size; ++i) {
      g.pos.push_back(v.pos[i]);
      g.seeds.push_back({v.s[0][i], v.s[1][i], v.s[2][i], v.s[3][i]});
    }
  });
  return g;
}

}  // namespace brw
