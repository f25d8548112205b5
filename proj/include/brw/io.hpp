#pragma once

// Byte-stable CSV and SVG emitters. Every CSV starts with a schema comment;
// floats use 17 significant digits.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "brw/error.hpp"
#include "brw/format.hpp"
#include "brw/regimes.hpp"
#include "brw/simulator.hpp"

namespace brw {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::io, path.string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, path.string() + ": cannot open for writing");
  out << content;
  out.flush();
  if (!out) throw Error(ErrorKind::io, path.string() + ": write failed");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, path.string() + ": cannot open for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string regime_grid_csv(const RegimeGrid& g) {
  std::string s = "# schema: brw-regime-map/1\ntheta,eta,regime,alpha\n";
  for (std::size_t j = 0; j < g.etas.size(); ++j)
    for (std::size_t i = 0; i < g.thetas.size(); ++i) {
      const RegimeLabel& l = g.at(i, j);
      const auto* sb = std::get_if<StableBoundary>(&l);
      s += fmt17(g.thetas[i]) + "," + fmt17(g.etas[j]) + "," + regime_name(l) + "," +
           (sb ? fmt17(sb->alpha) : std::string()) + "\n";
    }
  return s;
}

/// Fixed colour per regime.
inline const char* regime_color(Regime r) {
  switch (r) {
    case Regime::gaussian: return "#4c72b0";
    case Regime::gaussian_boundary: return "#8172b2";
    case Regime::extremal: return "#dd8452";
    case Regime::stable_boundary: return "#c44e52";
    case Regime::out_of_theory: return "#e5e5e5";
  }
  return "#000000";
}

namespace io_detail {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace io_detail

/// Regime map as SVG: theta to the right, eta upward, one run-length rectangle
/// per constant stretch of a grid row, plus axes and a legend.
inline std::string regime_map_svg(const RegimeGrid& g) {
  using io_detail::num;
  constexpr double W = 600.0, H = 600.0, L = 60.0, T = 20.0, legend_w = 200.0;
  const double total_w = L + W + 20.0 + legend_w, total_h = T + H + 50.0;
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + num(total_w) + " " + num(total_h) +
       "\" width=\"" + num(total_w) + "\" height=\"" + num(total_h) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(total_w) + "\" height=\"" + num(total_h) + "\" fill=\"#ffffff\"/>\n";
  const std::size_t nt = g.thetas.size(), ne = g.etas.size();
  if (nt > 0 && ne > 0) {
    const double t0 = g.thetas.front(), t1 = g.thetas.back();
    const double e0 = g.etas.front(), e1 = g.etas.back();
    // Cell edges halfway between grid points.
    auto edge = [](const std::vector<double>& v, std::size_t i) {
      if (v.size() == 1) return i == 0 ? v[0] - 0.5 : v[0] + 0.5;
      if (i == 0) return v[0] - (v[1] - v[0]) / 2.0;
      if (i == v.size()) return v.back() + (v.back() - v[v.size() - 2]) / 2.0;
      return (v[i - 1] + v[i]) / 2.0;
    };
    const double x_lo = edge(g.thetas, 0), x_hi = edge(g.thetas, nt);
    const double y_lo = edge(g.etas, 0), y_hi = edge(g.etas, ne);
    auto px = [&](double t) { return L + (t - x_lo) / (x_hi - x_lo) * W; };
    auto py = [&](double e) { return T + (y_hi - e) / (y_hi - y_lo) * H; };
    s += "<g shape-rendering=\"crispEdges\">\n";
    for (std::size_t j = 0; j < ne; ++j) {
      std::size_t i = 0;
      while (i < nt) {
        const Regime r = regime_of(g.at(i, j));
        std::size_t k = i + 1;
        while (k < nt && regime_of(g.at(k, j)) == r) ++k;
        const double x = px(edge(g.thetas, i)), x2 = px(edge(g.thetas, k));
        const double y = py(edge(g.etas, j + 1)), y2 = py(edge(g.etas, j));
        s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(x2 - x) + "\" height=\"" +
             num(y2 - y) + "\" fill=\"" + regime_color(r) + "\"/>\n";
        i = k;
      }
    }
    s += "</g>\n";
    s += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(W) + "\" height=\"" + num(H) +
         "\" fill=\"none\" stroke=\"#000000\"/>\n";
    // Axes through the origin when it is inside the window.
    if (x_lo < 0.0 && x_hi > 0.0)
      s += "<line x1=\"" + num(px(0.0)) + "\" y1=\"" + num(T) + "\" x2=\"" + num(px(0.0)) + "\" y2=\"" +
           num(T + H) + "\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
    if (y_lo < 0.0 && y_hi > 0.0)
      s += "<line x1=\"" + num(L) + "\" y1=\"" + num(py(0.0)) + "\" x2=\"" + num(L + W) + "\" y2=\"" +
           num(py(0.0)) + "\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
    auto text = [&](double x, double y, const std::string& anchor, const std::string& t) {
      s += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"" +
           anchor + "\">" + t + "</text>\n";
    };
    text(L, T + H + 16.0, "start", num(t0));
    text(L + W, T + H + 16.0, "end", num(t1));
    text(L + W / 2.0, T + H + 36.0, "middle", "theta = Re(lambda)");
    text(L - 6.0, T + H, "end", num(e0));
    text(L - 6.0, T + 12.0, "end", num(e1));
    text(L - 6.0, T + H / 2.0, "end", "eta");
  }
  const double lx = L + W + 20.0;
  double ly = T + 10.0;
  for (Regime r : {Regime::gaussian, Regime::gaussian_boundary, Regime::extremal, Regime::stable_boundary,
                   Regime::out_of_theory}) {
    s += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly) + "\" width=\"14\" height=\"14\" fill=\"" +
         regime_color(r) + "\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
    s += "<text x=\"" + num(lx + 20.0) + "\" y=\"" + num(ly + 11.0) +
         "\" font-family=\"sans-serif\" font-size=\"12\">" + regime_name(r) + "</text>\n";
    ly += 22.0;
  }
  s += "</svg>\n";
  return s;
}

inline std::string snail_csv(const std::vector<Polyline>& curves) {
  std::string s = "# schema: brw-snail/1\ncurve,point,re,im\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.points.size(); ++i)
      s += std::to_string(c.index) + "," + std::to_string(i) + "," + fmt17(c.points[i].real()) + "," +
           fmt17(c.points[i].imag()) + "\n";
  return s;
}

/// One row per (replica, depth, parameter index); depths without recorded Z give NaN.
inline std::string replica_dump_csv(const std::vector<ReplicaResult>& reps, std::uint64_t first_index = 0) {
  std::string s = "# schema: brw-replicas/1\nreplica,depth,param,re_Z,im_Z,W,dW,minV,supw,pop\n";
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const auto& x = reps[r];
    const std::size_t np = std::max<std::size_t>(x.n_params, 1);
    for (int d = 0; d <= x.depth(); ++d)
      for (std::size_t p = 0; p < np; ++p) {
        const cplx z = x.n_params ? x.Z(d, p) : cplx(std::nan(""), std::nan(""));
        const auto du = static_cast<std::size_t>(d);
        s += std::to_string(first_index + r) + "," + std::to_string(d) + "," + std::to_string(p) + "," +
             fmt17(z.real()) + "," + fmt17(z.imag()) + "," + fmt17(x.w[du]) + "," + fmt17(x.dw[du]) + "," +
             fmt17(x.min_v[du]) + "," + fmt17(x.sup_weight[du]) + "," + std::to_string(x.population[du]) + "\n";
      }
  }
  return s;
}

inline std::string tips_csv(const std::vector<ReplicaResult>& reps, std::uint64_t first_index = 0) {
  std::string s = "# schema: brw-tips/1\nreplica,rank,v_centered,param,re_subtree_Z,im_subtree_Z\n";
  for (std::size_t r = 0; r < reps.size(); ++r)
    for (std::size_t k = 0; k < reps[r].tips.size(); ++k) {
      const auto& t = reps[r].tips[k];
      if (t.subtree_z.empty()) {
        s += std::to_string(first_index + r) + "," + std::to_string(k) + "," + fmt17(t.v_centered) + ",,,\n";
        continue;
      }
      for (std::size_t p = 0; p < t.subtree_z.size(); ++p)
        s += std::to_string(first_index + r) + "," + std::to_string(k) + "," + fmt17(t.v_centered) + "," +
             std::to_string(p) + "," + fmt17(t.subtree_z[p].real()) + "," + fmt17(t.subtree_z[p].imag()) + "\n";
    }
  return s;
}

}  // namespace brw
