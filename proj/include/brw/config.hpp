#pragma once

// INI-style run configuration: `[section]` headers and `key = value` lines.
//
// Values are decimal numbers (optional exponent), integers, booleans,
// identifiers, arrays `[a, b, ...]` or tuples `{kind, a, b}`. Unknown sections
// and keys are rejected. emit_config writes every key, defaults included, so a
// parsed-and-emitted file records the full configuration.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brw/appendix.hpp"
#include "brw/error.hpp"
#include "brw/format.hpp"
#include "brw/lab.hpp"
#include "brw/model.hpp"
#include "brw/regimes.hpp"

namespace brw {

struct LawConfig {
  std::vector<double> offspring{0.0, 0.0, 1.0};
  DisplacementFamily displacement = Gaussian{0.0, 1.0};
  ReproductionLaw law() const { return ReproductionLaw(offspring, displacement); }
};

struct RunSection {
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  std::string output_dir = "out";
};

struct RegimeSection {
  double equality_tol = 1e-9;
  double theta_star_lo = 1e-6;
  double theta_star_hi = 50.0;
  long denominator_cap = 1000;
  double rational_tol = 1e-12;
};

struct PointSection {
  double theta = 0.3;
  double eta = 0.2;
};

struct MapSection {
  double theta_min = -2.5, theta_max = 2.5;
  int theta_points = 401;
  double eta_min = -2.5, eta_max = 2.5;
  int eta_points = 401;
};

struct SimulateSection {
  int depth_n = 12;
  int extra_m = 8;
  std::size_t replicas = 10;
  std::vector<double> thetas{0.3};
  std::vector<double> etas{0.2};
  bool boundary = false;
  int tip_k = 0;
  double tip_window = 0.0;  // 0: keep the tip_k smallest without a window
};

struct ExperimentSection {
  std::string kind = "gaussian";
  double theta = 0.3;
  double eta = 0.2;
  std::vector<int> n_grid{12};
  int extra_m = 8;
  std::size_t replicas = 2000;
  std::size_t reference_replicas = 2000;
  int resamples = kDefaultResamples;
  int n_ref = 18;
  int tip_n = 18;
  double K = 6.0;
  std::vector<double> K_sweep{4.0, 6.0, 8.0};
  int hill_n = 18;
  std::size_t hill_replicas = 20000;
  int hill_k = 500;
  std::size_t iqr_replicas = 200;
};

struct GroupSection {
  double theta = 0.61691090087568180;
  double eta = 0.56049912163979290;
  double snail_x_min = -5.0;
  double snail_x_max = 2.25;
  int snail_points = 100;
};

struct PropsSection {
  int trials = 10000;
  int martingale_length = 8;
  int inner = 10000;
  std::size_t parallelogram_points = 1000000;
  std::size_t tail_draws = 100000;
  std::size_t cancellation_replicas = 2000;
};

struct RunConfig {
  LawConfig law;
  RunSection run;
  RegimeSection regimes;
  PointSection classify;
  MapSection regime_map;
  SimulateSection simulate;
  ExperimentSection experiment;
  GroupSection group;
  PropsSection props;

  ClassifyOptions classify_options() const {
    ClassifyOptions o;
    o.equality_tol = regimes.equality_tol;
    o.theta_star_bracket = {regimes.theta_star_lo, regimes.theta_star_hi};
    o.group.denominator_cap = regimes.denominator_cap;
    o.group.tolerance = regimes.rational_tol;
    return o;
  }

  unsigned thread_count() const {
    return run.threads > 0 ? static_cast<unsigned>(run.threads) : default_threads();
  }

  ExperimentSpec experiment_spec() const {
    ExperimentSpec s;
    s.kind = experiment_kind_from(experiment.kind);
    s.law = law.law();
    s.lambda = cplx(experiment.theta, experiment.eta);
    s.n_grid = experiment.n_grid;
    s.extra_m = experiment.extra_m;
    s.replicas = experiment.replicas;
    s.reference_replicas = experiment.reference_replicas;
    s.resamples = experiment.resamples;
    s.n_ref = experiment.n_ref;
    s.tip_n = experiment.tip_n;
    s.K = experiment.K;
    s.K_sweep = experiment.K_sweep;
    s.hill_n = experiment.hill_n;
    s.hill_replicas = experiment.hill_replicas;
    s.hill_k = experiment.hill_k;
    s.iqr_replicas = experiment.iqr_replicas;
    s.seed = run.seed;
    s.threads = thread_count();
    s.classify = classify_options();
    return s;
  }
};

namespace config_detail {

struct Value {
  std::string text;  // raw value text
  int line = 0;
  int column = 0;    // 1-based column of the value
};

[[noreturn]] inline void fail_at(int line, int col, const std::string& msg) {
  throw Error(ErrorKind::parse, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool is_decimal(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  }
  if (digits == 0) return false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t ed = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++ed;
    if (ed == 0) return false;
  }
  return i == s.size();
}

inline double number(const Value& v, const std::string& key) {
  const auto t = trim(v.text);
  if (!is_decimal(t)) fail_at(v.line, v.column, key + ": expected a decimal number, got '" + std::string(t) + "'");
  double x = 0.0;
  try {
    x = parse_double(t, key);
  } catch (const Error&) {
    fail_at(v.line, v.column, key + ": number out of range");
  }
  if (!std::isfinite(x)) fail_at(v.line, v.column, key + ": number out of range");
  return x;
}

inline long long integer(const Value& v, const std::string& key) {
  const auto t = trim(v.text);
  std::size_t i = (!t.empty() && (t[0] == '-' || t[0] == '+')) ? 1 : 0;
  if (i == t.size()) fail_at(v.line, v.column, key + ": expected an integer");
  for (std::size_t j = i; j < t.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(t[j])))
      fail_at(v.line, v.column, key + ": expected an integer, got '" + std::string(t) + "'");
  try {
    return std::stoll(std::string(t));
  } catch (const std::out_of_range&) {
    fail_at(v.line, v.column, key + ": integer out of range");
  }
}

inline std::uint64_t unsigned_integer(const Value& v, const std::string& key) {
  const auto t = trim(v.text);
  if (t.empty()) fail_at(v.line, v.column, key + ": expected a non-negative integer");
  for (char c : t)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      fail_at(v.line, v.column, key + ": expected a non-negative integer, got '" + std::string(t) + "'");
  try {
    return std::stoull(std::string(t));
  } catch (const std::out_of_range&) {
    fail_at(v.line, v.column, key + ": integer out of range");
  }
}

inline bool boolean(const Value& v, const std::string& key) {
  const auto t = trim(v.text);
  if (t == "true") return true;
  if (t == "false") return false;
  fail_at(v.line, v.column, key + ": expected true or false");
}

inline std::string identifier(const Value& v, const std::string& key) {
  const auto t = trim(v.text);
  if (t.empty()) fail_at(v.line, v.column, key + ": expected a name");
  for (char c : t)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '/'))
      fail_at(v.line, v.column, key + ": invalid character '" + std::string(1, c) + "'");
  return std::string(t);
}

/// Splits `[a, b]` or `{a, b}` into element values with their columns.
inline std::vector<Value> elements(const Value& v, const std::string& key, char open, char close) {
  const std::string& s = v.text;
  const auto first = s.find_first_not_of(" \t");
  const auto last = s.find_last_not_of(" \t");
  if (first == std::string::npos || s[first] != open || s[last] != close)
    fail_at(v.line, v.column, key + ": expected " + std::string(1, open) + "..." + std::string(1, close));
  std::vector<Value> out;
  std::size_t start = first + 1;
  const std::string inner = s.substr(first + 1, last - first - 1);
  if (trim(inner).empty()) return out;
  for (std::size_t i = first + 1; i <= last; ++i) {
    if (i == last || s[i] == ',') {
      Value e{s.substr(start, i - start), v.line, v.column + static_cast<int>(start)};
      if (trim(e.text).empty()) fail_at(v.line, e.column, key + ": empty element");
      out.push_back(e);
      start = i + 1;
    }
  }
  return out;
}

inline std::vector<double> number_array(const Value& v, const std::string& key) {
  std::vector<double> out;
  for (const auto& e : elements(v, key, '[', ']')) out.push_back(number(e, key));
  return out;
}

inline std::vector<int> int_array(const Value& v, const std::string& key) {
  std::vector<int> out;
  for (const auto& e : elements(v, key, '[', ']')) {
    const long long x = integer(e, key);
    if (x < INT32_MIN || x > INT32_MAX) fail_at(e.line, e.column, key + ": integer out of range");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

inline DisplacementFamily displacement(const Value& v, const std::string& key) {
  const auto el = elements(v, key, '{', '}');
  if (el.empty()) fail_at(v.line, v.column, key + ": expected {kind, params...}");
  const std::string kind = identifier(el[0], key);
  auto want = [&](std::size_t n) {
    if (el.size() != n + 1)
      fail_at(v.line, v.column, key + ": " + kind + " takes " + std::to_string(n) + " parameter(s)");
  };
  DisplacementFamily fam;
  if (kind == "point_mass") {
    want(1);
    fam = PointMass{number(el[1], key)};
  } else if (kind == "gaussian") {
    want(2);
    fam = Gaussian{number(el[1], key), number(el[2], key)};
  } else if (kind == "uniform") {
    want(2);
    fam = Uniform{number(el[1], key), number(el[2], key)};
  } else {
    fail_at(el[0].line, el[0].column, key + ": unknown displacement kind '" + kind + "'");
  }
  try {
    validate(fam);
  } catch (const Error& e) {
    throw Error(ErrorKind::validation, key + ": " + e.what());
  }
  return fam;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_floating_point_v<T>) s += fmt17(xs[i]);
    else s += std::to_string(xs[i]);
  }
  return s + "]";
}

inline std::string emit_displacement(const DisplacementFamily& fam) {
  if (const auto* p = std::get_if<PointMass>(&fam)) return "{point_mass, " + fmt17(p->x) + "}";
  if (const auto* g = std::get_if<Gaussian>(&fam)) return "{gaussian, " + fmt17(g->mean) + ", " + fmt17(g->sd) + "}";
  const auto& u = std::get<Uniform>(fam);
  return "{uniform, " + fmt17(u.a) + ", " + fmt17(u.b) + "}";
}

[[noreturn]] inline void range_error(const std::string& key, const std::string& msg) {
  throw Error(ErrorKind::validation, key + ": " + msg);
}

/// Binding of one key: a parser into the config and an emitter from it.
struct Binding {
  std::function<void(RunConfig&, const Value&, const std::string&)> parse;
  std::function<std::string(const RunConfig&)> emit;
};

using Table = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Binding>>>>;

#define BRW_NUM(sec, field)                                                                    \
  {#field, {[](RunConfig& c, const Value& v, const std::string& k) { c.sec.field = number(v, k); }, \
            [](const RunConfig& c) { return fmt17(c.sec.field); }}}
#define BRW_INT(sec, field)                                                                     \
  {#field, {[](RunConfig& c, const Value& v, const std::string& k) {                            \
              const long long x = integer(v, k);                                                \
              if (x < INT32_MIN || x > INT32_MAX) range_error(k, "out of range");               \
              c.sec.field = static_cast<decltype(c.sec.field)>(x);                              \
            },                                                                                  \
            [](const RunConfig& c) { return std::to_string(c.sec.field); }}}
#define BRW_UINT(sec, field)                                                                    \
  {#field, {[](RunConfig& c, const Value& v, const std::string& k) {                            \
              c.sec.field = static_cast<decltype(c.sec.field)>(unsigned_integer(v, k));         \
            },                                                                                  \
            [](const RunConfig& c) { return std::to_string(c.sec.field); }}}

inline const Table& table() {
  static const Table t = {
      {"law",
       {{"offspring", {[](RunConfig& c, const Value& v, const std::string& k) { c.law.offspring = number_array(v, k); },
                       [](const RunConfig& c) { return join(c.law.offspring); }}},
        {"displacement", {[](RunConfig& c, const Value& v, const std::string& k) { c.law.displacement = displacement(v, k); },
                          [](const RunConfig& c) { return emit_displacement(c.law.displacement); }}}}},
      {"run",
       {BRW_UINT(run, seed),
        BRW_INT(run, threads),
        {"output_dir", {[](RunConfig& c, const Value& v, const std::string& k) { c.run.output_dir = identifier(v, k); },
                        [](const RunConfig& c) { return c.run.output_dir; }}}}},
      {"regimes",
       {BRW_NUM(regimes, equality_tol), BRW_NUM(regimes, theta_star_lo), BRW_NUM(regimes, theta_star_hi),
        BRW_INT(regimes, denominator_cap), BRW_NUM(regimes, rational_tol)}},
      {"classify", {BRW_NUM(classify, theta), BRW_NUM(classify, eta)}},
      {"regime_map",
       {BRW_NUM(regime_map, theta_min), BRW_NUM(regime_map, theta_max), BRW_INT(regime_map, theta_points),
        BRW_NUM(regime_map, eta_min), BRW_NUM(regime_map, eta_max), BRW_INT(regime_map, eta_points)}},
      {"simulate",
       {BRW_INT(simulate, depth_n), BRW_INT(simulate, extra_m), BRW_UINT(simulate, replicas),
        {"thetas", {[](RunConfig& c, const Value& v, const std::string& k) { c.simulate.thetas = number_array(v, k); },
                    [](const RunConfig& c) { return join(c.simulate.thetas); }}},
        {"etas", {[](RunConfig& c, const Value& v, const std::string& k) { c.simulate.etas = number_array(v, k); },
                  [](const RunConfig& c) { return join(c.simulate.etas); }}},
        {"boundary", {[](RunConfig& c, const Value& v, const std::string& k) { c.simulate.boundary = boolean(v, k); },
                      [](const RunConfig& c) { return std::string(c.simulate.boundary ? "true" : "false"); }}},
        BRW_INT(simulate, tip_k), BRW_NUM(simulate, tip_window)}},
      {"experiment",
       {{"kind", {[](RunConfig& c, const Value& v, const std::string& k) { c.experiment.kind = identifier(v, k); },
                  [](const RunConfig& c) { return c.experiment.kind; }}},
        BRW_NUM(experiment, theta), BRW_NUM(experiment, eta),
        {"n_grid", {[](RunConfig& c, const Value& v, const std::string& k) { c.experiment.n_grid = int_array(v, k); },
                    [](const RunConfig& c) { return join(c.experiment.n_grid); }}},
        BRW_INT(experiment, extra_m), BRW_UINT(experiment, replicas), BRW_UINT(experiment, reference_replicas),
        BRW_INT(experiment, resamples), BRW_INT(experiment, n_ref), BRW_INT(experiment, tip_n),
        BRW_NUM(experiment, K),
        {"K_sweep", {[](RunConfig& c, const Value& v, const std::string& k) { c.experiment.K_sweep = number_array(v, k); },
                     [](const RunConfig& c) { return join(c.experiment.K_sweep); }}},
        BRW_INT(experiment, hill_n), BRW_UINT(experiment, hill_replicas), BRW_INT(experiment, hill_k),
        BRW_UINT(experiment, iqr_replicas)}},
      {"group",
       {BRW_NUM(group, theta), BRW_NUM(group, eta), BRW_NUM(group, snail_x_min), BRW_NUM(group, snail_x_max),
        BRW_INT(group, snail_points)}},
      {"props",
       {BRW_INT(props, trials), BRW_INT(props, martingale_length), BRW_INT(props, inner),
        BRW_UINT(props, parallelogram_points), BRW_UINT(props, tail_draws), BRW_UINT(props, cancellation_replicas)}},
  };
  return t;
}

#undef BRW_NUM
#undef BRW_INT
#undef BRW_UINT

}  // namespace config_detail

/// Range checks that name the offending key.
inline void validate(const RunConfig& c) {
  using config_detail::range_error;
  try {
    (void)c.law.law();
  } catch (const Error& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    range_error("law.offspring", colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  if (c.run.threads < 0) range_error("run.threads", "must be >= 0");
  if (!(c.regimes.equality_tol > 0.0)) range_error("regimes.equality_tol", "must be > 0");
  if (!(c.regimes.theta_star_lo > 0.0 && c.regimes.theta_star_lo < c.regimes.theta_star_hi))
    range_error("regimes.theta_star_lo", "need 0 < theta_star_lo < theta_star_hi");
  if (c.regimes.denominator_cap < 1) range_error("regimes.denominator_cap", "must be >= 1");
  if (!(c.regimes.rational_tol > 0.0)) range_error("regimes.rational_tol", "must be > 0");
  if (!(c.regime_map.theta_min <= c.regime_map.theta_max)) range_error("regime_map.theta_min", "must be <= theta_max");
  if (!(c.regime_map.eta_min <= c.regime_map.eta_max)) range_error("regime_map.eta_min", "must be <= eta_max");
  if (c.regime_map.theta_points < 0) range_error("regime_map.theta_points", "must be >= 0");
  if (c.regime_map.eta_points < 0) range_error("regime_map.eta_points", "must be >= 0");
  if (c.simulate.depth_n < 0) range_error("simulate.depth_n", "must be >= 0");
  if (c.simulate.extra_m < 0) range_error("simulate.extra_m", "must be >= 0");
  if (c.simulate.thetas.size() != c.simulate.etas.size())
    range_error("simulate.etas", "must have as many entries as simulate.thetas");
  if (c.simulate.tip_k < 0 || c.simulate.tip_k > kMaxTipK)
    range_error("simulate.tip_k", "must lie in [0, " + std::to_string(kMaxTipK) + "]");
  if (c.simulate.tip_window < 0.0) range_error("simulate.tip_window", "must be >= 0");
  try {
    (void)experiment_kind_from(c.experiment.kind);
  } catch (const Error&) {
    range_error("experiment.kind", "unknown kind '" + c.experiment.kind + "'");
  }
  if (c.experiment.n_grid.empty()) range_error("experiment.n_grid", "must not be empty");
  for (int n : c.experiment.n_grid)
    if (n < 1) range_error("experiment.n_grid", "entries must be >= 1");
  if (c.experiment.extra_m < 0) range_error("experiment.extra_m", "must be >= 0");
  if (c.experiment.replicas < 2) range_error("experiment.replicas", "must be >= 2");
  if (c.experiment.reference_replicas < 2) range_error("experiment.reference_replicas", "must be >= 2");
  if (c.experiment.resamples < 200) range_error("experiment.resamples", "must be >= 200");
  if (c.experiment.n_ref < 1) range_error("experiment.n_ref", "must be >= 1");
  if (c.experiment.tip_n < 1) range_error("experiment.tip_n", "must be >= 1");
  if (c.experiment.K_sweep.empty()) range_error("experiment.K_sweep", "must not be empty");
  if (c.experiment.hill_k < 1) range_error("experiment.hill_k", "must be >= 1");
  if (c.experiment.hill_replicas < 2 * static_cast<std::size_t>(c.experiment.hill_k) + 1)
    range_error("experiment.hill_replicas", "must exceed 2 * hill_k");
  if (c.experiment.iqr_replicas < 4) range_error("experiment.iqr_replicas", "must be >= 4");
  if (!(c.group.theta > 0.0)) range_error("group.theta", "must be > 0");
  if (!(c.group.snail_x_min < c.group.snail_x_max)) range_error("group.snail_x_min", "must be < snail_x_max");
  if (c.group.snail_points < 2) range_error("group.snail_points", "must be >= 2");
  if (c.props.trials < 1) range_error("props.trials", "must be >= 1");
  if (c.props.martingale_length < 1) range_error("props.martingale_length", "must be >= 1");
  if (c.props.inner < 2) range_error("props.inner", "must be >= 2");
  if (c.props.tail_draws < 2) range_error("props.tail_draws", "must be >= 2");
  if (c.props.cancellation_replicas < 2) range_error("props.cancellation_replicas", "must be >= 2");
}

inline RunConfig parse_config(std::string_view text) {
  using namespace config_detail;
  RunConfig c;
  const Table& t = table();
  const std::vector<std::pair<std::string, Binding>>* section = nullptr;
  std::string section_name;
  std::map<std::string, int> seen;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    // Comments start with '#' or ';' at the beginning of the trimmed line.
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') {
      if (eol == text.size()) break;
      continue;
    }
    const int indent = static_cast<int>(raw.find_first_not_of(" \t")) + 1;
    if (line.front() == '[') {
      if (line.back() != ']') fail_at(lineno, indent, "unterminated section header");
      section_name = std::string(trim(line.substr(1, line.size() - 2)));
      section = nullptr;
      for (const auto& [name, keys] : t)
        if (name == section_name) section = &keys;
      if (!section) fail_at(lineno, indent + 1, "unknown section [" + section_name + "]");
      if (seen.count("[" + section_name + "]")) fail_at(lineno, indent, "duplicate section [" + section_name + "]");
      seen["[" + section_name + "]"] = lineno;
    } else {
      const auto eq = raw.find('=');
      if (eq == std::string_view::npos) fail_at(lineno, indent, "expected 'key = value'");
      if (!section) fail_at(lineno, indent, "key outside of any section");
      const std::string key(trim(raw.substr(0, eq)));
      const std::string full = section_name + "." + key;
      const Binding* b = nullptr;
      for (const auto& [name, binding] : *section)
        if (name == key) b = &binding;
      if (!b) fail_at(lineno, indent, "unknown key '" + full + "'");
      if (seen.count(full)) fail_at(lineno, indent, "duplicate key '" + full + "'");
      seen[full] = lineno;
      const std::string_view rest = raw.substr(eq + 1);
      const auto off = rest.find_first_not_of(" \t");
      if (off == std::string_view::npos) fail_at(lineno, static_cast<int>(eq) + 2, full + ": missing value");
      Value v{std::string(rest.substr(off)), lineno, static_cast<int>(eq + 1 + off) + 1};
      while (!v.text.empty() && std::isspace(static_cast<unsigned char>(v.text.back()))) v.text.pop_back();
      b->parse(c, v, full);
    }
    if (eol == text.size()) break;
  }
  validate(c);
  return c;
}

inline std::string emit_config(const RunConfig& c) {
  std::string out;
  for (const auto& [name, keys] : config_detail::table()) {
    if (!out.empty()) out += "\n";
    out += "[" + name + "]\n";
    for (const auto& [key, b] : keys) out += key + " = " + b.emit(c) + "\n";
  }
  return out;
}

}  // namespace brw
