// brwlab: command-line front end of the branching random walk lab.
// Exit codes: 0 ok, 1 usage, 2 validation, 3 acceptance failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "brw/appendix.hpp"
#include "brw/config.hpp"
#include "brw/io.hpp"
#include "brw/lab.hpp"

using namespace brw;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitAcceptance = 3;
constexpr const char* kOutputDirEnv = "BRWLAB_OUTPUT_DIR";

struct Session {
  RunConfig cfg;
  fs::path out;

  void save(const std::string& name, const std::string& content) const {
    write_file(out / name, content);
    std::cerr << "wrote " << (out / name).string() << "\n";
  }
};

Session open_session(const std::string& config_path) {
  Session s;
  if (!config_path.empty()) s.cfg = parse_config(read_file(config_path));
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) s.cfg.run.output_dir = env;
  s.out = s.cfg.run.output_dir;
  // The effective configuration, defaults included, sits next to every output.
  s.save("config.ini", emit_config(s.cfg));
  return s;
}

std::string describe(const RegimeLabel& label, const ReproductionLaw& law, cplx lambda) {
  std::string s = "lambda: " + fmt_complex(lambda) + "\nregime: " + regime_name(label) + "\n";
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, GaussianInterior>) {
          s += std::string("limit_is_complex: ") + (l.limit_is_complex ? "true" : "false") + "\n";
          s += std::string("degenerate: ") + (l.degenerate ? "true" : "false") + "\n";
          s += "sigma_lambda_sq: " + fmt17(ComplexParam(law, lambda).sigma_lambda_sq()) + "\n";
        } else if constexpr (std::is_same_v<T, GaussianBoundary>) {
          s += std::string("limit_is_complex: ") + (l.limit_is_complex ? "true" : "false") + "\n";
          s += "theta_star: " + fmt17(l.boundary.theta_star) + "\n";
        } else if constexpr (std::is_same_v<T, Extremal>) {
          s += "theta_star: " + fmt17(l.boundary.theta_star) + "\n";
        } else if constexpr (std::is_same_v<T, StableBoundary>) {
          s += "alpha: " + fmt17(l.alpha) + "\nw: " + fmt_complex(l.w) + "\n";
          s += "theta_star: " + fmt17(l.boundary.theta_star) + "\n";
          s += "u1_order: " + (l.group.u1_order ? std::to_string(*l.group.u1_order) : std::string("infinite")) + "\n";
        } else {
          s += "reason: " + l.reason + "\n";
        }
      },
      label);
  if (regime_of(label) != Regime::out_of_theory)
    s += "a_n(n=12): " + fmt_complex(scaling_constant(label, law, lambda, 12)) + "\n";
  return s;
}

int cmd_classify(const Session& s) {
  const auto law = s.cfg.law.law();
  const cplx lambda(s.cfg.classify.theta, s.cfg.classify.eta);
  const std::string text = describe(classify_any(law, lambda, s.cfg.classify_options()), law, lambda);
  s.save("classify.txt", text);
  std::cout << text;
  return kExitOk;
}

int cmd_regime_map(const Session& s) {
  const auto& m = s.cfg.regime_map;
  const RegimeGrid g = regime_map(s.cfg.law.law(), linspace(m.theta_min, m.theta_max, m.theta_points),
                                  linspace(m.eta_min, m.eta_max, m.eta_points), s.cfg.classify_options());
  s.save("regime_map.csv", regime_grid_csv(g));
  s.save("regime_map.svg", regime_map_svg(g));
  std::cout << "points: " << g.labels.size() << "\n";
  return kExitOk;
}

int cmd_simulate(const Session& s) {
  const auto law = s.cfg.law.law();
  const auto& sim = s.cfg.simulate;
  SimConfig c;
  c.depth_n = sim.depth_n;
  c.extra_m = sim.extra_m;
  for (std::size_t i = 0; i < sim.thetas.size(); ++i) c.params.emplace_back(law, cplx(sim.thetas[i], sim.etas[i]));
  c.master_seed = s.cfg.run.seed;
  if (sim.boundary || sim.tip_k > 0) c.boundary = solve_theta_star(law, s.cfg.classify_options().theta_star_bracket);
  c.tip_k = sim.tip_k;
  if (sim.tip_window > 0.0) c.tip_window = sim.tip_window;
  const auto reps = run_replicas(law, c, 0, sim.replicas, s.cfg.thread_count());
  s.save("replicas.csv", replica_dump_csv(reps));
  if (sim.tip_k > 0) s.save("tips.csv", tips_csv(reps));
  std::cout << "replicas: " << reps.size() << "\n";
  return kExitOk;
}

int cmd_experiment(const Session& s) {
  const ExperimentSpec spec = s.cfg.experiment_spec();
  const ExperimentReport r = run_experiment(spec);
  s.save("report.txt", r.text());
  for (std::size_t i = 0; i < r.samples.size(); ++i)
    s.save("samples_" + std::to_string(i) + "_" + r.samples[i].meta.kind + ".csv", to_csv(r.samples[i]));
  std::cout << r.text();
  return r.all_pass() ? kExitOk : kExitAcceptance;
}

int cmd_props(const Session& s) {
  const auto& p = s.cfg.props;
  SuiteOptions o;
  o.trials = p.trials;
  o.martingale_length = p.martingale_length;
  o.inner = p.inner;
  o.parallelogram_points = p.parallelogram_points;
  o.tail_draws = p.tail_draws;
  o.cancellation_replicas = p.cancellation_replicas;
  o.seed = s.cfg.run.seed;
  const SuiteReport r = run_appendix_suite(o);
  s.save("props.txt", r.text());
  std::cout << r.text();
  return r.violations() == 0 ? kExitOk : kExitAcceptance;
}

int cmd_group(const Session& s) {
  const auto law = s.cfg.law.law();
  const auto& g = s.cfg.group;
  const cplx lambda(g.theta, g.eta);
  const ClassifyOptions opt = s.cfg.classify_options();
  const GroupSpec spec = compute_group(law, lambda, opt.group);
  std::string text = "lambda: " + fmt_complex(lambda) + "\n";
  text += std::string("full_circle: ") + (spec.full_circle ? "true" : "false") + "\n";
  text += "u1_order: " + (spec.u1_order ? std::to_string(*spec.u1_order) : std::string("infinite")) + "\n";
  text += "w: " + fmt_complex(spec.w) + "\n";
  text += "generator_phase: " + fmt17(spec.generator_phase) + "\n";
  text += std::string("numerically_rational: ") + (spec.numerically_rational ? "true" : "false") + "\n";
  s.save("group.txt", text);
  s.save("snail.csv", snail_csv(snail_curves(spec, lambda, g.snail_x_min, g.snail_x_max,
                                             static_cast<std::size_t>(g.snail_points))));
  std::cout << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo lab for complex Biggins martingales in branching random walks"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.footer(std::string("Environment: ") + kOutputDirEnv + " overrides run.output_dir.");

  const std::vector<std::pair<std::string, std::pair<std::string, int (*)(const Session&)>>> commands{
      {"classify", {"classify lambda = classify.theta + i classify.eta", cmd_classify}},
      {"regime-map", {"classify a (theta, eta) grid; writes CSV and SVG", cmd_regime_map}},
      {"simulate", {"simulate replicas and dump per-depth statistics", cmd_simulate}},
      {"experiment", {"run a limit-law experiment; exit 3 when a check fails", cmd_experiment}},
      {"props", {"run the inequality suite; exit 3 on any violation", cmd_props}},
      {"group", {"group structure and snail curves for group.theta, group.eta", cmd_group}},
  };
  for (const auto& [name, info] : commands) app.add_subcommand(name, info.first)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const Session s = open_session(config_path);
    for (const auto& [name, info] : commands)
      if (app.got_subcommand(name)) return info.second(s);
  } catch (const Error& e) {
    std::cerr << "brwlab: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "brwlab: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
