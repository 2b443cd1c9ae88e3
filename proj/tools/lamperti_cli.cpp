#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lamperti/pipeline.hpp"

using namespace lamperti;

namespace {

struct Options {
  std::string config;
  std::string out_dir = "lamperti_out";
  std::optional<std::uint64_t> seed;
  std::optional<State> trunc_N;
  std::optional<double> gb_tol;
  std::string fit_window;
};

PipelineConfig resolve(const Options &o) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
  }
  if (o.trunc_N) {
    c.N = *o.trunc_N;
  }
  if (o.gb_tol) {
    c.gb_tol = *o.gb_tol;
  }
  if (!o.fit_window.empty()) {
    FitWindow w;
    char comma = 0;
    std::istringstream is(o.fit_window);
    if (!(is >> w.lo >> comma >> w.hi) || comma != ',' || !is.eof()) {
      throw ConfigError("--fit-window expects LO,HI", 0);
    }
    c.window = w;
  }
  return c;
}

void print_criteria(const Pipeline &p) {
  for (const auto &c : p.criteria()) {
    std::printf("%-24s %s  %s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL", c.detail.c_str());
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Stationary tails of Lamperti-type Markov chains"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "YAML chain configuration")->check(CLI::ExistingFile);
  app.add_option("--out-dir", o.out_dir, "output directory");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--trunc-N", o.trunc_N, "truncation level N")->check(CLI::PositiveNumber);
  app.add_option("--gb-tol", o.gb_tol, "global balance residual tolerance")->check(CLI::PositiveNumber);
  app.add_option("--fit-window", o.fit_window, "tail fit window LO,HI (default N/40,N/4)");

  auto *validate = app.add_subcommand("validate", "check the standing assumptions on a grid");
  auto *classify = app.add_subcommand("classify", "drift certificate: positive recurrent / transient");
  auto *solve = app.add_subcommand("solve", "exact stationary law on [0,N]");
  auto *harmonic = app.add_subcommand("harmonic", "harmonic function of the killed chain");
  auto *transform = app.add_subcommand("transform", "Doob transform kernel, initial law and moments");
  auto *simulate = app.add_subcommand("simulate", "Gamma limit, renewal and trajectory output");
  std::int64_t traj = 10;
  simulate->add_option("--trajectories", traj, "replicas written to trajectories.jsonl");
  auto *verify = app.add_subcommand("verify", "tail exponent, slowly varying factor and prefactor");
  auto *report = app.add_subcommand("report", "full pipeline with report.md and summary.json");

  CLI11_PARSE(app, argc, argv);

  PipelineConfig cfg;
  try {
    cfg = resolve(o);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Pipeline p(cfg, o.out_dir);
    if (*validate) {
      const auto &d = p.validate();
      for (const auto &c : d.checks) {
        std::printf("%-14s %-12s witness=%lld  %s\n", c.name.c_str(), to_string(c.status),
                    static_cast<long long>(c.witness), c.detail.c_str());
      }
    } else if (*classify) {
      const auto &r = p.classify_chain();
      std::printf("%s: %s\n", to_string(r.classification), r.certificate.c_str());
    } else if (*solve) {
      const auto &s = p.solve();
      std::printf("%s N=%lld residual=%s tail_mass_bound=%s\n", to_string(s.method),
                  static_cast<long long>(s.truncation_N), io::num(s.residual).c_str(),
                  io::num(s.tail_mass_bound).c_str());
    } else if (*harmonic) {
      p.harmonic();
    } else if (*transform) {
      p.hat_moments();
    } else if (*simulate) {
      PipelineConfig c2 = cfg;
      c2.mc.trajectory_replicas = traj;
      Pipeline ps(c2, o.out_dir);
      ps.gamma();
      ps.renewal();
      ps.trajectories();
      print_criteria(ps);
      ps.write_outputs(command);
      return ps.all_pass() ? 0 : 1;
    } else if (*verify) {
      p.prefactor();
    } else if (*report) {
      p.run();
      if (p.summary().contains("note")) {
        std::printf("%s\n", p.summary()["note"].get<std::string>().c_str());
      }
    }
    print_criteria(p);
    p.write_outputs(command);
    return p.all_pass() ? 0 : 1;
  } catch (const PipelineError &e) {
    std::cerr << "stage " << e.what() << '\n';
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
