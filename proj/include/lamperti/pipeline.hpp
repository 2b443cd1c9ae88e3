#ifndef LAMPERTI_PIPELINE_HPP_
#define LAMPERTI_PIPELINE_HPP_

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "lamperti/analysis.hpp"
#include "lamperti/assumptions.hpp"
#include "lamperti/export.hpp"

namespace lamperti {

/// Malformed configuration; line is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string &what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

/// A stage rejected its input; artifacts of earlier stages stay on disk.
class PipelineError : public std::runtime_error {
public:
  PipelineError(std::string stage, const std::string &what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string &stage() const { return stage_; }

private:
  std::string stage_;
};

struct McSettings {
  unsigned threads = 0;
  std::int64_t gamma_steps = 100000;
  std::int64_t gamma_replicas = 5000;
  std::vector<State> renewal_x{100};
  std::int64_t renewal_replicas = 2000;
  double horizon_factor = 20.0;
  std::vector<State> passage_x{50, 100, 200};
  std::int64_t passage_replicas = 1000;
  std::int64_t passage_max_steps = 1'000'000;
  State return_y = 400;
  State return_x = 40;
  std::int64_t return_replicas = 10000;
  std::int64_t trajectory_replicas = 0; // replicas written to trajectories.jsonl
  std::int64_t trajectory_steps = 1000;
};

struct PipelineConfig {
  std::string family = "birth_death";
  double mu = 2.0;
  double b = 1.0;
  double m3_low = 0.2;
  double m3_high = 0.8;
  double delta = 1.0;
  double A = 1.0;
  std::optional<State> x0;
  State N = 2000;
  std::uint64_t seed = 1;
  double gb_tol = 1e-10;
  std::optional<FitWindow> window;
  TailFitOptions fit;
  McSettings mc;

  FitWindow fit_window() const { return window ? *window : default_window(N); }
};

namespace detail {

inline int line_of(const YAML::Node &n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

template <class T>
T read_scalar(const YAML::Node &n, const std::string &key) {
  if (!n.IsScalar()) {
    throw ConfigError("'" + key + "' must be a scalar", line_of(n));
  }
  try {
    return n.as<T>();
  } catch (const YAML::BadConversion &) {
    throw ConfigError("'" + key + "' has an invalid value '" + n.Scalar() + "'", line_of(n));
  }
}

inline std::vector<State> read_states(const YAML::Node &n, const std::string &key) {
  if (!n.IsSequence() || n.size() == 0) {
    throw ConfigError("'" + key + "' must be a nonempty list", line_of(n));
  }
  std::vector<State> out;
  for (const auto &e : n) {
    out.push_back(read_scalar<State>(e, key));
  }
  return out;
}

inline void check_keys(const YAML::Node &map, const std::set<std::string> &allowed, const std::string &where) {
  if (!map.IsMap()) {
    throw ConfigError("'" + where + "' must be a mapping", line_of(map));
  }
  for (const auto &kv : map) {
    const std::string k = kv.first.as<std::string>();
    if (!allowed.count(k)) {
      throw ConfigError("unknown key '" + k + "' in " + where, line_of(kv.first));
    }
  }
}

} // namespace detail

inline PipelineConfig parse_config(const YAML::Node &root) {
  using detail::read_scalar;
  PipelineConfig c;
  if (!root || root.IsNull()) {
    return c;
  }
  detail::check_keys(root,
                     {"family", "mu", "b", "m3_low", "m3_high", "delta", "A", "x0", "N", "seed", "gb_tol", "fit", "mc"},
                     "config");
  if (root["family"]) {
    c.family = read_scalar<std::string>(root["family"], "family");
    static const std::set<std::string> known{"birth_death", "birth_death_transient", "left_skip_free", "origin_jump"};
    if (!known.count(c.family)) {
      throw ConfigError("unknown family '" + c.family + "'", detail::line_of(root["family"]));
    }
  }
  auto num = [&](const char *k, auto &dst) {
    if (root[k]) {
      dst = read_scalar<std::decay_t<decltype(dst)>>(root[k], k);
    }
  };
  num("mu", c.mu);
  num("b", c.b);
  num("m3_low", c.m3_low);
  num("m3_high", c.m3_high);
  num("delta", c.delta);
  num("A", c.A);
  num("N", c.N);
  num("seed", c.seed);
  num("gb_tol", c.gb_tol);
  if (root["x0"]) {
    c.x0 = read_scalar<State>(root["x0"], "x0");
  }
  if (const auto f = root["fit"]) {
    detail::check_keys(f, {"lo", "hi", "exponent_tol", "flatness_tol"}, "fit");
    if (f["lo"] || f["hi"]) {
      if (!(f["lo"] && f["hi"])) {
        throw ConfigError("fit needs both 'lo' and 'hi'", detail::line_of(f));
      }
      c.window = FitWindow{read_scalar<State>(f["lo"], "lo"), read_scalar<State>(f["hi"], "hi")};
    }
    if (f["exponent_tol"]) {
      c.fit.exponent_tol = read_scalar<double>(f["exponent_tol"], "exponent_tol");
    }
    if (f["flatness_tol"]) {
      c.fit.flatness_tol = read_scalar<double>(f["flatness_tol"], "flatness_tol");
    }
  }
  if (const auto m = root["mc"]) {
    detail::check_keys(m,
                       {"threads", "gamma_steps", "gamma_replicas", "renewal_x", "renewal_replicas",
                        "horizon_factor", "passage_x", "passage_replicas", "passage_max_steps", "return_y",
                        "return_x", "return_replicas", "trajectory_replicas", "trajectory_steps"},
                       "mc");
    auto mnum = [&](const char *k, auto &dst) {
      if (m[k]) {
        dst = read_scalar<std::decay_t<decltype(dst)>>(m[k], k);
      }
    };
    mnum("threads", c.mc.threads);
    mnum("gamma_steps", c.mc.gamma_steps);
    mnum("gamma_replicas", c.mc.gamma_replicas);
    mnum("renewal_replicas", c.mc.renewal_replicas);
    mnum("horizon_factor", c.mc.horizon_factor);
    mnum("passage_replicas", c.mc.passage_replicas);
    mnum("passage_max_steps", c.mc.passage_max_steps);
    mnum("return_y", c.mc.return_y);
    mnum("return_x", c.mc.return_x);
    mnum("return_replicas", c.mc.return_replicas);
    mnum("trajectory_replicas", c.mc.trajectory_replicas);
    mnum("trajectory_steps", c.mc.trajectory_steps);
    if (m["renewal_x"]) {
      c.mc.renewal_x = detail::read_states(m["renewal_x"], "renewal_x");
    }
    if (m["passage_x"]) {
      c.mc.passage_x = detail::read_states(m["passage_x"], "passage_x");
    }
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path &path) {
  try {
    return parse_config(YAML::LoadFile(path.string()));
  } catch (const YAML::BadFile &) {
    throw ConfigError("cannot read config file " + path.string(), 0);
  } catch (const YAML::ParserException &e) {
    throw ConfigError(e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0);
  }
}

inline PipelineConfig load_config_string(const std::string &text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::ParserException &e) {
    throw ConfigError(e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0);
  }
}

inline ChainSpec build_chain(const PipelineConfig &c) {
  ChainSpec spec;
  if (c.family == "birth_death") {
    spec = make_birth_death(c.mu, c.b);
  } else if (c.family == "birth_death_transient") {
    spec = make_birth_death_transient(c.mu, c.b);
  } else if (c.family == "left_skip_free") {
    spec = make_left_skip_free(c.mu, c.b, c.m3_low, c.m3_high);
  } else if (c.family == "origin_jump") {
    spec = make_origin_jump_chain(make_birth_death_transient(c.mu, c.b));
  } else {
    throw Rejected("build_chain: unknown family " + c.family);
  }
  spec.profile.delta = c.delta;
  spec.profile.A = c.A;
  if (c.x0) {
    if (*c.x0 < 0) {
      throw Rejected("build_chain: x0 must be nonnegative");
    }
    spec.boundary_x0 = *c.x0;
  }
  return spec;
}

struct Criterion {
  std::string name;
  bool pass = false;
  std::string detail;
};

/*
 * Stage runner. Each stage computes its result once, writes its artifacts to
 * out_dir and records a summary entry; later stages pull earlier ones in.
 */
class Pipeline {
public:
  Pipeline(PipelineConfig cfg, std::filesystem::path out_dir) : cfg_(std::move(cfg)), out_(std::move(out_dir)) {
    std::filesystem::create_directories(out_);
    summary_["config"] = config_json();
  }

  const PipelineConfig &config() const { return cfg_; }
  const std::filesystem::path &out_dir() const { return out_; }
  const std::vector<Criterion> &criteria() const { return criteria_; }
  const io::json &summary() const { return summary_; }

  const ChainSpec &chain() {
    if (!spec_) {
      guard("build_chain", [&] { spec_ = build_chain(cfg_); });
    }
    return *spec_;
  }

  const AssumptionDiagnostics &validate() {
    if (!diag_) {
      const auto &spec = chain();
      guard("validate_assumptions", [&] {
        const auto grid = state_range(std::max<State>(10, spec.boundary_x0 + 1), std::max<State>(cfg_.N / 2, 20));
        AssumptionOptions opt;
        opt.truncation = cfg_.N;
        diag_ = validate_assumptions(spec, grid, opt);
        auto os = io::open_out(out_ / "moments.csv");
        io::write_moments_csv(os, moments(spec, grid));
      });
      summary_["assumptions"] = io::to_json(*diag_);
    }
    return *diag_;
  }

  const DriftReport &classify_chain() {
    if (!cert_) {
      const auto &spec = chain();
      guard("classify", [&] {
        cert_ = classify(spec, state_range(spec.boundary_x0, cfg_.N));
        auto os = io::open_out(out_ / "drift.csv");
        io::write_drift_csv(os, *cert_);
      });
      summary_["classification"] = io::to_json(*cert_);
    }
    return *cert_;
  }

  bool positive_recurrent() { return classify_chain().classification == Classification::positive_recurrent; }

  const StationaryTable &solve() {
    if (!stat_) {
      const auto &spec = chain();
      require_recurrent("stationary");
      guard("stationary", [&] {
        stat_ = spec.skip_free() ? stationary_skip_free(spec, cfg_.N) : stationary_global_balance(spec, cfg_.N, cfg_.gb_tol);
        auto os = io::open_out(out_ / "stationary.csv");
        io::write_stationary_csv(os, *stat_);
      });
      summary_["stationary"] = io::to_json(*stat_);
    }
    return *stat_;
  }

  const HarmonicTable &harmonic() {
    if (!harm_) {
      const auto &spec = chain();
      require_recurrent("harmonic_solve");
      guard("harmonic_solve", [&] {
        harm_ = harmonic_solve(spec, cfg_.N);
        auto os = io::open_out(out_ / "harmonic.csv");
        io::write_harmonic_csv(os, *harm_);
      });
      summary_["harmonic"] = io::to_json(*harm_);
      const State xv = std::min<State>(500, cfg_.N / 4);
      const double ratio = harm_->V_at(xv) / harm_->U_at(xv);
      summary_["harmonic"]["V_over_U"] = {{"x", xv}, {"ratio", io::jnum(ratio)}};
      add("harmonicity",
          harm_->max_residual <= 1e-9 && ratio >= 0.95 && ratio <= 1.05 && harm_->sensitivity < 1e-3,
          "residual " + io::num(harm_->max_residual, 6) + ", V/U(" + std::to_string(xv) + ") " + io::num(ratio, 6) +
              ", doubling " + io::num(harm_->sensitivity, 6));
    }
    return *harm_;
  }

  const TransformedChain &transform_chain() {
    if (!tc_) {
      const auto &spec = chain();
      const auto &stat = solve();
      const auto &harm = harmonic();
      guard("transform", [&] {
        tc_ = std::make_unique<TransformedChain>(transform(spec, harm, stat));
        auto os = io::open_out(out_ / "kernel.csv");
        io::write_kernel_csv(os, *tc_);
        auto is = io::open_out(out_ / "initial_law.csv");
        io::write_init_law_csv(is, tc_->init());
      });
      summary_["transform"] = {{"hat_mu", tc_->hat_mu},
                               {"hat_b", tc_->hat_b},
                               {"boundary_integral", io::jnum(tc_->boundary_integral())},
                               {"support_min", tc_->support_min()}};
    }
    return *tc_;
  }

  const MomentTable &hat_moments() {
    if (!hat_mt_) {
      const auto &tc = transform_chain();
      guard("transformed_moments", [&] {
        const State hi = tc.truncation_N() - tc.base().max_up_jump;
        std::vector<State> grid;
        for (State x = std::max<State>(tc.support_min(), 10); x <= hi; x += 10) {
          grid.push_back(x);
        }
        hat_mt_ = transformed_moments(tc, grid);
        auto os = io::open_out(out_ / "hat_moments.csv");
        io::write_moments_csv(os, *hat_mt_);
      });
      const State xm = std::min<State>(200, cfg_.N / 10);
      const auto mt = transformed_moments(tc, std::vector<State>{xm});
      const double xm1 = static_cast<double>(xm) * mt.m1[0];
      const double target = tc.hat_mu;
      add("hat_chain_moments",
          std::abs(xm1 - target) <= 0.05 * target && std::abs(mt.m2[0] - tc.hat_b) <= 0.05 * tc.hat_b,
          "x m1^(" + std::to_string(xm) + ") " + io::num(xm1, 6) + " vs " + io::num(target, 6) + ", m2^ " +
              io::num(mt.m2[0], 6) + " vs " + io::num(tc.hat_b, 6));
    }
    return *hat_mt_;
  }

  const RenewalEstimate &renewal() {
    if (!ren_) {
      const bool pr = positive_recurrent();
      guard("renewal_estimate", [&] {
        SimConfig sc;
        sc.seed = cfg_.seed ^ 0x5245'4e45'5741'4cULL;
        sc.n_replicas = cfg_.mc.renewal_replicas;
        sc.threads = cfg_.mc.threads;
        if (pr) {
          const SimChain hat(transform_chain());
          ren_ = renewal_estimate(hat, cfg_.mc.renewal_x, cfg_.mc.horizon_factor, sc);
        } else {
          sc.x_start = 0;
          const SimChain base(chain(), cache_limit());
          ren_ = renewal_estimate(base, cfg_.mc.renewal_x, cfg_.mc.horizon_factor, sc);
        }
        auto os = io::open_out(out_ / "renewal.csv");
        io::write_renewal_csv(os, *ren_);
      });
      const std::size_t k = static_cast<std::size_t>(
          std::max_element(ren_->x_grid.begin(), ren_->x_grid.end()) - ren_->x_grid.begin());
      const double x = static_cast<double>(ren_->x_grid[k]);
      const double mu = std::abs(cfg_.mu);
      const double target = pr ? 1.0 / (2.0 * mu + cfg_.b) : 1.0 / (2.0 * mu - cfg_.b);
      const double est = ren_->H[k] / (x * x);
      add(pr ? "renewal_hat_chain" : "renewal", std::abs(est - target) <= 0.1 * target,
          "H(" + std::to_string(ren_->x_grid[k]) + ")/x^2 " + io::num(est, 6) + " vs " + io::num(target, 6));
      summary_["renewal"] = {{"x", ren_->x_grid[k]}, {"H_over_x2", io::jnum(est)}, {"target", target},
                             {"stderr_over_x2", io::jnum(ren_->stderr_[k] / (x * x))},
                             {"censored_fraction", io::jnum(ren_->censored_fraction)}};
    }
    return *ren_;
  }

  const GammaTestResult &gamma() {
    if (!gamma_) {
      const bool pr = positive_recurrent();
      guard("gamma_limit_test", [&] {
        SimConfig sc;
        sc.seed = cfg_.seed ^ 0x4741'4d4d'41ULL;
        sc.n_steps = cfg_.mc.gamma_steps;
        sc.n_replicas = cfg_.mc.gamma_replicas;
        sc.threads = cfg_.mc.threads;
        if (pr) {
          const auto &tc = transform_chain();
          gamma_ = gamma_limit_test(SimChain(tc), sc, tc.hat_mu, tc.hat_b);
        } else {
          sc.x_start = 0;
          gamma_ = gamma_limit_test(SimChain(chain(), cache_limit()), sc, std::abs(cfg_.mu), cfg_.b);
        }
      });
      summary_["gamma"] = io::to_json(*gamma_);
      add("gamma_limit", gamma_->ks_stat <= 0.05 && gamma_->mean_err <= 0.05,
          "KS " + io::num(gamma_->ks_stat, 6) + ", mean " + io::num(gamma_->mean, 6) + " vs " +
              io::num(gamma_->target_mean, 6));
    }
    return *gamma_;
  }

  const TailFitReport &fit() {
    if (!fit_) {
      const auto &stat = solve();
      guard("fit_tail", [&] {
        fit_ = fit_tail(stat, RateFunctions::from(chain()), cfg_.fit_window(), cfg_.fit);
        auto os = io::open_out(out_ / "tail_fit.csv");
        io::write_tail_fit_csv(os, *fit_);
      });
      add("tail_exponent", fit_->exponent_pass,
          "slope " + io::num(fit_->exponent_fit, 6) + " vs " + io::num(fit_->exponent_theory, 6));
      add("slowly_varying_factor", fit_->flat_pass, "max/min " + io::num(fit_->flatness, 6));
      summary_["tail_fit"] = io::to_json(*fit_);
    }
    return *fit_;
  }

  const PrefactorPrediction &prefactor() {
    if (!pref_) {
      const auto &stat = solve();
      const auto &harm = harmonic();
      const auto &tc = transform_chain();
      const auto &ren = renewal();
      fit();
      guard("predict_constant", [&] { pref_ = predict_constant(stat, harm, tc, &ren); });
      fit_->c_predicted = pref_->c_predicted;
      summary_["tail_fit"]["c_predicted"] = io::jnum(pref_->c_predicted);
      summary_["prefactor"] = io::to_json(*pref_);
      const double ratio = fit_->c_empirical / pref_->c_predicted;
      summary_["prefactor"]["ratio"] = io::jnum(ratio);
      add("prefactor", ratio >= 0.8 && ratio <= 1.25,
          "c_emp/c_pred " + io::num(ratio, 6) + " (c_emp " + io::num(fit_->c_empirical, 6) + ", c_pred " +
              io::num(pref_->c_predicted, 6) + ")");
    }
    return *pref_;
  }

  const std::vector<PassageRecord> &passage() {
    if (!passage_) {
      const auto &cert = classify_chain();
      guard("passage_time_suite", [&] {
        SimConfig sc;
        sc.seed = cfg_.seed ^ 0x5041'5353ULL;
        sc.n_steps = cfg_.mc.passage_max_steps;
        sc.n_replicas = cfg_.mc.passage_replicas;
        sc.x_start = 0;
        sc.threads = cfg_.mc.threads;
        passage_ = passage_time_suite(SimChain(chain(), cache_limit()), cert, cfg_.mc.passage_x, sc);
        auto os = io::open_out(out_ / "passage.csv");
        io::write_passage_csv(os, *passage_);
      });
      bool ok = !passage_->empty();
      std::string detail;
      for (const auto &r : *passage_) {
        ok = ok && r.mean_within_bound;
        detail += (detail.empty() ? "" : ", ") + std::string("E T(") + std::to_string(r.x) + ") " + io::num(r.mean_T, 6) +
                  " <= " + io::num(r.bound.mean_bound, 6);
      }
      add("passage_mean_bound", ok, detail);
    }
    return *passage_;
  }

  const ReturnCheck &return_probability() {
    if (!ret_) {
      const auto &cert = classify_chain();
      guard("return_check", [&] {
        ReturnMcParams mc;
        mc.seed = cfg_.seed ^ 0x5245'5455ULL;
        mc.replicas = cfg_.mc.return_replicas;
        mc.threads = cfg_.mc.threads;
        const SimChain base(chain(), cache_limit());
        ret_ = return_check(base, cfg_.mc.return_y, cfg_.mc.return_x, cert.delta, mc);
      });
      summary_["return"] = {{"y", cfg_.mc.return_y},          {"x", cfg_.mc.return_x},
                            {"probability", ret_->probability}, {"stderr", ret_->stderr_},
                            {"bound", ret_->bound},             {"censored", ret_->censored}};
      add("return_bound", ret_->within_bound && ret_->censored == 0,
          "P " + io::num(ret_->probability, 6) + " vs (x/y)^delta " + io::num(ret_->bound, 6));
    }
    return *ret_;
  }

  void trajectories() {
    if (cfg_.mc.trajectory_replicas <= 0) {
      return;
    }
    guard("simulate", [&] {
      SimConfig sc;
      sc.seed = cfg_.seed;
      sc.n_steps = cfg_.mc.trajectory_steps;
      sc.n_replicas = cfg_.mc.trajectory_replicas;
      sc.record_stride = std::max<std::int64_t>(1, cfg_.mc.trajectory_steps / 100);
      sc.threads = cfg_.mc.threads;
      TrajectoryBatch batch;
      if (positive_recurrent()) {
        batch = simulate(SimChain(transform_chain()), sc);
      } else {
        sc.x_start = 0;
        batch = simulate(SimChain(chain(), cache_limit()), sc);
      }
      auto os = io::open_out(out_ / "trajectories.jsonl");
      io::write_trajectories_jsonl(os, batch);
    });
  }

  /*
   * Full run. Positive recurrent chains go through the stationary tail
   * analysis; other chains stop after classification and get the
   * transience suite (passage times, return bound, Gamma limit, renewal).
   */
  void run() {
    validate();
    classify_chain();
    if (positive_recurrent()) {
      summary_["branch"] = "stationary_tail";
      solve();
      harmonic();
      transform_chain();
      hat_moments();
      renewal();
      gamma();
      fit();
      prefactor();
    } else {
      summary_["branch"] = "transience_suite";
      summary_["note"] = "not positive recurrent; stationary tail analysis inapplicable";
      passage();
      return_probability();
      gamma();
      renewal();
    }
    trajectories();
  }

  bool all_pass() const {
    return std::all_of(criteria_.begin(), criteria_.end(), [](const Criterion &c) { return c.pass; });
  }

  /// summary.json, report.md and metadata.json (the only file with a timestamp).
  void write_outputs(const std::string &command) {
    io::json crit = io::json::array();
    for (const auto &c : criteria_) {
      crit.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    }
    summary_["criteria"] = crit;
    summary_["all_pass"] = all_pass();
    {
      auto os = io::open_out(out_ / "summary.json");
      os << summary_.dump(2) << '\n';
    }
    {
      auto os = io::open_out(out_ / "report.md");
      write_report(os);
    }
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    auto os = io::open_out(out_ / "metadata.json");
    os << io::json{{"generated_at", stamp}, {"command", command}}.dump(2) << '\n';
  }

private:
  template <class F>
  void guard(const char *stage, F &&f) {
    try {
      f();
    } catch (const PipelineError &) {
      throw;
    } catch (const std::exception &e) {
      throw PipelineError(stage, e.what());
    }
  }

  void require_recurrent(const char *stage) {
    if (!positive_recurrent()) {
      throw PipelineError(stage, "not positive recurrent; stationary tail analysis inapplicable");
    }
  }

  State cache_limit() const { return std::max<State>(cfg_.N, 4 * cfg_.mc.return_y); }

  void add(std::string name, bool pass, std::string detail) {
    criteria_.push_back({std::move(name), pass, std::move(detail)});
  }

  io::json config_json() const {
    const FitWindow w = cfg_.fit_window();
    return {{"family", cfg_.family}, {"mu", cfg_.mu},     {"b", cfg_.b},       {"delta", cfg_.delta},
            {"A", cfg_.A},           {"N", cfg_.N},       {"seed", cfg_.seed}, {"gb_tol", cfg_.gb_tol},
            {"fit_window", {w.lo, w.hi}}};
  }

  void write_report(std::ostream &os) const {
    os << "# Stationary tail report: " << cfg_.family << " (mu = " << io::num(cfg_.mu, 6) << ", b = " << io::num(cfg_.b, 6)
       << ")\n\n";
    os << "Truncation N = " << cfg_.N << ", seed = " << cfg_.seed << ".\n\n";
    if (cert_) {
      os << "Classification: **" << to_string(cert_->classification) << "** (" << cert_->certificate << ").\n\n";
    }
    if (summary_.contains("note")) {
      os << summary_["note"].get<std::string>() << ".\n\n";
    }
    os << "## Criteria\n\n| criterion | verdict | detail |\n|---|---|---|\n";
    for (const auto &c : criteria_) {
      os << "| " << c.name << " | " << (c.pass ? "PASS" : "FAIL") << " | " << c.detail << " |\n";
    }
    if (diag_) {
      os << "\n## Assumptions\n\n| check | status | witness | detail |\n|---|---|---|---|\n";
      for (const auto &c : diag_->checks) {
        os << "| " << c.name << " | " << to_string(c.status) << " | " << c.witness << " | " << c.detail << " |\n";
      }
    }
    if (fit_) {
      os << "\n## Tail fit\n\nWindow [" << fit_->window.lo << ", " << fit_->window.hi << "], slope "
         << io::num(fit_->exponent_fit, 6) << " (stderr " << io::num(fit_->exponent_stderr, 6) << "), theory "
         << io::num(fit_->exponent_theory, 6) << ".\n\n| x | pi(x,inf) e^R / x |\n|---|---|\n";
      const std::size_t n = fit_->xs.size();
      for (std::size_t k = 0; k < 10; ++k) {
        const std::size_t i = k * (n - 1) / 9;
        os << "| " << fit_->xs[i] << " | " << io::num(fit_->ell_ratio[i], 6) << " |\n";
      }
    }
    if (pref_) {
      os << "\n## Prefactor\n\n| quantity | value |\n|---|---|\n"
         << "| boundary integral | " << io::num(pref_->boundary_integral, 6) << " |\n"
         << "| closed-form factor | " << io::num(pref_->factor, 6) << " |\n"
         << "| c predicted | " << io::num(pref_->c_predicted, 6) << " |\n"
         << "| c from renewal | " << io::num(pref_->c_renewal, 6) << " +- " << io::num(pref_->c_renewal_stderr, 6) << " |\n"
         << "| c empirical | " << io::num(fit_->c_empirical, 6) << " |\n";
    }
    if (passage_) {
      os << "\n## First passage\n\n| x | E T | stderr | bound |\n|---|---|---|---|\n";
      for (const auto &r : *passage_) {
        os << "| " << r.x << " | " << io::num(r.mean_T, 6) << " | " << io::num(r.stderr_T, 6) << " | "
           << io::num(r.bound.mean_bound, 6) << " |\n";
      }
    }
    if (gamma_) {
      os << "\n## Gamma limit\n\n| KS | mean | target mean | var | target var |\n|---|---|---|---|---|\n| "
         << io::num(gamma_->ks_stat, 6) << " | " << io::num(gamma_->mean, 6) << " | " << io::num(gamma_->target_mean, 6)
         << " | " << io::num(gamma_->var, 6) << " | " << io::num(gamma_->target_var, 6) << " |\n";
    }
  }

  PipelineConfig cfg_;
  std::filesystem::path out_;
  io::json summary_;
  std::vector<Criterion> criteria_;
  std::optional<ChainSpec> spec_;
  std::optional<AssumptionDiagnostics> diag_;
  std::optional<DriftReport> cert_;
  std::optional<StationaryTable> stat_;
  std::optional<HarmonicTable> harm_;
  std::unique_ptr<TransformedChain> tc_;
  std::optional<MomentTable> hat_mt_;
  std::optional<RenewalEstimate> ren_;
  std::optional<GammaTestResult> gamma_;
  std::optional<TailFitReport> fit_;
  std::optional<PrefactorPrediction> pref_;
  std::optional<std::vector<PassageRecord>> passage_;
  std::optional<ReturnCheck> ret_;
};

} // namespace lamperti

#endif /* LAMPERTI_PIPELINE_HPP_ */
