// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "lamperti/analysis.hpp"
#include "lamperti/assumptions.hpp"
#include "lamperti/export.hpp"

using namespace lamperti;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string g6(double v) { return io::num(v, 6); }

// Exact birth-death tail by direct summation of the product formula weights,
// independent of the solver's log-space implementation.
std::vector<double> direct_tail(const ChainSpec &spec, State N) {
  std::vector<double> w(static_cast<std::size_t>(N) + 1, 1.0);
  for (State x = 1; x <= N; ++x) {
    w[static_cast<std::size_t>(x)] =
        w[static_cast<std::size_t>(x - 1)] * spec.law(x - 1).prob_of(1) / spec.law(x).prob_of(-1);
  }
  double z = 0.0;
  for (double v : w) {
    z += v;
  }
  std::vector<double> tail(w.size(), 0.0);
  for (State x = N - 1; x >= 0; --x) {
    tail[static_cast<std::size_t>(x)] = tail[static_cast<std::size_t>(x + 1)] + w[static_cast<std::size_t>(x + 1)] / z;
  }
  return tail;
}

double loglog_slope(const std::vector<double> &tail, State lo, State hi) {
  std::vector<double> lx;
  std::vector<double> ly;
  for (State x = lo; x <= hi; ++x) {
    lx.push_back(std::log(static_cast<double>(x)));
    ly.push_back(std::log(tail[static_cast<std::size_t>(x)]));
  }
  return stats::fit_line(lx, ly).slope;
}

struct Canonical {
  ChainSpec spec = make_birth_death(2.0, 1.0);
  StationaryTable stat = stationary_skip_free(spec, 2000);
  HarmonicTable harm = harmonic_solve(spec, 2000);
  TransformedChain tc = transform(spec, harm, stat);
};

const Canonical &canonical() {
  static const Canonical c;
  return c;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

Outcome tail_exponent() {
  Outcome o{true, ""};
  for (const auto &[mu, b] : {std::pair{2.0, 1.0}, std::pair{1.5, 1.0}, std::pair{3.0, 1.0}}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto spec = make_birth_death(mu, b);
    const auto stat = stationary_skip_free(spec, 2000);
    const auto rep = fit_tail(stat, RateFunctions::from(spec), {50, 500});
    const double secs = seconds_since(t0);
    const double oracle = loglog_slope(direct_tail(spec, 2000), 50, 500);
    const double theory = 1.0 - 2.0 * mu / b;
    const bool ok = std::abs(rep.exponent_fit - theory) <= 0.1 && std::abs(oracle - rep.exponent_fit) <= 1e-6 &&
                    secs < 1.0;
    o.pass = o.pass && ok;
    o.detail += "(" + g6(mu) + "," + g6(b) + ") slope " + g6(rep.exponent_fit) + " vs " + g6(theory) + " [" +
                fmt("%.2fs", secs) + "]; ";
  }
  return o;
}

Outcome oscillating_tail() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto spec = make_left_skip_free(2.0, 1.0, 0.2, 0.8);
  const auto stat = stationary_global_balance(spec, 2000);
  TailFitOptions opt;
  opt.exponent_tol = 0.15;
  const auto rep = fit_tail(stat, RateFunctions::from(spec), {50, 500}, opt);
  const double secs = seconds_since(t0);
  return {rep.exponent_pass && secs < 30.0,
          "left-skip-free m3 0.2/0.8 slope " + g6(rep.exponent_fit) + " vs -3 [" + fmt("%.2fs", secs) + "]"};
}

Outcome slowly_varying() {
  Outcome o{true, ""};
  for (const auto &[mu, b] : {std::pair{2.0, 1.0}, std::pair{1.5, 1.0}, std::pair{3.0, 1.0}}) {
    const auto spec = make_birth_death(mu, b);
    const auto stat = stationary_skip_free(spec, 2000);
    const double f = ratio_flatness(stat, RateFunctions::from(spec), 250, 500);
    o.pass = o.pass && f <= 1.1;
    o.detail += "(" + g6(mu) + "," + g6(b) + ") max/min " + g6(f) + "; ";
  }
  const auto lsf = make_left_skip_free(2.0, 1.0, 0.2, 0.8);
  const auto st = stationary_global_balance(lsf, 2000);
  const double f = ratio_flatness(st, RateFunctions::from(lsf), 250, 500);
  o.pass = o.pass && f <= 1.1;
  o.detail += "lsf max/min " + g6(f);
  return o;
}

Outcome harmonicity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto spec = make_birth_death(2.0, 1.0);
  const auto h = harmonic_solve(spec, 2000);
  const double secs = seconds_since(t0);
  // Residual recomputed here from the jump law.
  double res = 0.0;
  for (State x = h.boundary_x0 + 1; x < h.truncation_N; ++x) {
    const JumpLaw law = spec.law(x);
    double s = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      const State y = x + law.offsets[i];
      if (y > h.boundary_x0) {
        s += law.probs[i] * h.V_at(y);
      }
    }
    res = std::max(res, std::abs(s - h.V_at(x)) / std::abs(h.V_at(x)));
  }
  const double ratio = h.V_at(500) / h.U_at(500);
  return {res <= 1e-9 && ratio >= 0.95 && ratio <= 1.05 && h.sensitivity < 1e-3 && secs < 10.0,
          "residual " + g6(res) + ", V/U(500) " + g6(ratio) + ", doubling " + g6(h.sensitivity) + " [" +
              fmt("%.2fs", secs) + "]"};
}

Outcome uc_drift() {
  const auto spec = make_birth_death(2.0, 1.0);
  const double scale = (RateFunctions::from(spec).rho - 1.0) * spec.profile.b;
  Outcome o{true, ""};
  for (double C : {-1.0, 0.0, 1.0}) {
    const auto d = u_c_drift(spec, C, 500);
    const double pred = scale * (0.0 - C) / 2.0;
    // At C = C0 the prediction is zero; 10% of the |C - C0| = 1 magnitude is used.
    const double tol = C == 0.0 ? 0.1 * scale / 2.0 : 0.1 * std::abs(pred);
    o.pass = o.pass && std::abs(d.normalized - pred) <= tol;
    o.detail += "C=" + g6(C) + ": " + g6(d.normalized) + " vs " + g6(pred) + "; ";
  }
  return o;
}

Outcome hat_stochastic() {
  const auto &c = canonical();
  double worst = 0.0;
  for (State x = c.tc.support_min(); x <= c.tc.truncation_N(); ++x) {
    worst = std::max(worst, std::abs(c.tc.row(x).total() - 1.0));
  }
  // Hat moments from the base law and V directly.
  const JumpLaw law = c.spec.law(200);
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    const double p = law.probs[i] * c.harm.V_at(200 + law.offsets[i]) / c.harm.V_at(200);
    m1 += p * law.offsets[i];
    m2 += p * law.offsets[i] * law.offsets[i];
  }
  const auto mt = transformed_moments(c.tc, std::vector<State>{200});
  const double xm1 = 200.0 * mt.m1[0];
  return {worst <= 1e-9 && std::abs(xm1 - 3.0) <= 0.15 && std::abs(mt.m2[0] - 1.0) <= 0.05 &&
              std::abs(mt.m1[0] - m1) <= 1e-12 && std::abs(mt.m2[0] - m2) <= 1e-12,
          "max |row sum - 1| " + g6(worst) + ", x m1^(200) " + g6(xm1) + " vs 3, m2^(200) " + g6(mt.m2[0]) + " vs 1"};
}

Outcome gamma_limit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto &c = canonical();
  SimConfig cfg;
  cfg.seed = 2024;
  cfg.n_steps = 100000;
  cfg.n_replicas = 5000;
  const auto g = gamma_limit_test(SimChain(c.tc), cfg, c.tc.hat_mu, c.tc.hat_b);
  const double secs = seconds_since(t0);
  return {g.ks_stat <= 0.05 && g.mean_err <= 0.05 && secs < 300.0,
          "KS to Gamma(3.5, 2) " + g6(g.ks_stat) + ", mean X_n^2/n " + g6(g.mean) + " vs 7 [" + fmt("%.1fs", secs) +
              "]"};
}

Outcome renewal() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto &c = canonical();
  const std::vector<State> grid{100};
  SimConfig cfg;
  cfg.seed = 77;
  cfg.n_replicas = 2000;
  const auto hat = renewal_estimate(SimChain(c.tc), grid, 20.0, cfg);
  cfg.x_start = 0;
  const auto base = renewal_estimate(SimChain(make_birth_death_transient(2.0, 1.0), 5000), grid, 20.0, cfg);
  const double secs = seconds_since(t0);
  const double rh = hat.H[0] / 1e4;
  const double rb = base.H[0] / 1e4;
  return {std::abs(rh - 0.2) <= 0.02 && std::abs(rb - 1.0 / 3.0) <= 0.1 / 3.0 && secs < 600.0,
          "H^(100)/1e4 " + g6(rh) + " vs 0.2, H(100)/1e4 " + g6(rb) + " vs 0.333333 [" + fmt("%.1fs", secs) + "]"};
}

Outcome passage() {
  const auto spec = make_birth_death_transient(2.0, 1.0);
  const auto cert = classify(spec, state_range(spec.boundary_x0, 2000));
  const SimChain chain(spec, 5000);
  SimConfig cfg;
  cfg.seed = 99;
  cfg.n_steps = 1'000'000;
  cfg.n_replicas = 2000;
  cfg.x_start = 0;
  const std::vector<State> xs{50, 100, 200};
  const auto recs = passage_time_suite(chain, cert, xs, cfg);
  Outcome o{cert.classification == Classification::transient, ""};
  for (const auto &r : recs) {
    o.pass = o.pass && r.mean_within_bound;
    o.detail += "E T(" + std::to_string(r.x) + ") " + g6(r.mean_T) + " <= " + g6(r.bound.mean_bound) + "; ";
  }
  ReturnMcParams mc;
  mc.seed = 100;
  mc.replicas = 10000;
  const auto rc = return_check(chain, 400, 40, cert.delta, mc);
  o.pass = o.pass && rc.within_bound && rc.censored == 0;
  o.detail += "P_400{<=40} " + g6(rc.probability) + " <= " + g6(rc.bound) + " + 3*" + g6(rc.stderr_);
  return o;
}

Outcome prefactor() {
  const auto &c = canonical();
  const auto p = predict_constant(c.stat, c.harm, c.tc);
  const auto rep = fit_tail(c.stat, c.harm.rates, {50, 500});
  const double ratio = rep.c_empirical / p.c_predicted;
  return {ratio >= 0.8 && ratio <= 1.25,
          "c_emp " + g6(rep.c_empirical) + ", c_pred " + g6(p.c_predicted) + ", ratio " + g6(ratio)};
}

Outcome origin_counterexample() {
  const auto oj = make_origin_jump_chain(make_birth_death_transient(2.5, 1.0));
  const auto cert = classify(oj, state_range(10, 4000, 10));
  const auto diag = validate_assumptions(oj, state_range(10, 2000, 10));
  SimConfig cfg;
  cfg.seed = 11;
  cfg.n_steps = 10'000'000;
  const auto occ = stationary_occupation(SimChain(oj, 20000), cfg, 20000, 1);
  const bool ratio_ok = cert.drift_ratio_inf > 1.0;
  const bool big_jumps_fail = diag.find("big_jumps")->status == CheckStatus::fail;
  return {occ.cycles >= 100 && ratio_ok && big_jumps_fail,
          std::to_string(occ.cycles) + " cycles in 1e7 steps, inf 2x m1/m2 " + g6(cert.drift_ratio_inf) + ", big-jump check " +
              to_string(diag.find("big_jumps")->status)};
}

Outcome cross_oracle() {
  const auto spec = make_birth_death(2.0, 1.0);
  const auto pf = stationary_skip_free(spec, 2000);
  const auto gb = stationary_global_balance(spec, 2000, 1e-10, false);
  double diff = 0.0;
  for (State x = 0; x <= 2000; ++x) {
    diff = std::max(diff, std::abs(pf.pi(x) - gb.pi(x)));
  }
  SimConfig cfg;
  cfg.seed = 5;
  cfg.n_steps = 10'000'000;
  const auto occ = stationary_occupation(SimChain(spec, 5000), cfg, 2000);
  const double tv = tv_distance(occ, pf, 50);
  return {diff <= 1e-8 && tv <= 0.01, "max |pi_pf - pi_gb| " + g6(diff) + ", TV on [0,50] " + g6(tv)};
}

} // namespace

int main() {
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
      {"tail exponent, birth-death families", tail_exponent},
      {"tail exponent, oscillating third moment", oscillating_tail},
      {"slowly varying factor flat on [250,500]", slowly_varying},
      {"harmonicity of V", harmonicity},
      {"drift of U_C", uc_drift},
      {"h-transform rows and moments", hat_stochastic},
      {"Gamma limit of the hat chain", gamma_limit},
      {"renewal function growth", renewal},
      {"passage-time and return bounds", passage},
      {"prefactor consistency", prefactor},
      {"jump-to-origin counterexample", origin_counterexample},
      {"cross-oracle agreement", cross_oracle},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
