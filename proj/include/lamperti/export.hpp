#ifndef LAMPERTI_EXPORT_HPP_
#define LAMPERTI_EXPORT_HPP_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lamperti/analysis.hpp"
#include "lamperti/assumptions.hpp"
#include "lamperti/chain_model.hpp"
#include "lamperti/exact_solver.hpp"
#include "lamperti/h_transform.hpp"
#include "lamperti/harmonic.hpp"
#include "lamperti/lyapunov.hpp"
#include "lamperti/mc_engine.hpp"

namespace lamperti::io {

using nlohmann::json;

/// Decimal with `digits` significant digits (17 round-trips); "nan"/"inf" spelled out.
inline std::string num(double v, int digits = 17) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

/// JSON has no NaN or infinity; those become null.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::ofstream open_out(const std::filesystem::path &p) {
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  std::ofstream os(p, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot open " + p.string() + " for writing");
  }
  return os;
}

inline void write_moments_csv(std::ostream &os, const MomentTable &t) {
  os << "x,m1,m2,m3,abs3pd\n";
  for (std::size_t i = 0; i < t.grid.size(); ++i) {
    os << t.grid[i] << ',' << num(t.m1[i]) << ',' << num(t.m2[i]) << ',' << num(t.m3[i]) << ','
       << num(t.abs3pd[i]) << '\n';
  }
}

inline void write_drift_csv(std::ostream &os, const DriftReport &r) {
  os << "x,drift,normalized\n";
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    os << r.grid[i] << ',' << num(r.drift[i]) << ',' << num(r.normalized[i]) << '\n';
  }
}

inline void write_stationary_csv(std::ostream &os, const StationaryTable &t) {
  os << "x,pi,tail\n";
  for (std::size_t x = 0; x < t.probs.size(); ++x) {
    os << x << ',' << num(t.probs[x]) << ',' << num(t.tail[x]) << '\n';
  }
}

inline void write_harmonic_csv(std::ostream &os, const HarmonicTable &h) {
  os << "x,V,U,expR,residual\n";
  for (std::size_t i = 0; i < h.grid.size(); ++i) {
    os << h.grid[i] << ',' << num(h.V[i]) << ',' << num(h.U[i]) << ',' << num(h.expR[i]) << ','
       << num(h.residual[i]) << '\n';
  }
}

inline void write_kernel_csv(std::ostream &os, const TransformedChain &tc) {
  os << "x,y,p\n";
  for (State x = tc.support_min(); x <= tc.truncation_N(); ++x) {
    const JumpLaw r = tc.row(x);
    for (std::size_t i = 0; i < r.size(); ++i) {
      os << x << ',' << x + r.offsets[i] << ',' << num(r.probs[i]) << '\n';
    }
  }
}

inline void write_init_law_csv(std::ostream &os, const InitialLaw &init) {
  os << "x,p\n";
  for (std::size_t i = 0; i < init.states.size(); ++i) {
    os << init.states[i] << ',' << num(init.probs[i]) << '\n';
  }
}

inline void write_renewal_csv(std::ostream &os, const RenewalEstimate &e) {
  os << "x,H,stderr,H_over_x2\n";
  for (std::size_t i = 0; i < e.x_grid.size(); ++i) {
    const double x2 = static_cast<double>(e.x_grid[i]) * static_cast<double>(e.x_grid[i]);
    os << e.x_grid[i] << ',' << num(e.H[i]) << ',' << num(e.stderr_[i]) << ',' << num(e.H[i] / x2) << '\n';
  }
}

inline void write_tail_fit_csv(std::ostream &os, const TailFitReport &r) {
  os << "x,ell_ratio\n";
  for (std::size_t i = 0; i < r.xs.size(); ++i) {
    os << r.xs[i] << ',' << num(r.ell_ratio[i]) << '\n';
  }
}

inline void write_passage_csv(std::ostream &os, const std::vector<PassageRecord> &recs) {
  os << "x,mean_T,stderr_T,bound,within_bound,censored_fraction,tail_slope\n";
  for (const auto &r : recs) {
    os << r.x << ',' << num(r.mean_T) << ',' << num(r.stderr_T) << ',' << num(r.bound.mean_bound) << ','
       << (r.mean_within_bound ? 1 : 0) << ',' << num(r.censored_fraction) << ',' << num(r.tail_slope) << '\n';
  }
}

/// One JSON object per replica.
inline void write_trajectories_jsonl(std::ostream &os, const TrajectoryBatch &b) {
  for (std::size_t r = 0; r < b.finals.size(); ++r) {
    json j{{"replica", r}, {"start", b.starts[r]}, {"final", b.finals[r]}};
    if (!b.paths.empty()) {
      j["path"] = b.paths[r];
    }
    os << j.dump() << '\n';
  }
}

inline json to_json(const AssumptionDiagnostics &d) {
  json arr = json::array();
  for (const auto &c : d.checks) {
    arr.push_back({{"name", c.name},
                   {"status", to_string(c.status)},
                   {"witness", c.witness},
                   {"value", jnum(c.value)},
                   {"detail", c.detail}});
  }
  return {{"all_pass", d.all_pass()}, {"checks", arr}};
}

inline json to_json(const DriftReport &r) {
  return {{"classification", to_string(r.classification)},
          {"certificate", r.certificate},
          {"epsilon", jnum(r.epsilon)},
          {"threshold", r.threshold},
          {"drift_ratio_inf", jnum(r.drift_ratio_inf)},
          {"gamma", jnum(r.gamma)},
          {"delta", jnum(r.delta)},
          {"big_jumps_hold", r.big_jumps.holds}};
}

inline json to_json(const StationaryTable &t) {
  return {{"method", to_string(t.method)},
          {"truncation_N", t.truncation_N},
          {"tail_mass_bound", jnum(t.tail_mass_bound)},
          {"residual", jnum(t.residual)},
          {"doubling_rel_change", jnum(t.doubling_rel_change)}};
}

inline json to_json(const HarmonicTable &h) {
  return {{"truncation_N", h.truncation_N},
          {"boundary_x0", h.boundary_x0},
          {"C0", h.C0 ? jnum(*h.C0) : json(nullptr)},
          {"max_residual", jnum(h.max_residual)},
          {"sensitivity", jnum(h.sensitivity)},
          {"sensitivity_warning", h.sensitivity_warning},
          {"inf_V", jnum(h.inf_V)}};
}

inline json to_json(const GammaTestResult &g) {
  return {{"ks_stat", jnum(g.ks_stat)}, {"target_mean", jnum(g.target_mean)}, {"target_var", jnum(g.target_var)},
          {"mean", jnum(g.mean)},       {"var", jnum(g.var)},                 {"mean_err", jnum(g.mean_err)},
          {"var_err", jnum(g.var_err)}, {"samples", g.samples.size()}};
}

inline json to_json(const TailFitReport &r) {
  return {{"exponent_fit", jnum(r.exponent_fit)},
          {"exponent_stderr", jnum(r.exponent_stderr)},
          {"exponent_theory", jnum(r.exponent_theory)},
          {"c_empirical", jnum(r.c_empirical)},
          {"c_predicted", jnum(r.c_predicted)},
          {"flatness", jnum(r.flatness)},
          {"window", {r.window.lo, r.window.hi}},
          {"requested_window", {r.requested.lo, r.requested.hi}},
          {"shrunk", r.shrunk},
          {"exponent_pass", r.exponent_pass},
          {"flat_pass", r.flat_pass},
          {"pass", r.pass}};
}

inline json to_json(const PrefactorPrediction &p) {
  return {{"c_predicted", jnum(p.c_predicted)},       {"factor", jnum(p.factor)},
          {"boundary_integral", jnum(p.boundary_integral)}, {"kappa", jnum(p.kappa)},
          {"kappa_stderr", jnum(p.kappa_stderr)},     {"c_renewal", jnum(p.c_renewal)},
          {"c_renewal_stderr", jnum(p.c_renewal_stderr)}};
}

} // namespace lamperti::io

#endif /* LAMPERTI_EXPORT_HPP_ */
