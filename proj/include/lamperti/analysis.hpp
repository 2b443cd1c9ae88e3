#ifndef LAMPERTI_ANALYSIS_HPP_
#define LAMPERTI_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lamperti/exact_solver.hpp"
#include "lamperti/h_transform.hpp"
#include "lamperti/harmonic.hpp"
#include "lamperti/mc_engine.hpp"
#include "lamperti/rates.hpp"
#include "lamperti/stats.hpp"

namespace lamperti {

struct FitWindow {
  State lo = 0;
  State hi = 0;
};

/// Default fit window [N/40, N/4].
inline FitWindow default_window(State N) { return {N / 40, N / 4}; }

struct TailFitOptions {
  double exponent_tol = 0.1;
  double flatness_tol = 0.1; // max/min of the ratio on the upper half <= 1 + tol
};

struct TailFitReport {
  double exponent_fit = 0.0;
  double exponent_stderr = 0.0;
  double exponent_theory = 0.0; // 1 - 2mu/b
  std::vector<State> xs;
  std::vector<double> ell_ratio; // pi(x,inf) x^{2mu/b-1} / ell(x) = pi(x,inf) e^R / x
  double c_empirical = 0.0;      // median of ell_ratio on the upper half-window
  double flatness = 0.0;         // max/min of ell_ratio on the upper half-window
  double c_predicted = std::numeric_limits<double>::quiet_NaN();
  FitWindow window;
  FitWindow requested;
  bool shrunk = false;
  bool exponent_pass = false;
  bool flat_pass = false;
  bool pass = false;
};

/*
 * Log-log least squares of the stationary tail on the window, plus the ratio
 * sequence against the exact slowly varying factor. The window shrinks from
 * the right while the tail is below 1e-300.
 */
inline TailFitReport fit_tail(const StationaryTable &stat, const RateFunctions &rf, FitWindow window,
                              TailFitOptions opt = {}) {
  if (window.lo < 1 || window.hi <= window.lo) {
    throw Rejected("fit_tail: window must satisfy 1 <= lo < hi");
  }
  if (2 * window.hi > stat.truncation_N) {
    throw Rejected("fit_tail: window upper end exceeds N/2", window.hi);
  }
  TailFitReport rep;
  rep.requested = window;
  rep.exponent_theory = 1.0 - 2.0 * rf.mu / rf.b;
  State hi = window.hi;
  while (hi > window.lo && !(stat.tail_at(hi) >= 1e-300)) {
    --hi;
  }
  if (hi - window.lo < 4) {
    throw Rejected("fit_tail: tail underflows on the whole window", window.lo);
  }
  rep.shrunk = hi != window.hi;
  rep.window = {window.lo, hi};

  std::vector<double> lx;
  std::vector<double> ly;
  for (State x = window.lo; x <= hi; ++x) {
    const double t = stat.tail_at(x);
    const double xd = static_cast<double>(x);
    lx.push_back(std::log(xd));
    ly.push_back(std::log(t));
    rep.xs.push_back(x);
    rep.ell_ratio.push_back(std::exp(std::log(t) + rf.R(xd)) / xd);
  }
  const auto fit = stats::fit_line(lx, ly);
  rep.exponent_fit = fit.slope;
  rep.exponent_stderr = fit.slope_stderr;

  const std::size_t mid = rep.xs.size() / 2;
  const std::vector<double> upper(rep.ell_ratio.begin() + static_cast<std::ptrdiff_t>(mid), rep.ell_ratio.end());
  const auto [mn, mx] = std::minmax_element(upper.begin(), upper.end());
  rep.flatness = *mx / *mn;
  rep.c_empirical = stats::median(upper);

  rep.exponent_pass = std::abs(rep.exponent_fit - rep.exponent_theory) <= opt.exponent_tol;
  rep.flat_pass = *mn > 0.0 && rep.flatness <= 1.0 + opt.flatness_tol;
  rep.pass = rep.exponent_pass && rep.flat_pass;
  return rep;
}

/// Max/min of pi(x,inf) e^R / x over [lo, hi].
inline double ratio_flatness(const StationaryTable &stat, const RateFunctions &rf, State lo, State hi) {
  double mn = std::numeric_limits<double>::infinity();
  double mx = 0.0;
  for (State x = lo; x <= hi; ++x) {
    const double xd = static_cast<double>(x);
    const double v = std::exp(std::log(stat.tail_at(x)) + rf.R(xd)) / xd;
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  return mx / mn;
}

struct PrefactorPrediction {
  double c_predicted = 0.0;       // closed form times the boundary integral
  double factor = 0.0;            // 2 rho / ((2mu+b)(rho-2))
  double boundary_integral = 0.0; // sum_{z in B} pi(z) sum_{y > x0} P(z,y) V(y)
  // Same constant with the renewal coefficient kappa = lim H^(x)/x^2 taken from
  // simulation instead of 1/(2mu+b): c = I * 2 rho kappa / (rho - 2).
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double kappa_stderr = std::numeric_limits<double>::quiet_NaN();
  double c_renewal = std::numeric_limits<double>::quiet_NaN();
  double c_renewal_stderr = std::numeric_limits<double>::quiet_NaN();
};

/*
 * Prefactor of the stationary tail from the change-of-measure representation.
 * ren may be empty; otherwise its largest grid point supplies kappa.
 */
inline PrefactorPrediction predict_constant(const StationaryTable &stat, const HarmonicTable &harm,
                                            const TransformedChain &tc, const RenewalEstimate *ren = nullptr) {
  const RateFunctions &rf = harm.rates;
  if (!(rf.mu / rf.b > 0.55)) {
    throw Rejected("predict_constant: mu/b <= 0.55 is too close to the pole rho = 2");
  }
  if (stat.truncation_N < harm.boundary_x0 || tc.truncation_N() != harm.truncation_N) {
    throw Rejected("predict_constant: inputs come from different truncations");
  }
  PrefactorPrediction p;
  p.factor = 2.0 * rf.rho / ((2.0 * rf.mu + rf.b) * (rf.rho - 2.0));
  double I = 0.0;
  const ChainSpec &spec = tc.base();
  for (State z = 0; z <= harm.boundary_x0; ++z) {
    const JumpLaw law = spec.law(z);
    for (std::size_t i = 0; i < law.size(); ++i) {
      const State y = z + law.offsets[i];
      if (y > harm.boundary_x0) {
        I += stat.pi(z) * law.probs[i] * harm.V_at(y);
      }
    }
  }
  p.boundary_integral = I;
  p.c_predicted = p.factor * I;
  if (ren != nullptr && !ren->x_grid.empty()) {
    const auto it = std::max_element(ren->x_grid.begin(), ren->x_grid.end());
    const std::size_t k = static_cast<std::size_t>(it - ren->x_grid.begin());
    const double x2 = static_cast<double>(*it) * static_cast<double>(*it);
    p.kappa = ren->H[k] / x2;
    p.kappa_stderr = ren->stderr_[k] / x2;
    const double scale = I * 2.0 * rf.rho / (rf.rho - 2.0);
    p.c_renewal = scale * p.kappa;
    p.c_renewal_stderr = scale * p.kappa_stderr;
  }
  return p;
}

} // namespace lamperti

#endif /* LAMPERTI_ANALYSIS_HPP_ */
