#ifndef LAMPERTI_HARMONIC_HPP_
#define LAMPERTI_HARMONIC_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "lamperti/chain_model.hpp"
#include "lamperti/kernel.hpp"
#include "lamperti/lyapunov.hpp"
#include "lamperti/rates.hpp"
#include "lamperti/rng.hpp"

namespace lamperti {

struct HarmonicTable {
  std::vector<State> grid; // 0..N+J
  std::vector<double> V;
  std::vector<double> U;
  std::vector<double> expR;
  std::vector<double> residual; // |V - sum_{y>x0} P(x,y)V(y)| / |V|, zero on B
  std::optional<double> C0;
  State boundary_x0 = 0;
  State truncation_N = 0;
  int max_jump = 1;
  RateFunctions rates;

  double max_residual = 0.0;   // over (x0, N-J]
  State positive_from = -1;    // V > 0 on (positive_from, N]
  double inf_V = 0.0;          // inf of V over (x0, N]
  double sensitivity = std::numeric_limits<double>::quiet_NaN();
  bool sensitivity_warning = false;
  double abs_series_max = 0.0; // max over the window of E_x sum_{n<tau_B} |u(X_n)| / V(x)

  State max_state() const { return static_cast<State>(V.size()) - 1; }

  double V_at(State x) const {
    if (x < 0 || x > max_state()) {
      throw Rejected("HarmonicTable: state outside the table", x);
    }
    return V[static_cast<std::size_t>(x)];
  }
  double U_at(State x) const { return U.at(static_cast<std::size_t>(x)); }
  double expR_at(State x) const { return expR.at(static_cast<std::size_t>(x)); }
};

/// Potential given by an arbitrary function of the state (zero on B).
struct CallablePotential {
  std::function<double(State)> f;

  double U(State x) const { return f(x); }
  double U_diff(State from, State to) const { return f(to) - f(from); }
};

struct HarmonicOptions {
  bool check_sensitivity = true;
  bool require_positive_recurrent = true;
};

namespace detail {

// C0 = m3 (rho - 2) / (3b) when the third moment converges.
inline std::optional<double> harmonic_C0(const DriftProfile &pf) {
  if (pf.m3_mode.kind != M3Kind::converges) {
    return std::nullopt;
  }
  return pf.m3_mode.m3 * (pf.rho() - 2.0) / (3.0 * pf.b);
}

struct KilledSolve {
  std::vector<double> g;   // on (x0, N]
  std::vector<double> u;   // drift of the potential on (x0, N]
  std::vector<double> abs_series;
  std::vector<double> resid_abs;
};

// Solves (I - K) g = u on (x0, N]; the potential enters only through u.
template <typename Potential>
KilledSolve killed_poisson(const ChainSpec &spec, State N, const Potential &pot) {
  const State x0 = spec.boundary_x0;
  const int n = static_cast<int>(N - x0);
  KilledSolve out;
  out.u.resize(static_cast<std::size_t>(n));
  for (State x = x0 + 1; x <= N; ++x) {
    const JumpLaw law = spec.law(x);
    double s = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      const State y = std::max<State>(x + law.offsets[i], 0);
      const double d = y <= x0 ? -pot.U(x) : pot.U_diff(x, y);
      s += law.probs[i] * d;
    }
    out.u[static_cast<std::size_t>(x - x0 - 1)] = s;
  }
  const SparseRowMatrix K = killed_kernel(spec, x0, N);
  Eigen::SparseMatrix<double> A(n, n);
  A.setIdentity();
  A -= Eigen::SparseMatrix<double>(K);
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) {
    throw Rejected("harmonic_solve: singular killed system (B unreachable in the truncation)");
  }
  Eigen::Map<const Eigen::VectorXd> u(out.u.data(), n);
  Eigen::VectorXd g = lu.solve(u);
  if (lu.info() != Eigen::Success || !g.allFinite()) {
    throw Rejected("harmonic_solve: solve failed");
  }
  for (int it = 0; it < 3; ++it) {
    g += lu.solve(u - A * g);
  }
  const Eigen::VectorXd r = u - A * g;
  const Eigen::VectorXd a = lu.solve(Eigen::VectorXd(u.cwiseAbs()));
  out.g.assign(g.data(), g.data() + n);
  out.abs_series.assign(a.data(), a.data() + n);
  out.resid_abs.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.resid_abs[static_cast<std::size_t>(i)] = std::abs(r(i));
  }
  return out;
}

template <typename Potential>
HarmonicTable assemble(const ChainSpec &spec, State N, const Potential &pot, const RateFunctions &rates) {
  const State x0 = spec.boundary_x0;
  const int J = spec.max_up_jump;
  const KilledSolve ks = killed_poisson(spec, N, pot);
  HarmonicTable t;
  t.boundary_x0 = x0;
  t.truncation_N = N;
  t.max_jump = J;
  t.rates = rates;
  t.C0 = harmonic_C0(spec.profile);
  const State top = N + J;
  for (State x = 0; x <= top; ++x) {
    const double ux = x <= x0 ? 0.0 : pot.U(x);
    double gx = 0.0;
    if (x > x0 && x <= N) {
      gx = ks.g[static_cast<std::size_t>(x - x0 - 1)];
    }
    t.grid.push_back(x);
    t.U.push_back(ux);
    t.V.push_back(ux + gx);
    t.expR.push_back(rates.expR(static_cast<double>(x)));
    double res = 0.0;
    if (x > x0 && x <= N) {
      const double vx = std::abs(ux + gx);
      res = vx > 0.0 ? ks.resid_abs[static_cast<std::size_t>(x - x0 - 1)] / vx
                     : ks.resid_abs[static_cast<std::size_t>(x - x0 - 1)];
    }
    t.residual.push_back(res);
  }
  t.max_residual = 0.0;
  for (State x = x0 + 1; x <= N - J; ++x) {
    t.max_residual = std::max(t.max_residual, t.residual[static_cast<std::size_t>(x)]);
  }
  t.inf_V = std::numeric_limits<double>::infinity();
  t.positive_from = x0;
  for (State x = x0 + 1; x <= N; ++x) {
    const double v = t.V[static_cast<std::size_t>(x)];
    t.inf_V = std::min(t.inf_V, v);
    if (v <= 0.0) {
      t.positive_from = x;
    }
  }
  for (State x = x0 + 1; x <= N; ++x) {
    const double v = t.V[static_cast<std::size_t>(x)];
    if (v > 0.0) {
      t.abs_series_max =
          std::max(t.abs_series_max, ks.abs_series[static_cast<std::size_t>(x - x0 - 1)] / v);
    }
  }
  return t;
}

inline double max_relative_change(const HarmonicTable &a, const HarmonicTable &b, State lo, State hi) {
  double worst = 0.0;
  for (State x = lo; x <= hi; ++x) {
    const double vb = b.V[static_cast<std::size_t>(x)];
    const double va = a.V[static_cast<std::size_t>(x)];
    worst = std::max(worst, std::abs(va - vb) / std::max(std::abs(vb), 1e-300));
  }
  return worst;
}

inline void check_preconditions(const ChainSpec &spec, State N, const HarmonicOptions &opt) {
  const State x0 = spec.boundary_x0;
  if (N < 10 * std::max<State>(x0, 1)) {
    throw Rejected("harmonic_solve: N must be at least 10 x0");
  }
  if (opt.require_positive_recurrent) {
    const auto grid = state_range(x0, N);
    if (classify(spec, grid).classification != Classification::positive_recurrent) {
      throw Rejected("harmonic_solve: chain is not certified positive recurrent");
    }
  }
}

} // namespace detail

/*
 * Harmonic function of the chain killed on entering B = [0, x0]:
 * V = U + g, where g solves (I - P_killed) g = u on (x0, N], u is the drift
 * of U, and g = 0 above N (V = U there). With check_sensitivity, the solve
 * is repeated at 2N and the largest relative change of V on (x0, N/2] is
 * recorded; above 1e-3 the warning flag is set.
 */
inline HarmonicTable harmonic_solve(const ChainSpec &spec, State N, HarmonicOptions opt = {}) {
  detail::check_preconditions(spec, N, opt);
  const RateFunctions rates = RateFunctions::from(spec);
  const int J = spec.max_up_jump;
  const PotentialTable pot(rates, (opt.check_sensitivity ? 2 * N : N) + J);
  HarmonicTable t = detail::assemble(spec, N, pot, rates);
  if (opt.check_sensitivity) {
    const HarmonicTable big = detail::assemble(spec, 2 * N, pot, rates);
    t.sensitivity = detail::max_relative_change(t, big, spec.boundary_x0 + 1, N / 2);
    t.sensitivity_warning = t.sensitivity > 1e-3;
  }
  return t;
}

/// Same solve with an arbitrary potential in place of U.
inline HarmonicTable harmonic_solve_with(const ChainSpec &spec, State N,
                                         std::function<double(State)> U_alt,
                                         HarmonicOptions opt = {}) {
  detail::check_preconditions(spec, N, opt);
  const RateFunctions rates = RateFunctions::from(spec);
  const CallablePotential pot{std::move(U_alt)};
  HarmonicTable t = detail::assemble(spec, N, pot, rates);
  if (opt.check_sensitivity) {
    const HarmonicTable big = detail::assemble(spec, 2 * N, pot, rates);
    t.sensitivity = detail::max_relative_change(t, big, spec.boundary_x0 + 1, N / 2);
    t.sensitivity_warning = t.sensitivity > 1e-3;
  }
  return t;
}

struct IdentityMcParams {
  std::uint64_t seed = 1;
  std::int64_t replicas = 100000;
};

/*
 * Relative deviation |E_x{V(X_n); tau_B > n} - V(x)| / V(x). Exact kernel
 * powers for n <= 20, Monte Carlo beyond.
 */
inline double harmonic_identity_check(const ChainSpec &spec, const HarmonicTable &table, int n,
                                      State x, IdentityMcParams mc = {}) {
  const State x0 = table.boundary_x0;
  const double vx = table.V_at(x);
  if (n == 0) {
    return 0.0;
  }
  if (n <= 20) {
    const State top = table.max_state();
    std::vector<double> mass(static_cast<std::size_t>(top) + 1, 0.0);
    mass[static_cast<std::size_t>(x)] = 1.0;
    State hi = x;
    for (int step = 0; step < n; ++step) {
      std::vector<double> next(mass.size(), 0.0);
      State new_hi = hi;
      for (State z = x0 + 1; z <= hi; ++z) {
        const double m = mass[static_cast<std::size_t>(z)];
        if (m == 0.0) {
          continue;
        }
        const JumpLaw law = spec.law(z);
        for (std::size_t i = 0; i < law.size(); ++i) {
          const State y = z + law.offsets[i];
          if (y <= x0) {
            continue;
          }
          if (y > top) {
            throw Rejected("harmonic_identity_check: path leaves the table", y);
          }
          next[static_cast<std::size_t>(y)] += m * law.probs[i];
          new_hi = std::max(new_hi, y);
        }
      }
      mass.swap(next);
      hi = new_hi;
    }
    double e = 0.0;
    for (State z = x0 + 1; z <= hi; ++z) {
      e += mass[static_cast<std::size_t>(z)] * table.V[static_cast<std::size_t>(z)];
    }
    return std::abs(e - vx) / std::abs(vx);
  }
  const JumpSampler sampler(spec, table.max_state());
  double s = 0.0;
  for (std::int64_t r = 0; r < mc.replicas; ++r) {
    Engine g = make_stream(mc.seed, static_cast<std::uint64_t>(r));
    State z = x;
    bool alive = true;
    for (int k = 0; k < n; ++k) {
      z = sampler.step(z, g);
      if (z <= x0) {
        alive = false;
        break;
      }
    }
    if (alive) {
      s += table.V_at(z);
    }
  }
  return std::abs(s / static_cast<double>(mc.replicas) - vx) / std::abs(vx);
}

struct UcDrift {
  double drift = 0.0;      // E U_C(x + xi) - U_C(x)
  double normalized = 0.0; // drift * x^2 / e^{R(x)}
  double predicted = 0.0;  // (rho - 1) b (C0 - C) / 2, NaN without C0
  double drift_U = 0.0;    // drift of U alone
  double drift_expR = 0.0; // drift of e^R alone
};

namespace detail {

// U(y) - U(x) with U = 0 on B.
inline double U_increment(const RateFunctions &rf, State x, State y) {
  const double lo = std::max(static_cast<double>(x), rf.x0);
  const double hi = std::max(static_cast<double>(y), rf.x0);
  if (hi >= lo) {
    return rf.integrate_expR(lo, hi);
  }
  return -rf.integrate_expR(hi, lo);
}

// e^{R(y)} - e^{R(x)} without cancellation.
inline double expR_increment(const RateFunctions &rf, State x, State y) {
  const double xd = static_cast<double>(x);
  const double yd = static_cast<double>(y);
  const double dR = (rf.mu / rf.b) * std::log1p((yd * yd - xd * xd) / (1.0 + xd * xd));
  return rf.expR(xd) * std::expm1(dR);
}

} // namespace detail

/// Exact drift of U_C = U + C e^R at x.
inline UcDrift u_c_drift(const ChainSpec &spec, double C, State x) {
  const RateFunctions rf = RateFunctions::from(spec);
  const double xd = static_cast<double>(x);
  if (!(rf.U(xd) + C * rf.expR(xd) > 0.0)) {
    throw Rejected("u_c_drift: U_C(x) must be positive", x);
  }
  const JumpLaw law = spec.law(x);
  UcDrift d;
  for (std::size_t i = 0; i < law.size(); ++i) {
    const State y = std::max<State>(x + law.offsets[i], 0);
    d.drift_U += law.probs[i] * detail::U_increment(rf, x, y);
    d.drift_expR += law.probs[i] * detail::expR_increment(rf, x, y);
  }
  d.drift = d.drift_U + C * d.drift_expR;
  d.normalized = d.drift * xd * xd / rf.expR(xd);
  const auto C0 = detail::harmonic_C0(spec.profile);
  d.predicted = C0 ? (rf.rho - 1.0) * rf.b * (*C0 - C) / 2.0 : std::numeric_limits<double>::quiet_NaN();
  return d;
}

struct SandwichConstants {
  double C1 = 0.0; // U_{C1} has negative drift on the grid
  double C2 = 0.0; // U_{C2} has positive drift on the grid
  double kappa_min = 0.0;
  double kappa_max = 0.0;
};

/*
 * The drift of U_C is affine in C with negative slope, so it changes sign at
 * kappa(x) = -drift_U / drift_expR. C2 sits below all kappa on the grid and C1
 * above, each by `margin`.
 */
inline SandwichConstants find_sandwich_constants(const ChainSpec &spec, std::span<const State> grid,
                                                 double margin = 0.01) {
  SandwichConstants sc;
  sc.kappa_min = std::numeric_limits<double>::infinity();
  sc.kappa_max = -std::numeric_limits<double>::infinity();
  for (State x : grid) {
    const UcDrift d = u_c_drift(spec, 0.0, x);
    if (!(d.drift_expR < 0.0)) {
      throw Rejected("find_sandwich_constants: drift of e^R is not negative", x);
    }
    const double kappa = -d.drift_U / d.drift_expR;
    sc.kappa_min = std::min(sc.kappa_min, kappa);
    sc.kappa_max = std::max(sc.kappa_max, kappa);
  }
  sc.C2 = sc.kappa_min - margin;
  sc.C1 = sc.kappa_max + margin;
  return sc;
}

struct SandwichViolation {
  State x;
  int y;
  double lower;
  double middle;
  double upper;
};

struct SandwichReport {
  bool holds = true;
  std::size_t checked = 0;
  std::vector<SandwichViolation> violations;
};

/*
 * For x on the grid and 1 <= y <= max_y:
 *   dU + C2 d(e^R) <= V(x+y) - V(x) <= dU + C1 d(e^R).
 */
inline SandwichReport skip_free_sandwich_check(const ChainSpec &spec, const HarmonicTable &table,
                                               double C1, double C2, std::span<const State> grid,
                                               int max_y = 50) {
  if (spec.max_down_jump.value_or(2) > 1) {
    throw Rejected("skip_free_sandwich_check: chain must have jumps >= -1");
  }
  SandwichReport rep;
  const RateFunctions &rf = table.rates;
  for (State x : grid) {
    for (int y = 1; y <= max_y; ++y) {
      const double dU = detail::U_increment(rf, x, x + y);
      const double dE = detail::expR_increment(rf, x, x + y);
      const double mid = table.V_at(x + y) - table.V_at(x);
      const double lower = dU + C2 * dE;
      const double upper = dU + C1 * dE;
      ++rep.checked;
      if (!(lower <= mid && mid <= upper)) {
        rep.holds = false;
        rep.violations.push_back({x, y, lower, mid, upper});
      }
    }
  }
  return rep;
}

struct EquivalenceOptions {
  bool enforce_preconditions = true;
  bool check_sensitivity = false;
};

/*
 * Max |V_U - V_{U_alt}| on (x0, N/2] together with max V there. U_alt must
 * vanish on B, be positive off B and satisfy U_alt/U -> 1.
 */
struct EquivalenceResult {
  double max_abs_diff = 0.0;
  double max_V = 0.0;
};

inline EquivalenceResult u_equivalence_check(const ChainSpec &spec, State N,
                                             const std::function<double(State)> &U_alt,
                                             EquivalenceOptions opt = {}) {
  const State x0 = spec.boundary_x0;
  const RateFunctions rf = RateFunctions::from(spec);
  const PotentialTable pot(rf, N + spec.max_up_jump);
  if (opt.enforce_preconditions) {
    for (State z = 0; z <= x0; ++z) {
      if (U_alt(z) != 0.0) {
        throw Rejected("u_equivalence_check: U_alt must vanish on B", z);
      }
    }
    for (State z = x0 + 1; z <= N; ++z) {
      if (!(U_alt(z) > 0.0) || !std::isfinite(U_alt(z))) {
        throw Rejected("u_equivalence_check: U_alt must be positive and finite off B", z);
      }
    }
    const double far = std::abs(U_alt(N) / pot.U(N) - 1.0);
    const double mid = std::abs(U_alt(N / 2) / pot.U(N / 2) - 1.0);
    if (far > 0.05 || far > mid + 1e-12) {
      throw Rejected("u_equivalence_check: U_alt/U does not tend to 1", N);
    }
  }
  HarmonicOptions hopt;
  hopt.check_sensitivity = opt.check_sensitivity;
  const HarmonicTable a = harmonic_solve(spec, N, hopt);
  const HarmonicTable b = harmonic_solve_with(spec, N, U_alt, hopt);
  EquivalenceResult res;
  for (State x = x0 + 1; x <= N / 2; ++x) {
    res.max_abs_diff = std::max(res.max_abs_diff, std::abs(a.V_at(x) - b.V_at(x)));
    res.max_V = std::max(res.max_V, std::abs(a.V_at(x)));
  }
  return res;
}

} // namespace lamperti

#endif /* LAMPERTI_HARMONIC_HPP_ */
