#ifndef LAMPERTI_ASSUMPTIONS_HPP_
#define LAMPERTI_ASSUMPTIONS_HPP_

#include <cmath>
#include <deque>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lamperti/chain_model.hpp"
#include "lamperti/lyapunov.hpp"
#include "lamperti/rates.hpp"
#include "lamperti/stats.hpp"

namespace lamperti {

// Successor states on the truncation [0, N]; jumps above N land on N.
inline std::vector<State> truncated_successors(const ChainSpec &spec, State x, State N) {
  const JumpLaw law = spec.law(x);
  std::vector<State> out;
  for (std::size_t i = 0; i < law.size(); ++i) {
    if (law.probs[i] <= 0.0) {
      continue;
    }
    out.push_back(std::clamp<State>(x + law.offsets[i], 0, N));
  }
  return out;
}

/// States of [0, N] from which B = [0, x0] cannot be reached.
inline std::vector<State> states_not_reaching_boundary(const ChainSpec &spec, State N) {
  std::vector<std::vector<State>> pred(static_cast<std::size_t>(N) + 1);
  for (State x = 0; x <= N; ++x) {
    for (State y : truncated_successors(spec, x, N)) {
      pred[static_cast<std::size_t>(y)].push_back(x);
    }
  }
  std::vector<char> seen(static_cast<std::size_t>(N) + 1, 0);
  std::deque<State> queue;
  for (State z = 0; z <= std::min(spec.boundary_x0, N); ++z) {
    seen[static_cast<std::size_t>(z)] = 1;
    queue.push_back(z);
  }
  while (!queue.empty()) {
    const State y = queue.front();
    queue.pop_front();
    for (State x : pred[static_cast<std::size_t>(y)]) {
      if (!seen[static_cast<std::size_t>(x)]) {
        seen[static_cast<std::size_t>(x)] = 1;
        queue.push_back(x);
      }
    }
  }
  std::vector<State> bad;
  for (State x = 0; x <= N; ++x) {
    if (!seen[static_cast<std::size_t>(x)]) {
      bad.push_back(x);
    }
  }
  return bad;
}

/// States of [0, N] not reachable from the origin.
inline std::vector<State> states_unreachable_from_origin(const ChainSpec &spec, State N) {
  std::vector<char> seen(static_cast<std::size_t>(N) + 1, 0);
  std::deque<State> queue{0};
  seen[0] = 1;
  while (!queue.empty()) {
    const State x = queue.front();
    queue.pop_front();
    for (State y : truncated_successors(spec, x, N)) {
      if (!seen[static_cast<std::size_t>(y)]) {
        seen[static_cast<std::size_t>(y)] = 1;
        queue.push_back(y);
      }
    }
  }
  std::vector<State> bad;
  for (State x = 0; x <= N; ++x) {
    if (!seen[static_cast<std::size_t>(x)]) {
      bad.push_back(x);
    }
  }
  return bad;
}

enum class CheckStatus { pass, fail, inconclusive };

inline const char *to_string(CheckStatus s) {
  switch (s) {
  case CheckStatus::pass:
    return "pass";
  case CheckStatus::fail:
    return "fail";
  default:
    return "inconclusive";
  }
}

struct AssumptionCheck {
  std::string name;
  CheckStatus status = CheckStatus::inconclusive;
  State witness = -1;
  double value = 0.0;
  std::string detail;
};

struct AssumptionDiagnostics {
  std::vector<AssumptionCheck> checks;

  const AssumptionCheck *find(const std::string &name) const {
    for (const auto &c : checks) {
      if (c.name == name) {
        return &c;
      }
    }
    return nullptr;
  }

  bool all_pass() const {
    for (const auto &c : checks) {
      if (c.status != CheckStatus::pass) {
        return false;
      }
    }
    return true;
  }
};

struct AssumptionOptions {
  State excursion_level = -1; // x1 for the excursion check; default 2*x0 + 1
  State truncation = -1;      // N for graph searches; default max of grid
};

namespace detail {

// A positive sequence is treated as bounded on the grid when its log-log slope
// over the upper half of the grid does not exceed `max_slope`.
inline double upper_half_slope(std::span<const State> grid, std::span<const double> q) {
  std::vector<double> lx;
  std::vector<double> lq;
  for (std::size_t i = grid.size() / 2; i < grid.size(); ++i) {
    if (q[i] > 0.0 && grid[i] > 0) {
      lx.push_back(std::log(static_cast<double>(grid[i])));
      lq.push_back(std::log(q[i]));
    }
  }
  if (lx.size() < 2) {
    return 0.0;
  }
  return stats::fit_line(lx, lq).slope;
}

inline std::size_t argmax(std::span<const double> v) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[k]) {
      k = i;
    }
  }
  return k;
}

} // namespace detail

/*
 * Numerical evaluation of the standing assumptions on a grid. Failures are
 * reported as diagnostics; nothing throws.
 */
inline AssumptionDiagnostics validate_assumptions(const ChainSpec &spec, std::span<const State> grid,
                                                  AssumptionOptions opt = {}) {
  AssumptionDiagnostics diag;
  if (grid.empty()) {
    return diag;
  }
  const DriftProfile &pf = spec.profile;
  const MomentTable mt = moments(spec, grid);
  const RateFunctions rates = RateFunctions::from(spec);
  const std::size_t n = grid.size();

  {
    AssumptionCheck c;
    c.name = "moments";
    const double x = static_cast<double>(grid.back());
    const double e1 = std::abs(x * mt.m1.back() + pf.mu);
    const double e2 = std::abs(mt.m2.back() - pf.b);
    c.value = std::max(e1 / std::max(1.0, std::abs(pf.mu)), e2 / pf.b);
    c.status = (c.value <= 0.05 && pf.in_tail_regime()) ? CheckStatus::pass : CheckStatus::fail;
    c.witness = grid.back();
    std::ostringstream d;
    d << "|x m1 + mu| = " << e1 << ", |m2 - b| = " << e2 << " at x = " << grid.back()
      << (pf.in_tail_regime() ? "" : "; declared profile violates 2mu > b");
    c.detail = d.str();
    diag.checks.push_back(c);
  }
  {
    AssumptionCheck c;
    c.name = "rate_fit";
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(grid[i]);
      q[i] = x > 0.0 ? std::abs(2.0 * mt.m1[i] / mt.m2[i] + rates.r(x)) * std::pow(x, 2.0 + pf.delta)
                     : 0.0;
    }
    const double slope = detail::upper_half_slope(grid, q);
    const std::size_t k = detail::argmax(q);
    c.value = q[k];
    c.witness = grid[k];
    c.status = slope <= 0.1 ? CheckStatus::pass : CheckStatus::fail;
    std::ostringstream d;
    d << "sup x^{2+delta}|2m1/m2 + r| = " << q[k] << ", upper-half growth slope " << slope;
    c.detail = d.str();
    diag.checks.push_back(c);
  }
  {
    AssumptionCheck c;
    c.name = "bounded_moment";
    const double slope = detail::upper_half_slope(grid, mt.abs3pd);
    const std::size_t k = detail::argmax(mt.abs3pd);
    c.value = mt.abs3pd[k];
    c.witness = grid[k];
    c.status = slope <= 0.1 ? CheckStatus::pass : CheckStatus::fail;
    std::ostringstream d;
    d << "sup E|xi|^{3+delta} = " << c.value << ", upper-half growth slope " << slope;
    c.detail = d.str();
    diag.checks.push_back(c);
  }
  {
    AssumptionCheck c;
    c.name = "truncated_moment";
    const double slope = detail::upper_half_slope(grid, mt.truncated);
    const double allowed = 2.0 * std::abs(pf.mu) / pf.b + 0.1;
    const std::size_t k = detail::argmax(mt.truncated);
    c.value = mt.truncated[k];
    c.witness = grid[k];
    c.status = slope <= allowed ? CheckStatus::pass : CheckStatus::fail;
    std::ostringstream d;
    d << "truncated moment growth slope " << slope << " (allowed " << allowed << ")";
    c.detail = d.str();
    diag.checks.push_back(c);
  }
  {
    // Large downward jumps against p(x) = 1/(1+x); gamma from the drift-ratio margin.
    AssumptionCheck c;
    c.name = "big_jumps";
    double inf_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = n / 2; i < n; ++i) {
      const double x = static_cast<double>(grid[i]);
      inf_ratio = std::min(inf_ratio, 2.0 * x * mt.m1[i] / mt.m2[i]);
    }
    const double gamma = inf_ratio > 1.0 ? big_jump_gamma(inf_ratio - 1.0) : 0.25;
    const std::vector<State> tail(grid.begin() + static_cast<std::ptrdiff_t>(n / 2), grid.end());
    const BigJumpCheck r3 = check_big_jumps(spec, tail, gamma, [](double x) { return 1.0 / (1.0 + x); });
    c.status = r3.holds ? CheckStatus::pass : CheckStatus::fail;
    c.value = r3.last_ratio;
    c.witness = grid.back();
    std::ostringstream d;
    d << "P{xi <= -gamma x} / (m2 p(x)/x) with gamma=" << gamma
      << (r3.vacuous ? ": vacuous" : ", log-log slope " + std::to_string(r3.ratio_slope));
    c.detail = d.str();
    diag.checks.push_back(c);
  }

  const State N = opt.truncation > 0 ? opt.truncation : grid.back();
  const State x0 = spec.boundary_x0;
  {
    AssumptionCheck c;
    c.name = "irreducible";
    const auto bad = states_not_reaching_boundary(spec, N);
    c.status = bad.empty() ? CheckStatus::pass : CheckStatus::fail;
    c.witness = bad.empty() ? -1 : bad.front();
    c.value = static_cast<double>(bad.size());
    c.detail = bad.empty() ? "B reachable from every state of [0,N]"
                           : std::to_string(bad.size()) + " states cannot reach B";
    diag.checks.push_back(c);
  }
  {
    // For each x in (x0, x1]: shortest killed path to (x1, N], then the exact
    // probability P_x{X_n > x1, tau_B > n} at that n.
    AssumptionCheck c;
    c.name = "excursions";
    const State x1 = opt.excursion_level > x0 ? opt.excursion_level : 2 * x0 + 1;
    const State horizon = N * N;
    double eps_min = 1.0;
    State worst = -1;
    bool fail = false;
    bool inconclusive = false;
    for (State x = x0 + 1; x <= std::min(x1, N); ++x) {
      std::vector<int> dist(static_cast<std::size_t>(N) + 1, -1);
      std::deque<State> queue{x};
      dist[static_cast<std::size_t>(x)] = 0;
      int found = -1;
      while (!queue.empty() && found < 0) {
        const State z = queue.front();
        queue.pop_front();
        for (State y : truncated_successors(spec, z, N)) {
          if (y <= x0 || dist[static_cast<std::size_t>(y)] >= 0) {
            continue;
          }
          dist[static_cast<std::size_t>(y)] = dist[static_cast<std::size_t>(z)] + 1;
          if (y > x1) {
            found = dist[static_cast<std::size_t>(y)];
            break;
          }
          queue.push_back(y);
        }
      }
      if (found < 0) {
        fail = true;
        worst = x;
        eps_min = 0.0;
        break;
      }
      if (found > horizon) {
        inconclusive = true;
        worst = x;
        continue;
      }
      // Killed propagation for `found` steps.
      std::vector<double> mass(static_cast<std::size_t>(N) + 1, 0.0);
      mass[static_cast<std::size_t>(x)] = 1.0;
      for (int step = 0; step < found; ++step) {
        std::vector<double> next(mass.size(), 0.0);
        for (State z = x0 + 1; z <= N; ++z) {
          const double m = mass[static_cast<std::size_t>(z)];
          if (m == 0.0) {
            continue;
          }
          const JumpLaw law = spec.law(z);
          for (std::size_t i = 0; i < law.size(); ++i) {
            const State y = std::clamp<State>(z + law.offsets[i], 0, N);
            if (y > x0) {
              next[static_cast<std::size_t>(y)] += m * law.probs[i];
            }
          }
        }
        mass.swap(next);
      }
      double above = 0.0;
      for (State z = x1 + 1; z <= N; ++z) {
        above += mass[static_cast<std::size_t>(z)];
      }
      if (above < eps_min) {
        eps_min = above;
        worst = x;
      }
    }
    c.value = eps_min;
    c.witness = worst;
    c.status = fail ? CheckStatus::fail
                    : (inconclusive ? CheckStatus::inconclusive
                                    : (eps_min > 0.0 ? CheckStatus::pass : CheckStatus::fail));
    std::ostringstream d;
    d << "min over x in (" << x0 << "," << x1 << "] of P_x{X_n > x1, tau_B > n} = " << eps_min;
    c.detail = d.str();
    diag.checks.push_back(c);
  }
  return diag;
}

} // namespace lamperti

#endif /* LAMPERTI_ASSUMPTIONS_HPP_ */
