#ifndef LAMPERTI_LYAPUNOV_HPP_
#define LAMPERTI_LYAPUNOV_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "lamperti/chain_model.hpp"
#include "lamperti/rates.hpp"
#include "lamperti/stats.hpp"
#include "lamperti/types.hpp"

namespace lamperti {

/// Mean drift E V(x + xi(x)) - V(x) as an exact finite sum.
template <typename TestFn>
double drift(const ChainSpec &spec, TestFn &&V, State x) {
  const JumpLaw law = spec.law(x);
  const double vx = V(x);
  double s = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    s += law.probs[i] * (V(x + law.offsets[i]) - vx);
  }
  return s;
}

/// 2x m1(x) + m2(x), the drift of x^2.
inline double lamperti_drift(const JumpLaw &law, State x) {
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    m1 += law.probs[i] * law.offsets[i];
    m2 += law.probs[i] * law.offsets[i] * law.offsets[i];
  }
  return 2.0 * static_cast<double>(x) * m1 + m2;
}

/// P{xi(x) <= -gamma x}.
inline double big_down_jump_prob(const JumpLaw &law, State x, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    if (law.offsets[i] <= -gamma * static_cast<double>(x)) {
      s += law.probs[i];
    }
  }
  return s;
}

enum class Classification { positive_recurrent, transient, inconclusive };

inline const char *to_string(Classification c) {
  switch (c) {
  case Classification::positive_recurrent:
    return "positive_recurrent";
  case Classification::transient:
    return "transient";
  default:
    return "inconclusive";
  }
}

// Outcome of the large-negative-jump condition P{xi <= -gamma x} = o(m2 p(x)/x).
struct BigJumpCheck {
  bool holds = false;
  bool vacuous = false;  // left side identically zero on the checked range
  double ratio_slope = 0.0; // log-log slope of the ratio left/right
  double last_ratio = 0.0;
};

/*
 * Checks P{xi(x) <= -gamma x} = o(m2(x) p(x) / x) on the grid: the ratio must
 * vanish or decay (log-log slope <= -0.1).
 */
template <typename Majorant>
BigJumpCheck check_big_jumps(const ChainSpec &spec, std::span<const State> grid, double gamma,
                     Majorant &&p) {
  BigJumpCheck out;
  std::vector<double> lx;
  std::vector<double> lr;
  bool any = false;
  for (State x : grid) {
    if (x <= 0) {
      continue;
    }
    const JumpLaw law = spec.law(x);
    const double left = big_down_jump_prob(law, x, gamma);
    double m2 = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      m2 += law.probs[i] * law.offsets[i] * law.offsets[i];
    }
    const double right = m2 * p(static_cast<double>(x)) / static_cast<double>(x);
    if (left > 0.0) {
      any = true;
      lx.push_back(std::log(static_cast<double>(x)));
      lr.push_back(std::log(left / right));
      out.last_ratio = left / right;
    }
  }
  if (!any) {
    out.holds = true;
    out.vacuous = true;
    return out;
  }
  if (lx.size() < 2) {
    out.holds = false;
    return out;
  }
  out.ratio_slope = stats::fit_line(lx, lr).slope;
  out.holds = out.ratio_slope <= -0.1;
  return out;
}

struct DriftReport {
  std::vector<State> grid;
  std::vector<double> drift;      // 2x m1 + m2
  std::vector<double> normalized; // drift * x^2 / e^{R(x)}
  Classification classification = Classification::inconclusive;
  std::string certificate;
  double epsilon = 0.0;
  State threshold = -1;
  double drift_ratio_inf = 0.0; // inf of 2x m1/m2 on the upper half of the grid
  double gamma = 0.0;
  double delta = 0.0; // largest feasible exponent for the return bound, 0 if none
  BigJumpCheck big_jumps;
};

/// gamma = (1 - 1/sqrt(1+eps))/2, the midpoint of the admissible range.
inline double big_jump_gamma(double eps) { return (1.0 - 1.0 / std::sqrt(1.0 + eps)) / 2.0; }

/// Largest delta in {1, 0.5, 0.25} with (1+delta)/(1-gamma)^{2+delta} < 1+eps.
inline double return_exponent(double eps, double gamma) {
  for (double delta : {1.0, 0.5, 0.25}) {
    if ((1.0 + delta) / std::pow(1.0 - gamma, 2.0 + delta) < 1.0 + eps) {
      return delta;
    }
  }
  return 0.0;
}

/*
 * Classification from grid evaluation. Positive recurrence: 2x m1 + m2 <= -eps
 * on the upper half of the grid. Transience: 2x m1/m2 >= 1+eps on the upper
 * half plus the large-jump condition with majorant p(x) = (1+x)^{-1.5}.
 * eps is the infimum over the upper half of the grid.
 */
inline DriftReport classify(const ChainSpec &spec, std::span<const State> grid) {
  if (grid.size() < 4) {
    throw Rejected("classify: grid needs at least four states");
  }
  DriftReport rep;
  rep.grid.assign(grid.begin(), grid.end());
  const RateFunctions rates = RateFunctions::from(spec);
  std::vector<double> ratio;
  for (State x : grid) {
    const JumpLaw law = spec.law(x);
    const double L = lamperti_drift(law, x);
    rep.drift.push_back(L);
    const double xd = static_cast<double>(x);
    rep.normalized.push_back(x > 0 ? L * xd * xd / rates.expR(xd) : 0.0);
    const auto m = law_moments(law, x, spec.profile);
    ratio.push_back(m.m2 > 0.0 ? 2.0 * xd * m.m1 / m.m2 : 0.0);
  }
  const std::size_t half = grid.size() / 2;

  // Smallest grid index from which pred holds through the end of the grid.
  auto threshold_of = [&](auto pred) {
    std::size_t i = grid.size();
    while (i > 0 && pred(i - 1)) {
      --i;
    }
    return i;
  };

  double sup_tail = -std::numeric_limits<double>::infinity();
  for (std::size_t i = half; i < grid.size(); ++i) {
    sup_tail = std::max(sup_tail, rep.drift[i]);
  }
  if (sup_tail < 0.0) {
    rep.classification = Classification::positive_recurrent;
    rep.epsilon = -sup_tail;
    const std::size_t i0 = threshold_of([&](std::size_t i) { return rep.drift[i] <= -rep.epsilon; });
    rep.threshold = grid[std::min(i0, half)];
    std::ostringstream c;
    c << "Lamperti drift: 2x m1 + m2 <= -" << rep.epsilon << " for grid states x >= "
      << rep.threshold;
    rep.certificate = c.str();
    return rep;
  }

  double inf_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = half; i < grid.size(); ++i) {
    inf_ratio = std::min(inf_ratio, ratio[i]);
  }
  rep.drift_ratio_inf = inf_ratio;
  if (inf_ratio > 1.0) {
    const double eps = inf_ratio - 1.0;
    rep.gamma = big_jump_gamma(eps);
    const std::vector<State> tail(grid.begin() + static_cast<std::ptrdiff_t>(half), grid.end());
    rep.big_jumps = check_big_jumps(spec, tail, rep.gamma,
                          [](double x) { return std::pow(1.0 + x, -1.5); });
    rep.epsilon = eps;
    const std::size_t i0 = threshold_of([&](std::size_t i) { return ratio[i] >= 1.0 + eps; });
    rep.threshold = grid[std::min(i0, half)];
    if (rep.big_jumps.holds) {
      rep.classification = Classification::transient;
      rep.delta = return_exponent(eps, rep.gamma);
      std::ostringstream c;
      c << "drift ratio 2x m1/m2 >= 1+" << eps << " for grid states x >= " << rep.threshold
        << "; big jumps controlled by p(x)=(1+x)^-1.5, gamma=" << rep.gamma
        << (rep.big_jumps.vacuous ? " (vacuous: no jumps below -gamma x)" : "");
      rep.certificate = c.str();
    } else {
      rep.classification = Classification::inconclusive;
      std::ostringstream c;
      c << "drift ratio holds with eps=" << eps << " but big jumps are not controlled (ratio slope "
        << rep.big_jumps.ratio_slope << ")";
      rep.certificate = c.str();
    }
    return rep;
  }
  rep.classification = Classification::inconclusive;
  rep.certificate = "neither the Lamperti drift test nor the drift ratio bound holds on the grid";
  return rep;
}

struct RecurrenceWitness {
  bool recurrent = false;
  State threshold = -1;
  std::vector<double> drift; // drift of log(1+x) on the grid
};

/*
 * Drift of the slowly growing test function V(x) = log(1+x). Negative drift on
 * the upper half of the grid witnesses recurrence.
 */
inline RecurrenceWitness log_drift_recurrence(const ChainSpec &spec, std::span<const State> grid) {
  RecurrenceWitness w;
  auto V = [](State z) { return std::log1p(static_cast<double>(z)); };
  for (State x : grid) {
    w.drift.push_back(drift(spec, V, x));
  }
  const std::size_t half = grid.size() / 2;
  std::size_t i = grid.size();
  while (i > 0 && w.drift[i - 1] < 0.0) {
    --i;
  }
  w.recurrent = i <= half && !grid.empty();
  w.threshold = i < grid.size() ? grid[i] : -1;
  return w;
}

struct PassageBounds {
  double mean_bound = std::numeric_limits<double>::quiet_NaN();
  double return_bound = std::numeric_limits<double>::quiet_NaN();
  double tail_rate_hint = std::numeric_limits<double>::quiet_NaN(); // filled by simulation
  double epsilon = 0.0;
  double epsilon0 = 0.0;
  double c_x = 0.0;
  State x0 = 0;
  double delta = 0.0;
};

/*
 * Closed-form passage bounds for a chain classified transient.
 *
 * x > y: E_y T(x) <= (x^2 - y^2 + c(x) + (eps + eps0) H_y(x0)) / eps, with eps
 * the certificate's eps, x0 the smallest state beyond which 2z m1 + m2 >= eps,
 * eps0 = max(0, -min_{z<=x0}(2z m1 + m2)), c(x) = sup_{z<=x}(2z m1 + m2).
 * `occupation_below_x0` supplies H_y(x0) (at least the n=0 term).
 *
 * y > x: P_y{ever <= x} <= (x/y)^delta with delta from the certificate.
 */
inline PassageBounds passage_bounds(const ChainSpec &spec, const DriftReport &cert, State x,
                                    State y, double occupation_below_x0 = 1.0) {
  if (cert.classification != Classification::transient) {
    throw Rejected("passage_bounds: chain is not certified transient");
  }
  PassageBounds pb;
  pb.epsilon = cert.epsilon;
  pb.delta = cert.delta;
  if (y > x) {
    pb.return_bound = std::pow(static_cast<double>(x) / static_cast<double>(y), cert.delta);
    return pb;
  }
  const State top = std::max<State>(x, cert.grid.empty() ? x : cert.grid.back());
  std::vector<double> L(static_cast<std::size_t>(top) + 1);
  for (State z = 0; z <= top; ++z) {
    L[static_cast<std::size_t>(z)] = lamperti_drift(spec.law(z), z);
  }
  State x0 = top;
  while (x0 > 0 && L[static_cast<std::size_t>(x0)] >= cert.epsilon) {
    --x0;
  }
  pb.x0 = x0;
  double min_low = std::numeric_limits<double>::infinity();
  for (State z = 0; z <= x0; ++z) {
    min_low = std::min(min_low, L[static_cast<std::size_t>(z)]);
  }
  pb.epsilon0 = std::max(0.0, -min_low);
  pb.c_x = -std::numeric_limits<double>::infinity();
  for (State z = 0; z <= x; ++z) {
    pb.c_x = std::max(pb.c_x, L[static_cast<std::size_t>(z)]);
  }
  const double xd = static_cast<double>(x);
  const double yd = static_cast<double>(y);
  const double raw = (xd * xd - yd * yd + pb.c_x +
                      (pb.epsilon + pb.epsilon0) * occupation_below_x0) /
                     pb.epsilon;
  pb.mean_bound = std::max(1.0, raw);
  return pb;
}

} // namespace lamperti

#endif /* LAMPERTI_LYAPUNOV_HPP_ */
