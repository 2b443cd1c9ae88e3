#ifndef LAMPERTI_CHAIN_MODEL_HPP_
#define LAMPERTI_CHAIN_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lamperti/types.hpp"

namespace lamperti {

/*
 * Distribution of the one-step increment at a fixed state: a finite list of
 * distinct integer offsets with their probabilities.
 */
struct JumpLaw {
  std::vector<int> offsets;
  std::vector<double> probs;

  std::size_t size() const { return offsets.size(); }

  double prob_of(int offset) const {
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      if (offsets[i] == offset) {
        return probs[i];
      }
    }
    return 0.0;
  }

  void add(int offset, double p) {
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      if (offsets[i] == offset) {
        probs[i] += p;
        return;
      }
    }
    offsets.push_back(offset);
    probs.push_back(p);
  }

  double total() const {
    double s = 0.0;
    for (double p : probs) {
      s += p;
    }
    return s;
  }

  int min_offset() const {
    return offsets.empty() ? 0 : *std::min_element(offsets.begin(), offsets.end());
  }
  int max_offset() const {
    return offsets.empty() ? 0 : *std::max_element(offsets.begin(), offsets.end());
  }

  // Throws Rejected unless probabilities lie in [0,1], sum to one within
  // 1e-12 and offsets are distinct.
  void validate(State at = -1) const {
    if (offsets.size() != probs.size() || offsets.empty()) {
      throw Rejected("jump law: offsets and probs must be nonempty and of equal length", at);
    }
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) {
        throw Rejected("jump law: probability outside [0,1]", at);
      }
      for (std::size_t j = i + 1; j < offsets.size(); ++j) {
        if (offsets[i] == offsets[j]) {
          throw Rejected("jump law: repeated offset", at);
        }
      }
    }
    if (std::abs(total() - 1.0) > 1e-12) {
      throw Rejected("jump law: probabilities do not sum to 1", at);
    }
  }
};

enum class M3Kind { converges, oscillates, undeclared };

struct M3Mode {
  M3Kind kind = M3Kind::undeclared;
  double m3 = 0.0; // limit, meaningful only when kind == converges

  static M3Mode converges(double limit) { return {M3Kind::converges, limit}; }
  static M3Mode oscillates() { return {M3Kind::oscillates, 0.0}; }
  static M3Mode undeclared() { return {M3Kind::undeclared, 0.0}; }
};

/*
 * Declared asymptotic profile: m1(x) ~ -mu/x, m2(x) -> b. Transient families
 * carry a negative mu (their drift is +|mu|/x).
 */
struct DriftProfile {
  double mu = 0.0;
  double b = 1.0;
  M3Mode m3_mode;
  double delta = 1.0;
  double A = 1.0;

  // 2mu > b, b > 0, delta > 0, A > 0.
  bool in_tail_regime() const {
    return b > 0.0 && 2.0 * mu > b && delta > 0.0 && A > 0.0;
  }
  double rho() const { return 2.0 * mu / b + 1.0; }
};

/*
 * Full description of a lattice chain. The law is a pure function of the
 * state; a ChainSpec is immutable once built and may be shared freely.
 */
struct ChainSpec {
  std::function<JumpLaw(State)> law;
  DriftProfile profile;
  State boundary_x0 = 0;
  std::string family_tag;
  int max_up_jump = 1;
  // nullopt: downward jumps are unbounded (e.g. a jump to the origin).
  std::optional<int> max_down_jump = 1;
  std::string notes;

  JumpLaw operator()(State x) const { return law(x); }

  bool bounded_jumps() const { return max_down_jump.has_value(); }

  bool skip_free() const {
    return max_up_jump <= 1 && max_down_jump.has_value() && *max_down_jump <= 1;
  }
};

/// Upward/downward probabilities for the nearest-neighbour families.
struct NeighbourProbs {
  double up;
  double down;
  double stay;
};

namespace detail {

inline JumpLaw neighbour_law(const NeighbourProbs &p) {
  JumpLaw law;
  if (p.down > 0.0) {
    law.add(-1, p.down);
  }
  if (p.stay > 0.0) {
    law.add(0, p.stay);
  }
  if (p.up > 0.0) {
    law.add(1, p.up);
  }
  return law;
}

inline State clip_point(double mu, double b) {
  return static_cast<State>(std::ceil(2.0 * mu / b));
}

} // namespace detail

/*
 * Birth-death family with p+(x) = (b - mu/max(x,xc))/2, p-(x) = (b + mu/max(x,xc))/2
 * and stay probability 1-b for x >= 1; xc = ceil(2mu/b). At the origin the
 * chain moves up with probability b/2. Exactly m1(x) = -mu/x, m2(x) = b for
 * x >= xc, so B = [0, xc].
 */
inline ChainSpec make_birth_death(double mu, double b) {
  if (!(b > 0.0 && b <= 1.0)) {
    throw Rejected("make_birth_death: b must lie in (0,1]");
  }
  if (!(mu > 0.0)) {
    throw Rejected("make_birth_death: mu must be positive");
  }
  const State xc = detail::clip_point(mu, b);
  ChainSpec spec;
  spec.law = [mu, b, xc](State x) {
    if (x <= 0) {
      return detail::neighbour_law({b / 2.0, 0.0, 1.0 - b / 2.0});
    }
    const double d = mu / static_cast<double>(std::max(x, xc));
    return detail::neighbour_law({(b - d) / 2.0, (b + d) / 2.0, 1.0 - b});
  };
  spec.profile = {mu, b, M3Mode::converges(0.0), 1.0, 1.0};
  spec.boundary_x0 = xc;
  spec.family_tag = "birth_death";
  spec.max_up_jump = 1;
  spec.max_down_jump = 1;
  return spec;
}

/// Mirror of make_birth_death with drift +mu/x: a transient Lamperti chain.
inline ChainSpec make_birth_death_transient(double mu, double b) {
  if (!(b > 0.0 && b <= 1.0)) {
    throw Rejected("make_birth_death_transient: b must lie in (0,1]");
  }
  if (!(mu > 0.0)) {
    throw Rejected("make_birth_death_transient: mu must be positive");
  }
  const State xc = detail::clip_point(mu, b);
  ChainSpec spec;
  spec.law = [mu, b, xc](State x) {
    if (x <= 0) {
      return detail::neighbour_law({b / 2.0, 0.0, 1.0 - b / 2.0});
    }
    const double d = mu / static_cast<double>(std::max(x, xc));
    return detail::neighbour_law({(b + d) / 2.0, (b - d) / 2.0, 1.0 - b});
  };
  spec.profile = {-mu, b, M3Mode::converges(0.0), 1.0, 1.0};
  spec.boundary_x0 = xc;
  spec.family_tag = "birth_death_transient";
  return spec;
}

/// Weights on offsets {-1, +1, +2} matching m1 = -mu/x, m2 = b, m3 = target.
struct SkipFreeWeights {
  double down;
  double up1;
  double up2;

  double stay() const { return 1.0 - down - up1 - up2; }
  bool feasible() const {
    constexpr double slack = -1e-15;
    return down >= slack && up1 >= slack && up2 >= slack && stay() >= slack;
  }
};

/*
 * Closed-form solution of
 *   -q- + q1 + 2 q2 = -mu/x,   q- + q1 + 4 q2 = b,   -q- + q1 + 8 q2 = m3.
 */
inline SkipFreeWeights left_skip_free_weights(double mu, double b, double m3, double x) {
  const double drift = mu / x;
  const double up2 = (m3 + drift) / 6.0;
  const double up1 = (b - m3 - 2.0 * drift) / 2.0;
  const double down = (b + drift - 2.0 * up2) / 2.0;
  return {down, up1, up2};
}

/*
 * Left-skip-free family (jumps >= -1) whose third moment alternates between
 * m3_low (even states) and m3_high (odd states) while m1 = -mu/x and m2 = b
 * hold exactly above the clip point. Below the clip point the law of the clip
 * point is reused (keeping the parity of the target), and the origin moves up
 * with probability b/2.
 */
inline ChainSpec make_left_skip_free(double mu, double b, double m3_low, double m3_high) {
  if (!(b > 0.0 && b <= 1.0)) {
    throw Rejected("make_left_skip_free: b must lie in (0,1]");
  }
  if (!(mu > 0.0)) {
    throw Rejected("make_left_skip_free: mu must be positive");
  }
  const double targets[2] = {m3_low, m3_high};
  // Asymptotic feasibility needs 0 <= m3 < b; otherwise report the first state
  // of the offending parity whose weights are infeasible.
  for (int parity = 0; parity < 2; ++parity) {
    const double m3 = targets[parity];
    if (m3 >= 0.0 && m3 < b) {
      continue;
    }
    State x = parity == 0 ? 2 : 1;
    const State limit = 10'000'000;
    for (; x < limit; x += 2) {
      if (!left_skip_free_weights(mu, b, m3, static_cast<double>(x)).feasible()) {
        break;
      }
    }
    std::ostringstream msg;
    msg << "make_left_skip_free: moment targets infeasible (m3=" << m3
        << ", b=" << b << "); first infeasible state " << x;
    throw Rejected(msg.str(), x);
  }
  State clip = 1;
  for (double m3 : targets) {
    clip = std::max(clip, static_cast<State>(std::ceil(2.0 * mu / (b - m3))));
  }
  while (!(left_skip_free_weights(mu, b, m3_low, static_cast<double>(clip)).feasible() &&
           left_skip_free_weights(mu, b, m3_high, static_cast<double>(clip)).feasible())) {
    ++clip;
  }
  ChainSpec spec;
  spec.law = [mu, b, m3_low, m3_high, clip](State x) {
    if (x <= 0) {
      return detail::neighbour_law({b / 2.0, 0.0, 1.0 - b / 2.0});
    }
    const double m3 = (x % 2 == 0) ? m3_low : m3_high;
    const auto w = left_skip_free_weights(mu, b, m3, static_cast<double>(std::max(x, clip)));
    JumpLaw law;
    law.add(-1, std::max(0.0, w.down));
    law.add(1, std::max(0.0, w.up1));
    law.add(2, std::max(0.0, w.up2));
    law.add(0, std::max(0.0, w.stay()));
    return law;
  };
  const M3Mode mode = (m3_low == m3_high) ? M3Mode::converges(m3_low) : M3Mode::oscillates();
  spec.profile = {mu, b, mode, 1.0, 1.0};
  spec.boundary_x0 = clip;
  spec.family_tag = "left_skip_free";
  spec.max_up_jump = 2;
  spec.max_down_jump = 1;
  return spec;
}

enum class OriginFChoice { m2_over_x };
enum class OriginPChoice { one_over_1px };

/*
 * Adds a jump to the origin with probability f(x)p(x) = (m2(x)/x)/(1+x)
 * (m2 of the base law), scaling the remaining mass by 1 - f(x)p(x). The base
 * must be transient in the drift-ratio sense.
 */
inline ChainSpec make_origin_jump_chain(const ChainSpec &base,
                                        OriginFChoice = OriginFChoice::m2_over_x,
                                        OriginPChoice = OriginPChoice::one_over_1px) {
  // Drift ratio of the base far out.
  {
    const double x = 1e5;
    const JumpLaw law = base.law(static_cast<State>(x));
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      m1 += law.probs[i] * law.offsets[i];
      m2 += law.probs[i] * law.offsets[i] * law.offsets[i];
    }
    if (!(m2 > 0.0 && 2.0 * x * m1 / m2 > 1.0)) {
      throw Rejected("make_origin_jump_chain: base must satisfy 2x m1/m2 >= 1+eps ultimately");
    }
  }
  // Record where f(x)p(x) would exceed one.
  State clip_hi = 0;
  for (State x = 1; x <= 64; ++x) {
    const JumpLaw law = base.law(x);
    double m2 = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      m2 += law.probs[i] * law.offsets[i] * law.offsets[i];
    }
    if (m2 / (static_cast<double>(x) * (1.0 + static_cast<double>(x))) > 1.0) {
      clip_hi = x;
    }
  }
  auto base_law = base.law;
  ChainSpec spec;
  spec.law = [base_law](State x) {
    JumpLaw law = base_law(x);
    if (x <= 0) {
      return law;
    }
    double m2 = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      m2 += law.probs[i] * law.offsets[i] * law.offsets[i];
    }
    const double xd = static_cast<double>(x);
    const double q = std::min(1.0, (m2 / xd) * (1.0 / (1.0 + xd)));
    for (double &p : law.probs) {
      p *= (1.0 - q);
    }
    law.add(static_cast<int>(-x), q);
    return law;
  };
  const double base_mu = base.profile.mu;
  const double base_b = base.profile.b;
  spec.profile = {base_mu + base_b, 2.0 * base_b, M3Mode::undeclared(),
                  base.profile.delta, base.profile.A};
  spec.boundary_x0 = base.boundary_x0;
  spec.family_tag = "origin_jump(" + base.family_tag + ")";
  spec.max_up_jump = base.max_up_jump;
  spec.max_down_jump = std::nullopt;
  if (clip_hi > 0) {
    spec.notes = "origin jump probability clipped to 1 on [1," + std::to_string(clip_hi) + "]";
  }
  return spec;
}

/// Moments of the jump law on a grid of states.
struct MomentTable {
  std::vector<State> grid;
  std::vector<double> m1;
  std::vector<double> m2;
  std::vector<double> m3;
  std::vector<double> abs3pd;    // E|xi|^{3+delta}
  std::vector<double> truncated; // E{xi^{2mu/b+3+delta}; xi > A x}
};

struct LawMoments {
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double abs3pd = 0.0;
  double truncated = 0.0;
};

inline LawMoments law_moments(const JumpLaw &law, State x, const DriftProfile &profile) {
  LawMoments m;
  const double big_power = 2.0 * std::abs(profile.mu) / profile.b + 3.0 + profile.delta;
  const double cut = profile.A * static_cast<double>(x);
  for (std::size_t i = 0; i < law.size(); ++i) {
    const double o = law.offsets[i];
    const double p = law.probs[i];
    m.m1 += p * o;
    m.m2 += p * o * o;
    m.m3 += p * o * o * o;
    m.abs3pd += p * std::pow(std::abs(o), 3.0 + profile.delta);
    if (o > cut) {
      m.truncated += p * std::pow(o, big_power);
    }
  }
  return m;
}

inline MomentTable moments(const ChainSpec &spec, std::span<const State> grid) {
  if (grid.empty()) {
    throw Rejected("moments: grid must be nonempty");
  }
  MomentTable t;
  t.grid.assign(grid.begin(), grid.end());
  for (State x : grid) {
    const auto m = law_moments(spec.law(x), x, spec.profile);
    t.m1.push_back(m.m1);
    t.m2.push_back(m.m2);
    t.m3.push_back(m.m3);
    t.abs3pd.push_back(m.abs3pd);
    t.truncated.push_back(m.truncated);
  }
  return t;
}

/// Integer grid lo, lo+step, ..., <= hi.
inline std::vector<State> state_range(State lo, State hi, State step = 1) {
  std::vector<State> g;
  for (State x = lo; x <= hi; x += step) {
    g.push_back(x);
  }
  return g;
}

} // namespace lamperti

#endif /* LAMPERTI_CHAIN_MODEL_HPP_ */
