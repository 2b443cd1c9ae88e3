#ifndef LAMPERTI_H_TRANSFORM_HPP_
#define LAMPERTI_H_TRANSFORM_HPP_

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "lamperti/chain_model.hpp"
#include "lamperti/exact_solver.hpp"
#include "lamperti/harmonic.hpp"
#include "lamperti/kernel.hpp"
#include "lamperti/parallel.hpp"
#include "lamperti/rates.hpp"
#include "lamperti/rng.hpp"

namespace lamperti {

struct InitialLaw {
  std::vector<State> states;
  std::vector<double> probs;
};

/*
 * Doob transform of the killed chain by V:
 *   P^(x,y) = V(y) P(x,y) 1{y > x0} / V(x)
 * on the support (x0, N] (states with V <= 0 excluded). Above N, where no
 * harmonic values are available, the weight W = U + C e^R replaces V (C = C0
 * when declared, else (V-U)/e^R fitted at N/4) and rows are renormalized.
 */
class TransformedChain {
public:
  TransformedChain(ChainSpec spec, std::shared_ptr<const HarmonicTable> harm, InitialLaw init,
                   double boundary_integral, State extended_max)
      : spec_(std::move(spec)), harm_(std::move(harm)), init_(std::move(init)),
        boundary_integral_(boundary_integral),
        pot_(harm_->rates, extended_max + spec_.max_up_jump) {
    x0_ = std::max(harm_->boundary_x0, harm_->positive_from);
    N_ = harm_->truncation_N;
    extended_max_ = extended_max;
    const State xq = std::max(x0_ + 1, N_ / 4);
    C_tail_ = harm_->C0 ? *harm_->C0 : (harm_->V_at(xq) - harm_->U_at(xq)) / harm_->expR_at(xq);
    hat_mu = std::abs(spec_.profile.mu) + spec_.profile.b;
    hat_b = spec_.profile.b;
    rows_.resize(static_cast<std::size_t>(N_ - x0_));
    for (State x = x0_ + 1; x <= N_; ++x) {
      rows_[static_cast<std::size_t>(x - x0_ - 1)] = harmonic_row(x);
    }
  }

  double hat_mu = 0.0;
  double hat_b = 0.0;

  State support_min() const { return x0_ + 1; }
  State truncation_N() const { return N_; }
  State extended_max() const { return extended_max_; }
  const HarmonicTable &harmonic() const { return *harm_; }
  const ChainSpec &base() const { return spec_; }
  const InitialLaw &init() const { return init_; }
  double boundary_integral() const { return boundary_integral_; }
  double tail_constant() const { return C_tail_; }

  // Hat row at x in (x0, N]: exact; above N: the W-weighted fallback.
  JumpLaw row(State x) const {
    if (x <= x0_ || x > extended_max_) {
      throw Rejected("TransformedChain: state outside the support", x);
    }
    if (x <= N_) {
      return rows_[static_cast<std::size_t>(x - x0_ - 1)];
    }
    return fallback_row(x);
  }

  /// sum_y P^(x,y); one for harmonic V.
  double row_sum(State x) const { return row(x).total(); }

  /*
   * ChainSpec view for simulation. States at or below x0 (never entered after
   * time 0) hold still; states above the extended range throw.
   */
  ChainSpec as_chain_spec() const {
    ChainSpec s;
    auto self = std::make_shared<TransformedChain>(*this);
    s.law = [self](State x) {
      if (x <= self->x0_) {
        JumpLaw still;
        still.add(0, 1.0);
        return still;
      }
      return self->row(x);
    };
    s.profile = {-hat_mu, hat_b, M3Mode::undeclared(), spec_.profile.delta, spec_.profile.A};
    s.boundary_x0 = x0_;
    s.family_tag = "hat(" + spec_.family_tag + ")";
    s.max_up_jump = spec_.max_up_jump;
    s.max_down_jump = spec_.max_down_jump;
    return s;
  }

  /// Kernel on (x0, N] (index x - x0 - 1), dropping transitions above N.
  SparseRowMatrix kernel_matrix() const {
    const int n = static_cast<int>(N_ - x0_);
    std::vector<Eigen::Triplet<double>> trip;
    for (State x = x0_ + 1; x <= N_; ++x) {
      const JumpLaw &r = rows_[static_cast<std::size_t>(x - x0_ - 1)];
      for (std::size_t i = 0; i < r.size(); ++i) {
        const State y = x + r.offsets[i];
        if (y <= N_) {
          trip.emplace_back(static_cast<int>(x - x0_ - 1), static_cast<int>(y - x0_ - 1), r.probs[i]);
        }
      }
    }
    SparseRowMatrix K(n, n);
    K.setFromTriplets(trip.begin(), trip.end());
    K.makeCompressed();
    return K;
  }

private:
  JumpLaw harmonic_row(State x) const {
    const JumpLaw law = spec_.law(x);
    const double vx = harm_->V_at(x);
    JumpLaw out;
    for (std::size_t i = 0; i < law.size(); ++i) {
      const State y = x + law.offsets[i];
      if (y <= x0_ || law.probs[i] == 0.0) {
        continue;
      }
      out.add(law.offsets[i], harm_->V_at(y) * law.probs[i] / vx);
    }
    return out;
  }

  JumpLaw fallback_row(State x) const {
    const JumpLaw law = spec_.law(x);
    const RateFunctions &rf = harm_->rates;
    const double wx = pot_.U(x) + C_tail_ * pot_.expR(x);
    JumpLaw out;
    double z = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      const State y = x + law.offsets[i];
      if (y <= x0_ || law.probs[i] == 0.0) {
        continue;
      }
      const double dW = pot_.U_diff(x, y) + C_tail_ * detail::expR_increment(rf, x, y);
      const double w = law.probs[i] * (1.0 + dW / wx);
      out.add(law.offsets[i], w);
      z += w;
    }
    for (double &p : out.probs) {
      p /= z;
    }
    return out;
  }

  ChainSpec spec_;
  std::shared_ptr<const HarmonicTable> harm_;
  InitialLaw init_;
  double boundary_integral_ = 0.0;
  PotentialTable pot_;
  std::vector<JumpLaw> rows_;
  State x0_ = 0;
  State N_ = 0;
  State extended_max_ = 0;
  double C_tail_ = 0.0;
};

struct TransformOptions {
  double row_tol = 1e-9;
  State extended_factor = 8; // fallback rows available up to extended_factor * N
};

/*
 * Builds the hat chain. The initial law is the one-step exit law from B under
 * pi weighted by V:
 *   init(y) proportional to sum_{z in B} pi(z) P(z,y) V(y),  y > x0,
 * and boundary_integral is its normalizer.
 */
inline TransformedChain transform(const ChainSpec &spec, const HarmonicTable &harm,
                                  const StationaryTable &stat, TransformOptions opt = {}) {
  const State x0 = harm.boundary_x0;
  const State N = harm.truncation_N;
  for (State x = x0 + 1; x <= N; ++x) {
    if (!(harm.V_at(x) > 0.0)) {
      throw Rejected("transform: V must be positive on (x0, N]", x);
    }
  }
  if (stat.truncation_N < x0) {
    throw Rejected("transform: stationary table does not cover B");
  }
  InitialLaw init;
  double I = 0.0;
  for (State z = 0; z <= x0; ++z) {
    const JumpLaw law = spec.law(z);
    for (std::size_t i = 0; i < law.size(); ++i) {
      const State y = z + law.offsets[i];
      if (y <= x0 || law.probs[i] == 0.0) {
        continue;
      }
      const double w = stat.pi(z) * law.probs[i] * harm.V_at(y);
      auto it = std::find(init.states.begin(), init.states.end(), y);
      if (it == init.states.end()) {
        init.states.push_back(y);
        init.probs.push_back(w);
      } else {
        init.probs[static_cast<std::size_t>(it - init.states.begin())] += w;
      }
      I += w;
    }
  }
  if (!(I > 0.0)) {
    throw Rejected("transform: B has no exit under pi");
  }
  for (double &p : init.probs) {
    p /= I;
  }
  auto shared = std::make_shared<const HarmonicTable>(harm);
  TransformedChain tc(spec, shared, std::move(init), I, opt.extended_factor * N);
  for (State x = tc.support_min(); x <= N; ++x) {
    const JumpLaw r = tc.row(x);
    if (std::abs(r.total() - 1.0) > opt.row_tol) {
      throw Rejected("transform: hat row does not sum to one (V not harmonic)", x);
    }
    for (double p : r.probs) {
      if (p < 0.0) {
        throw Rejected("transform: negative hat transition", x);
      }
    }
  }
  return tc;
}

/// Exact moments of the hat jump law on a grid inside (x0, N-J].
inline MomentTable transformed_moments(const TransformedChain &tc, std::span<const State> grid) {
  if (grid.empty()) {
    throw Rejected("transformed_moments: grid must be nonempty");
  }
  MomentTable t;
  const DriftProfile pf{-tc.hat_mu, tc.hat_b, M3Mode::undeclared(), 1.0, 1.0};
  for (State x : grid) {
    if (x < tc.support_min() || x > tc.truncation_N() - tc.base().max_up_jump) {
      throw Rejected("transformed_moments: grid state outside (x0, N-J]", x);
    }
    const auto m = law_moments(tc.row(x), x, pf);
    t.grid.push_back(x);
    t.m1.push_back(m.m1);
    t.m2.push_back(m.m2);
    t.m3.push_back(m.m3);
    t.abs3pd.push_back(m.abs3pd);
    t.truncated.push_back(m.truncated);
  }
  return t;
}

struct ReturnMcParams {
  std::uint64_t seed = 1;
  std::int64_t replicas = 10000;
  State escape_level = -1; // default 2y
  std::int64_t max_steps = 1'000'000;
  unsigned threads = 0;
};

struct ReturnCheck {
  double probability = 0.0; // fraction reaching [0,x] before the escape level
  double stderr_ = 0.0;
  double bound = 0.0;       // (x/y)^delta
  std::int64_t returned = 0;
  std::int64_t escaped = 0;
  std::int64_t censored = 0;
  bool within_bound = false; // probability <= bound + 3 stderr
};

namespace detail {

// Fraction of replicas started at y that reach [0,x] before the escape level.
template <class Step>
ReturnCheck return_mc(Step step, State y, State x, double delta, const ReturnMcParams &mc) {
  const State escape = mc.escape_level > y ? mc.escape_level : 2 * y;
  std::vector<int> outcome(static_cast<std::size_t>(mc.replicas), 0);
  parallel_for(
      mc.replicas,
      [&](std::int64_t r) {
        Engine g = make_stream(mc.seed, static_cast<std::uint64_t>(r));
        State z = y;
        for (std::int64_t n = 0; n < mc.max_steps; ++n) {
          z = step(z, g);
          if (z <= x) {
            outcome[static_cast<std::size_t>(r)] = 1;
            return;
          }
          if (z >= escape) {
            outcome[static_cast<std::size_t>(r)] = 2;
            return;
          }
        }
      },
      mc.threads);
  ReturnCheck rc;
  for (int o : outcome) {
    rc.returned += o == 1;
    rc.escaped += o == 2;
    rc.censored += o == 0;
  }
  const double n = static_cast<double>(mc.replicas);
  rc.probability = static_cast<double>(rc.returned) / n;
  rc.stderr_ = std::sqrt(std::max(rc.probability * (1.0 - rc.probability), 1.0 / n) / n);
  rc.bound = std::pow(static_cast<double>(x) / static_cast<double>(y), delta);
  rc.within_bound = rc.probability <= rc.bound + 3.0 * rc.stderr_;
  return rc;
}

} // namespace detail

/*
 * Monte Carlo probability that the hat chain started at y falls to [0,x]
 * before reaching the escape level (default 2y).
 */
inline ReturnCheck transformed_return_check(const TransformedChain &tc, State y, State x,
                                            double delta, ReturnMcParams mc = {}) {
  if (!(y > x && x >= tc.support_min() - 1)) {
    throw Rejected("transformed_return_check: need y > x > x0");
  }
  const State escape = mc.escape_level > y ? mc.escape_level : 2 * y;
  const ChainSpec hat = tc.as_chain_spec();
  const JumpSampler sampler(hat, std::min(tc.extended_max(), escape + hat.max_up_jump));
  return detail::return_mc([&](State z, Engine &g) { return sampler.step(z, g); }, y, x, delta, mc);
}

} // namespace lamperti

#endif /* LAMPERTI_H_TRANSFORM_HPP_ */
