#ifndef LAMPERTI_MC_ENGINE_HPP_
#define LAMPERTI_MC_ENGINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/gamma.hpp>

#include "lamperti/chain_model.hpp"
#include "lamperti/exact_solver.hpp"
#include "lamperti/h_transform.hpp"
#include "lamperti/lyapunov.hpp"
#include "lamperti/parallel.hpp"
#include "lamperti/rng.hpp"
#include "lamperti/stats.hpp"

namespace lamperti {

struct SimConfig {
  std::uint64_t seed = 1;
  std::int64_t n_steps = 1000;
  std::int64_t n_replicas = 1;
  State x_start = -1; // -1: the chain's own default (initial law for hat chains, else 0)
  std::int64_t record_stride = 0; // 0: keep final states only
  unsigned threads = 0;
};

/// Event cap from LAMPERTI_MAX_EVENTS, default 1e10.
inline double max_events() {
  if (const char *env = std::getenv("LAMPERTI_MAX_EVENTS")) {
    char *end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0.0) {
      return v;
    }
  }
  return 1e10;
}

inline void check_budget(double events, const char *what) {
  const double cap = max_events();
  if (events > cap) {
    throw Rejected(std::string(what) + ": " + std::to_string(events) +
                   " events exceed the budget cap " + std::to_string(cap));
  }
}

/*
 * A chain ready for simulation: sampler plus the start rule. Hat chains start
 * from their initial law unless a start state is given.
 */
class SimChain {
public:
  SimChain(const ChainSpec &spec, State cache_limit)
      : spec_(spec), sampler_(spec, cache_limit) {}

  SimChain(const TransformedChain &tc)
      : spec_(tc.as_chain_spec()), sampler_(spec_, tc.extended_max()), init_(tc.init()) {
    cum_.reserve(init_.probs.size());
    double c = 0.0;
    for (double p : init_.probs) {
      c += p;
      cum_.push_back(c);
    }
    if (!cum_.empty()) {
      cum_.back() = 1.0;
    }
  }

  const ChainSpec &spec() const { return spec_; }

  State start(State requested, Engine &g) const {
    if (requested >= 0 || cum_.empty()) {
      return std::max<State>(requested, 0);
    }
    const double u = uniform01(g);
    for (std::size_t i = 0; i < cum_.size(); ++i) {
      if (u < cum_[i]) {
        return init_.states[i];
      }
    }
    return init_.states.back();
  }

  State step(State x, Engine &g) const { return sampler_.step(x, g); }

private:
  ChainSpec spec_;
  JumpSampler sampler_;
  InitialLaw init_;
  std::vector<double> cum_;
};

struct TrajectoryBatch {
  std::vector<State> starts;
  std::vector<State> finals;
  std::vector<std::vector<State>> paths; // every record_stride steps, from time 0
};

inline TrajectoryBatch simulate(const SimChain &chain, const SimConfig &cfg) {
  check_budget(static_cast<double>(cfg.n_steps) * static_cast<double>(cfg.n_replicas), "simulate");
  TrajectoryBatch out;
  const auto n = static_cast<std::size_t>(cfg.n_replicas);
  out.starts.resize(n);
  out.finals.resize(n);
  if (cfg.record_stride > 0) {
    out.paths.resize(n);
  }
  parallel_for(
      cfg.n_replicas,
      [&](std::int64_t r) {
        Engine g = make_stream(cfg.seed, static_cast<std::uint64_t>(r));
        State x = chain.start(cfg.x_start, g);
        out.starts[static_cast<std::size_t>(r)] = x;
        std::vector<State> path;
        if (cfg.record_stride > 0) {
          path.reserve(static_cast<std::size_t>(cfg.n_steps / cfg.record_stride) + 1);
          path.push_back(x);
        }
        for (std::int64_t k = 1; k <= cfg.n_steps; ++k) {
          x = chain.step(x, g);
          if (cfg.record_stride > 0 && k % cfg.record_stride == 0) {
            path.push_back(x);
          }
        }
        out.finals[static_cast<std::size_t>(r)] = x;
        if (cfg.record_stride > 0) {
          out.paths[static_cast<std::size_t>(r)] = std::move(path);
        }
      },
      cfg.threads);
  return out;
}

struct GammaTestResult {
  double ks_stat = 0.0;
  double target_mean = 0.0;
  double target_var = 0.0;
  double mean = 0.0;
  double var = 0.0;
  double mean_err = 0.0; // relative
  double var_err = 0.0;  // relative
  std::vector<double> samples; // X_n^2 / n
};

/*
 * X_n^2/n over replicas against the Gamma law with mean m = 2 mu_eff + b and
 * variance 2bm (shape m/(2b), scale 2b).
 */
inline GammaTestResult gamma_limit_test(const SimChain &chain, const SimConfig &cfg, double mu_eff,
                                        double b) {
  const TrajectoryBatch batch = simulate(chain, SimConfig{cfg.seed, cfg.n_steps, cfg.n_replicas,
                                                          cfg.x_start, 0, cfg.threads});
  GammaTestResult res;
  const double n = static_cast<double>(cfg.n_steps);
  for (State x : batch.finals) {
    const double xd = static_cast<double>(x);
    res.samples.push_back(xd * xd / n);
  }
  res.target_mean = 2.0 * mu_eff + b;
  res.target_var = 2.0 * b * res.target_mean;
  const boost::math::gamma_distribution<double> law(res.target_mean / (2.0 * b), 2.0 * b);
  res.ks_stat = stats::ks_distance(res.samples, [&](double v) { return boost::math::cdf(law, v); });
  res.mean = stats::mean(res.samples);
  res.var = stats::variance(res.samples);
  res.mean_err = std::abs(res.mean - res.target_mean) / res.target_mean;
  res.var_err = std::abs(res.var - res.target_var) / res.target_var;
  return res;
}

struct RenewalEstimate {
  std::vector<State> x_grid;
  std::vector<double> H;
  std::vector<double> stderr_;
  std::int64_t horizon = 0;
  double censored_fraction = 0.0; // replicas still at or below max(x_grid) at the horizon
};

/*
 * H(x) = mean over replicas of #{0 <= n <= horizon : X_n <= x}, horizon =
 * max(n_steps, horizon_factor * max(x_grid)^2).
 */
inline RenewalEstimate renewal_estimate(const SimChain &chain, std::span<const State> x_grid,
                                        double horizon_factor, const SimConfig &cfg) {
  if (x_grid.empty()) {
    throw Rejected("renewal_estimate: empty grid");
  }
  if (horizon_factor < 20.0) {
    throw Rejected("renewal_estimate: horizon_factor must be at least 20");
  }
  const State xmax = *std::max_element(x_grid.begin(), x_grid.end());
  RenewalEstimate est;
  est.x_grid.assign(x_grid.begin(), x_grid.end());
  est.horizon = std::max<std::int64_t>(
      cfg.n_steps, static_cast<std::int64_t>(std::ceil(horizon_factor * static_cast<double>(xmax) *
                                                       static_cast<double>(xmax))));
  check_budget(static_cast<double>(est.horizon) * static_cast<double>(cfg.n_replicas), "renewal_estimate");
  const std::size_t G = x_grid.size();
  std::vector<double> counts(static_cast<std::size_t>(cfg.n_replicas) * G, 0.0);
  std::vector<char> censored(static_cast<std::size_t>(cfg.n_replicas), 0);
  parallel_for(
      cfg.n_replicas,
      [&](std::int64_t r) {
        Engine g = make_stream(cfg.seed, static_cast<std::uint64_t>(r));
        std::vector<std::int64_t> occ(static_cast<std::size_t>(xmax) + 1, 0);
        State x = chain.start(cfg.x_start, g);
        for (std::int64_t k = 0; k <= est.horizon; ++k) {
          if (k > 0) {
            x = chain.step(x, g);
          }
          if (x <= xmax) {
            ++occ[static_cast<std::size_t>(x)];
          }
        }
        censored[static_cast<std::size_t>(r)] = x <= xmax;
        std::int64_t cum = 0;
        std::size_t gi = 0;
        std::vector<std::pair<State, std::size_t>> order;
        for (std::size_t i = 0; i < G; ++i) {
          order.emplace_back(x_grid[i], i);
        }
        std::sort(order.begin(), order.end());
        for (State z = 0; z <= xmax && gi < G; ++z) {
          cum += occ[static_cast<std::size_t>(z)];
          while (gi < G && order[gi].first == z) {
            counts[static_cast<std::size_t>(r) * G + order[gi].second] = static_cast<double>(cum);
            ++gi;
          }
        }
      },
      cfg.threads);
  std::vector<double> col(static_cast<std::size_t>(cfg.n_replicas));
  for (std::size_t i = 0; i < G; ++i) {
    for (std::int64_t r = 0; r < cfg.n_replicas; ++r) {
      col[static_cast<std::size_t>(r)] = counts[static_cast<std::size_t>(r) * G + i];
    }
    est.H.push_back(stats::mean(col));
    est.stderr_.push_back(std::sqrt(stats::variance(col) / static_cast<double>(cfg.n_replicas)));
  }
  std::int64_t c = 0;
  for (char v : censored) {
    c += v;
  }
  est.censored_fraction = static_cast<double>(c) / static_cast<double>(cfg.n_replicas);
  return est;
}

struct UniformRenewalBound {
  std::vector<State> starts;
  std::vector<RenewalEstimate> estimates; // one per start
  double c = 0.0;                         // max over starts and x of H_y(x)/(1+x^2)
};

inline UniformRenewalBound uniform_renewal_bound(const SimChain &chain, std::span<const State> starts,
                                                 std::span<const State> x_grid, double horizon_factor,
                                                 SimConfig cfg) {
  UniformRenewalBound ub;
  for (State y : starts) {
    cfg.x_start = y;
    ub.starts.push_back(y);
    ub.estimates.push_back(renewal_estimate(chain, x_grid, horizon_factor, cfg));
    const auto &e = ub.estimates.back();
    for (std::size_t i = 0; i < e.x_grid.size(); ++i) {
      const double xd = static_cast<double>(e.x_grid[i]);
      ub.c = std::max(ub.c, e.H[i] / (1.0 + xd * xd));
    }
  }
  return ub;
}

struct PassageRecord {
  State x = 0;
  double mean_T = 0.0;
  double stderr_T = 0.0;
  double censored_fraction = 0.0;
  double visits_below_x0 = 0.0; // mean number of n < T with X_n <= x0
  PassageBounds bound;
  bool mean_within_bound = false;
  double t0 = 0.0;         // median of T/x^2
  double tail_slope = 0.0; // slope of log P{T > t x^2} on [t0, 3 t0]
  bool concave = false;
};

/*
 * First passage T(x) = min{n >= 1 : X_n > x} from cfg.x_start (default 0),
 * capped at cfg.n_steps. The closed-form bound uses the certificate's eps and
 * the empirical mean number of visits to [0, x0] before T.
 */
inline std::vector<PassageRecord> passage_time_suite(const SimChain &chain, const DriftReport &cert,
                                                     std::span<const State> x_list, const SimConfig &cfg) {
  check_budget(static_cast<double>(cfg.n_steps) * static_cast<double>(cfg.n_replicas) *
                   static_cast<double>(x_list.size()),
               "passage_time_suite");
  const State y = std::max<State>(cfg.x_start, 0);
  const PassageBounds probe = passage_bounds(chain.spec(), cert, x_list.empty() ? y : x_list.front(), y);
  const State x0 = probe.x0;
  std::vector<PassageRecord> out;
  for (State x : x_list) {
    std::vector<double> T(static_cast<std::size_t>(cfg.n_replicas));
    std::vector<double> visits(static_cast<std::size_t>(cfg.n_replicas));
    std::vector<char> cens(static_cast<std::size_t>(cfg.n_replicas), 0);
    parallel_for(
        cfg.n_replicas,
        [&](std::int64_t r) {
          Engine g = make_stream(cfg.seed ^ (static_cast<std::uint64_t>(x) << 40),
                                 static_cast<std::uint64_t>(r));
          State z = y;
          std::int64_t v = 0;
          std::int64_t n = 0;
          bool crossed = false;
          while (n < cfg.n_steps) {
            if (z <= x0) {
              ++v;
            }
            z = chain.step(z, g);
            ++n;
            if (z > x) {
              crossed = true;
              break;
            }
          }
          T[static_cast<std::size_t>(r)] = static_cast<double>(n);
          visits[static_cast<std::size_t>(r)] = static_cast<double>(v);
          cens[static_cast<std::size_t>(r)] = !crossed;
        },
        cfg.threads);
    PassageRecord rec;
    rec.x = x;
    rec.mean_T = stats::mean(T);
    rec.stderr_T = std::sqrt(stats::variance(T) / static_cast<double>(T.size()));
    std::int64_t c = 0;
    for (char v : cens) {
      c += v;
    }
    rec.censored_fraction = static_cast<double>(c) / static_cast<double>(T.size());
    rec.visits_below_x0 = stats::mean(visits);
    rec.bound = passage_bounds(chain.spec(), cert, x, y, rec.visits_below_x0);
    rec.mean_within_bound = rec.censored_fraction == 0.0 && rec.mean_T <= rec.bound.mean_bound;

    // Tail of T / x^2.
    const double x2 = static_cast<double>(x) * static_cast<double>(x);
    std::vector<double> s(T.size());
    for (std::size_t i = 0; i < T.size(); ++i) {
      s[i] = T[i] / x2;
    }
    std::sort(s.begin(), s.end());
    rec.t0 = stats::median(s);
    rec.bound.tail_rate_hint = rec.t0;
    auto survival = [&](double t) {
      const auto it = std::upper_bound(s.begin(), s.end(), t);
      return static_cast<double>(s.end() - it) / static_cast<double>(s.size());
    };
    std::vector<double> ts;
    std::vector<double> ls;
    const int pts = 21;
    for (int k = 0; k < pts; ++k) {
      const double t = rec.t0 * (1.0 + 2.0 * k / (pts - 1));
      const double sv = survival(t);
      if (sv * static_cast<double>(s.size()) >= 10.0) {
        ts.push_back(t);
        ls.push_back(std::log(sv));
      }
    }
    if (ts.size() >= 4) {
      rec.tail_slope = stats::fit_line(ts, ls).slope;
      const std::size_t h = ts.size() / 2;
      const auto f1 = stats::fit_line(std::span(ts).first(h + 1), std::span(ls).first(h + 1));
      const auto f2 = stats::fit_line(std::span(ts).subspan(h), std::span(ls).subspan(h));
      const double slack = 0.1 * std::abs(f1.slope) + 2.0 * std::hypot(f1.slope_stderr, f2.slope_stderr);
      rec.concave = f2.slope <= f1.slope + slack;
    } else {
      rec.tail_slope = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(rec);
  }
  return out;
}

/// Return probability P_y{reach [0,x] before the escape level} for any chain.
inline ReturnCheck return_check(const SimChain &chain, State y, State x, double delta, ReturnMcParams mc = {}) {
  if (!(y > x && x >= 0)) {
    throw Rejected("return_check: need y > x >= 0");
  }
  check_budget(static_cast<double>(mc.max_steps) * static_cast<double>(mc.replicas), "return_check");
  return detail::return_mc([&](State z, Engine &g) { return chain.step(z, g); }, y, x, delta, mc);
}

struct OccupationEstimate {
  std::vector<double> freq;  // empirical law on [0, cap]; mass above cap in overflow
  double overflow = 0.0;
  std::int64_t cycles = 0;   // completed returns to B
  std::int64_t steps = 0;    // steps inside completed cycles
  double mean_cycle_length = 0.0;
};

/*
 * Regeneration-cycle occupation: the chain starts in B, a cycle ends at each
 * entrance to B from outside, and occupation over completed cycles is
 * normalized by their total length. Fewer than min_cycles cycles rejects the
 * budget.
 */
inline OccupationEstimate stationary_occupation(const SimChain &chain, const SimConfig &cfg, State cap,
                                                std::int64_t min_cycles = 100) {
  check_budget(static_cast<double>(cfg.n_steps) * static_cast<double>(cfg.n_replicas),
               "stationary_occupation");
  const State x0 = chain.spec().boundary_x0;
  struct Acc {
    std::vector<std::int64_t> occ;
    std::int64_t over = 0;
    std::int64_t cycles = 0;
    std::int64_t steps = 0;
  };
  std::vector<Acc> accs(static_cast<std::size_t>(cfg.n_replicas));
  parallel_for(
      cfg.n_replicas,
      [&](std::int64_t r) {
        Acc &a = accs[static_cast<std::size_t>(r)];
        a.occ.assign(static_cast<std::size_t>(cap) + 1, 0);
        std::vector<std::int64_t> pending(static_cast<std::size_t>(cap) + 1, 0);
        std::vector<State> touched;
        std::int64_t pending_over = 0;
        std::int64_t pending_len = 0;
        Engine g = make_stream(cfg.seed, static_cast<std::uint64_t>(r));
        State x = std::min(chain.start(cfg.x_start < 0 ? 0 : cfg.x_start, g), x0);
        for (std::int64_t k = 0; k < cfg.n_steps; ++k) {
          if (x <= cap) {
            if (pending[static_cast<std::size_t>(x)]++ == 0) {
              touched.push_back(x);
            }
          } else {
            ++pending_over;
          }
          ++pending_len;
          const State nx = chain.step(x, g);
          if (nx <= x0 && x > x0) {
            for (State z : touched) {
              a.occ[static_cast<std::size_t>(z)] += pending[static_cast<std::size_t>(z)];
              pending[static_cast<std::size_t>(z)] = 0;
            }
            touched.clear();
            a.over += pending_over;
            a.steps += pending_len;
            pending_over = 0;
            pending_len = 0;
            ++a.cycles;
          }
          x = nx;
        }
      },
      cfg.threads);
  OccupationEstimate est;
  std::vector<std::int64_t> occ(static_cast<std::size_t>(cap) + 1, 0);
  std::int64_t over = 0;
  for (const Acc &a : accs) {
    for (std::size_t i = 0; i < occ.size(); ++i) {
      occ[i] += a.occ[i];
    }
    over += a.over;
    est.cycles += a.cycles;
    est.steps += a.steps;
  }
  if (est.cycles < min_cycles) {
    throw Rejected("stationary_occupation: only " + std::to_string(est.cycles) +
                   " regeneration cycles completed (need " + std::to_string(min_cycles) + ")");
  }
  est.freq.resize(occ.size());
  for (std::size_t i = 0; i < occ.size(); ++i) {
    est.freq[i] = static_cast<double>(occ[i]) / static_cast<double>(est.steps);
  }
  est.overflow = static_cast<double>(over) / static_cast<double>(est.steps);
  est.mean_cycle_length = static_cast<double>(est.steps) / static_cast<double>(est.cycles);
  return est;
}

/// Total variation distance between the empirical and exact laws on [0, hi].
inline double tv_distance(const OccupationEstimate &est, const StationaryTable &stat, State hi) {
  double s = 0.0;
  for (State x = 0; x <= hi; ++x) {
    const double e = static_cast<std::size_t>(x) < est.freq.size() ? est.freq[static_cast<std::size_t>(x)] : 0.0;
    s += std::abs(e - stat.pi(x));
  }
  return 0.5 * s;
}

} // namespace lamperti

#endif /* LAMPERTI_MC_ENGINE_HPP_ */
