#include <cmath>

#include <gtest/gtest.h>

#include "lamperti/chain_model.hpp"
#include "lamperti/exact_solver.hpp"
#include "lamperti/stats.hpp"

using namespace lamperti;

namespace {

double loglog_slope(const std::vector<double> &v, State lo, State hi) {
  std::vector<double> lx;
  std::vector<double> ly;
  for (State x = lo; x <= hi; ++x) {
    lx.push_back(std::log(static_cast<double>(x)));
    ly.push_back(std::log(v[static_cast<std::size_t>(x)]));
  }
  return stats::fit_line(lx, ly).slope;
}

// Closed-form birth-death ratio pi(x)/pi(a) for mu=2, b=1 above the clip
// point: prod_{k=a+1}^x k(k-3)/((k-1)(k+2)), telescoped with lgamma.
double bd21_log_ratio(State a, State x) {
  const double A = static_cast<double>(a);
  const double X = static_cast<double>(x);
  return std::log(X / A) + std::lgamma(X - 2.0) - std::lgamma(A - 2.0) - std::lgamma(X + 3.0) +
         std::lgamma(A + 3.0);
}

} // namespace

TEST(ProductFormula, UniformWhenRatiosAreOne) {
  ChainSpec spec;
  spec.law = [](State x) {
    JumpLaw law;
    law.add(1, 0.3);
    if (x > 0) {
      law.add(-1, 0.3);
    }
    law.add(0, x > 0 ? 0.4 : 0.7);
    return law;
  };
  spec.profile = {1.0, 0.6, M3Mode::undeclared(), 1.0, 1.0};
  const auto t = stationary_skip_free(spec, 99);
  for (double p : t.probs) {
    EXPECT_NEAR(p, 0.01, 1e-14);
  }
  EXPECT_TRUE(std::isinf(t.tail_mass_bound));
}

TEST(ProductFormula, MatchesTelescopedProduct) {
  const auto bd = make_birth_death(2.0, 1.0);
  const auto t = stationary_skip_free(bd, 2000);
  for (State x = 10; x <= 2000; x += 37) {
    EXPECT_NEAR(std::log(t.pi(x) / t.pi(10)), bd21_log_ratio(10, x), 1e-10);
  }
  EXPECT_LE(t.residual, 1e-10);
}

TEST(ProductFormula, LocalAndTailExponents) {
  const auto bd = make_birth_death(2.0, 1.0);
  const auto t = stationary_skip_free(bd, 2000);
  EXPECT_NEAR(loglog_slope(t.probs, 50, 500), -4.0, 0.05);
  EXPECT_NEAR(loglog_slope(t.tail, 50, 500), -3.0, 0.1);
  double sum = 0.0;
  for (double p : t.probs) {
    EXPECT_GE(p, 0.0);
    sum += p;
  }
  EXPECT_NEAR(sum, 1.0, 1e-10);
  for (std::size_t i = 1; i < t.tail.size(); ++i) {
    EXPECT_LE(t.tail[i], t.tail[i - 1]);
  }
  EXPECT_EQ(t.tail.back(), 0.0);
  EXPECT_GT(t.tail_mass_bound, 0.0);
  EXPECT_LT(t.tail_mass_bound, 1e-6);
}

TEST(ProductFormula, SandwichWithFittedConstants) {
  const auto bd = make_birth_death(2.0, 1.0);
  const auto t = stationary_skip_free(bd, 2000);
  double c_lo = INFINITY;
  double c_hi = 0.0;
  for (State x = 50; x <= 500; ++x) {
    const double xd = static_cast<double>(x);
    c_lo = std::min(c_lo, t.pi(x) * std::pow(xd, 4.2));
    c_hi = std::max(c_hi, t.pi(x) * std::pow(xd, 3.8));
  }
  // With exponent -4 exactly, the fitted constants stay within the window's
  // x^{0.2} range of each other.
  EXPECT_LT(c_hi / c_lo, std::pow(500.0 / 50.0, 0.2) * std::pow(500.0, 0.2) * 1.05);
  for (State x = 50; x <= 500; ++x) {
    const double xd = static_cast<double>(x);
    EXPECT_LE(c_lo * std::pow(xd, -4.2), t.pi(x) * (1.0 + 1e-12));
    EXPECT_GE(c_hi * std::pow(xd, -3.8), t.pi(x) * (1.0 - 1e-12));
  }
}

TEST(ProductFormula, RejectsZeroDownProbability) {
  ChainSpec spec = make_birth_death(2.0, 1.0);
  auto base = spec.law;
  spec.law = [base](State x) {
    if (x == 30) {
      JumpLaw law;
      law.add(1, 0.5);
      law.add(0, 0.5);
      return law;
    }
    return base(x);
  };
  try {
    stationary_skip_free(spec, 100);
    FAIL();
  } catch (const Rejected &e) {
    EXPECT_EQ(e.witness(), 30);
  }
  EXPECT_THROW(stationary_skip_free(make_left_skip_free(2.0, 1.0, 0.2, 0.8), 100), Rejected);
}

TEST(GlobalBalance, AgreesWithProductFormula) {
  for (double mu : {1.5, 2.0, 3.0}) {
    const auto bd = make_birth_death(mu, 1.0);
    const auto pf = stationary_skip_free(bd, 2000);
    const auto gb = stationary_global_balance(bd, 2000, 1e-10, false);
    EXPECT_LE(gb.residual, 1e-10);
    for (State x = 0; x <= 1000; ++x) {
      EXPECT_NEAR(gb.pi(x), pf.pi(x), 1e-8) << "mu=" << mu << " x=" << x;
    }
  }
}

TEST(GlobalBalance, LeftSkipFreeTailExponent) {
  const auto lsf = make_left_skip_free(2.0, 1.0, 0.2, 0.8);
  const auto t = stationary_global_balance(lsf, 2000);
  EXPECT_LE(t.residual, 1e-10);
  EXPECT_NEAR(loglog_slope(t.tail, 50, 500), -3.0, 0.15);
}

TEST(GlobalBalance, TruncationDoubling) {
  const auto lsf = make_left_skip_free(2.0, 1.0, 0.2, 0.8);
  const auto small = stationary_global_balance(lsf, 1000, 1e-10, false);
  const auto large = stationary_global_balance(lsf, 2000, 1e-10, false);
  // Point masses on [0,500] are stable to 0.5%.
  double worst = 0.0;
  for (State x = 0; x <= 500; ++x) {
    worst = std::max(worst, std::abs(small.pi(x) - large.pi(x)) / large.pi(x));
  }
  EXPECT_LT(worst, 5e-3);
  // The tail itself is conditioned on the window: the shortfall at x matches
  // the mass the larger window holds above 1000.
  const double beyond = large.tail_at(1000);
  for (State x : {10, 100, 500}) {
    const double shortfall = (large.tail_at(x) - small.tail_at(x)) / large.tail_at(x);
    EXPECT_NEAR(shortfall, beyond / large.tail_at(x) * (1.0 - large.tail_at(x)) / (1.0 - beyond), 0.05 * beyond / large.tail_at(x) + 1e-9);
  }
  const auto with_bound = stationary_global_balance(lsf, 1000);
  EXPECT_NEAR(with_bound.tail_mass_bound, beyond, 1e-12);
  EXPECT_LT(with_bound.doubling_rel_change, 5e-3);
}

TEST(GlobalBalance, ReducibleTruncationRejected) {
  ChainSpec spec = make_birth_death(2.0, 1.0);
  auto base = spec.law;
  spec.law = [base](State x) {
    if (x >= 60) {
      JumpLaw law;
      law.add(1, 1.0);
      return law;
    }
    return base(x);
  };
  try {
    stationary_global_balance(spec, 200);
    FAIL();
  } catch (const Rejected &e) {
    EXPECT_EQ(e.witness(), 60);
  }
}

TEST(Diffusion, DensityShapeAndNormalization) {
  std::vector<double> grid;
  for (double x = 0.0; x <= 2000.0; x += 0.05) {
    grid.push_back(x);
  }
  const auto p = diffusion_density(2.0, 1.0, grid);
  double mass = 0.0;
  for (double v : p) {
    mass += v * 0.05;
  }
  EXPECT_NEAR(mass, 1.0, 1e-6);
  // x^4 p(x) constant for x >= 1; e^{-4x} below.
  const std::size_t i1 = 20;
  for (std::size_t i = i1; i < grid.size(); i += 997) {
    EXPECT_NEAR(p[i] * std::pow(grid[i], 4.0), p[i1], 1e-9 * p[i1]);
  }
  EXPECT_NEAR(p[0] / p[i1], std::exp(4.0), 1e-9 * std::exp(4.0));

  // Tail integral decays like x^{-3}.
  std::vector<double> tail(grid.size(), 0.0);
  for (std::size_t i = grid.size() - 1; i-- > 0;) {
    tail[i] = tail[i + 1] + 0.5 * (p[i] + p[i + 1]) * 0.05;
  }
  std::vector<double> lx;
  std::vector<double> lt;
  for (std::size_t i = 1000; i <= 10000; i += 100) {
    lx.push_back(std::log(grid[i]));
    lt.push_back(std::log(tail[i]));
  }
  EXPECT_NEAR(stats::fit_line(lx, lt).slope, -3.0, 0.01);
}

TEST(Diffusion, RejectsNonIntegrable) {
  const std::vector<double> grid{0.0, 1.0, 2.0};
  EXPECT_THROW(diffusion_density(0.5, 1.0, grid), Rejected);
  EXPECT_THROW(diffusion_density(0.4, 1.0, grid), Rejected);
  EXPECT_NO_THROW(diffusion_density(0.6, 1.0, grid));
}
