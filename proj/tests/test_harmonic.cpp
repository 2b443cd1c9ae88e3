#include <cmath>

#include <gtest/gtest.h>

#include "lamperti/chain_model.hpp"
#include "lamperti/harmonic.hpp"

using namespace lamperti;

namespace {

const HarmonicTable &bd21_table() {
  static const HarmonicTable t = harmonic_solve(make_birth_death(2.0, 1.0), 2000);
  return t;
}

// V(x) - sum_{y > x0} P(x,y) V(y), recomputed from the table.
double direct_residual(const ChainSpec &spec, const HarmonicTable &t, State x) {
  const JumpLaw law = spec.law(x);
  double s = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    const State y = x + law.offsets[i];
    if (y > t.boundary_x0) {
      s += law.probs[i] * t.V_at(y);
    }
  }
  return std::abs(t.V_at(x) - s) / std::abs(t.V_at(x));
}

} // namespace

TEST(HarmonicSolve, ResidualWithinTolerance) {
  const auto bd = make_birth_death(2.0, 1.0);
  const auto &t = bd21_table();
  EXPECT_LE(t.max_residual, 1e-9);
  for (State x = t.boundary_x0 + 1; x <= t.truncation_N - t.max_jump; ++x) {
    EXPECT_LE(direct_residual(bd, t, x), 1e-9) << x;
  }
  const auto lsf = make_left_skip_free(2.0, 1.0, 0.2, 0.8);
  const auto tl = harmonic_solve(lsf, 2000);
  EXPECT_LE(tl.max_residual, 1e-9);
  for (State x = tl.boundary_x0 + 1; x <= 1998; x += 3) {
    EXPECT_LE(direct_residual(lsf, tl, x), 1e-9) << x;
  }
}

TEST(HarmonicSolve, BirthDeathDecomposition) {
  const auto &t = bd21_table();
  ASSERT_TRUE(t.C0.has_value());
  EXPECT_EQ(*t.C0, 0.0);
  for (State x = 200; x <= 1000; ++x) {
    const double r = t.V_at(x) / t.U_at(x);
    EXPECT_GE(r, 0.95);
    EXPECT_LE(r, 1.05);
  }
  EXPECT_LE(std::abs(t.V_at(500) - t.U_at(500)) / t.expR_at(500), 0.05);
}

TEST(HarmonicSolve, TruncationStabilityAndPositivity) {
  const auto &t = bd21_table();
  EXPECT_LT(t.sensitivity, 1e-3);
  EXPECT_FALSE(t.sensitivity_warning);
  EXPECT_GT(t.inf_V, 0.0);
  EXPECT_EQ(t.positive_from, t.boundary_x0);
  EXPECT_TRUE(std::isfinite(t.abs_series_max));
  // V = U above N.
  EXPECT_EQ(t.V_at(2001), t.U_at(2001));
}

TEST(HarmonicSolve, LinearInPotential) {
  const auto bd = make_birth_death(2.0, 1.0);
  const RateFunctions rf = RateFunctions::from(bd);
  const PotentialTable pot(rf, 1001);
  HarmonicOptions opt;
  opt.check_sensitivity = false;
  const auto base = harmonic_solve_with(bd, 1000, [&](State x) { return pot.U(x); }, opt);
  const double alpha = 3.7;
  const auto scaled = harmonic_solve_with(bd, 1000, [&](State x) { return alpha * pot.U(x); }, opt);
  for (State x = bd.boundary_x0 + 1; x <= 1000; ++x) {
    const double g1 = base.V_at(x) - base.U_at(x);
    const double g2 = scaled.V_at(x) - scaled.U_at(x);
    EXPECT_NEAR(g2, alpha * g1, 1e-10 * std::max(std::abs(alpha * g1), 1e-3 * scaled.V_at(x)));
  }
}

TEST(HarmonicSolve, Rejections) {
  EXPECT_THROW(harmonic_solve(make_birth_death(2.0, 1.0), 30), Rejected);
  EXPECT_THROW(harmonic_solve(make_birth_death_transient(2.0, 1.0), 2000), Rejected);
  ChainSpec stuck = make_birth_death(2.0, 1.0);
  auto base = stuck.law;
  stuck.law = [base](State x) {
    if (x == 20) {
      JumpLaw law;
      law.add(0, 1.0);
      return law;
    }
    return base(x);
  };
  HarmonicOptions opt;
  opt.require_positive_recurrent = false;
  opt.check_sensitivity = false;
  EXPECT_THROW(harmonic_solve(stuck, 200, opt), Rejected);
}

TEST(HarmonicIdentity, KernelPowers) {
  const auto bd = make_birth_death(2.0, 1.0);
  const auto &t = bd21_table();
  EXPECT_EQ(harmonic_identity_check(bd, t, 0, 50), 0.0);
  EXPECT_LE(harmonic_identity_check(bd, t, 1, 50), 1e-9);
  EXPECT_LE(harmonic_identity_check(bd, t, 20, 50), 1e-7);
  EXPECT_LE(harmonic_identity_check(bd, t, 20, 7), 1e-7);
}

TEST(HarmonicIdentity, MonteCarlo) {
  const auto bd = make_birth_death(2.0, 1.0);
  const auto &t = bd21_table();
  IdentityMcParams mc;
  mc.seed = 11;
  mc.replicas = 200000;
  EXPECT_LE(harmonic_identity_check(bd, t, 60, 100, mc), 0.02);
}

TEST(UcDrift, LeadingTerm) {
  const auto bd = make_birth_death(2.0, 1.0);
  const double scale = (5.0 - 1.0) * 1.0; // (rho - 1) b
  const auto d0 = u_c_drift(bd, 0.0, 500);
  EXPECT_LE(std::abs(d0.normalized), 0.05 * scale);
  const auto dp = u_c_drift(bd, 1.0, 500);
  EXPECT_NEAR(dp.normalized, -scale / 2.0, 0.1 * scale / 2.0);
  EXPECT_NEAR(dp.predicted, -2.0, 1e-15);
  const auto dm = u_c_drift(bd, -1.0, 500);
  EXPECT_GT(dm.drift, 0.0);
  EXPECT_NEAR(dm.normalized, scale / 2.0, 0.1 * scale / 2.0);
  // Affine in C.
  EXPECT_NEAR(dp.drift + dm.drift, 2.0 * d0.drift, 1e-9 * std::abs(dp.drift));
  EXPECT_THROW(u_c_drift(bd, -1e6, 10), Rejected);
}

TEST(Sandwich, OscillatingThirdMoment) {
  const auto lsf = make_left_skip_free(2.0, 1.0, 0.2, 0.8);
  const auto t = harmonic_solve(lsf, 4000);
  const auto grid = state_range(200, 500);
  const auto sc = find_sandwich_constants(lsf, grid);
  EXPECT_LT(sc.C2, sc.C1);
  for (State x : grid) {
    EXPECT_GT(u_c_drift(lsf, sc.C2, x).drift, 0.0);
    EXPECT_LT(u_c_drift(lsf, sc.C1, x).drift, 0.0);
  }
  const auto rep = skip_free_sandwich_check(lsf, t, sc.C1, sc.C2, grid, 50);
  EXPECT_TRUE(rep.holds) << rep.violations.size() << " violations";
  EXPECT_EQ(rep.checked, grid.size() * 50);
  // Degenerate increment.
  const auto zero = skip_free_sandwich_check(lsf, t, sc.C1, sc.C2, grid, 0);
  EXPECT_TRUE(zero.holds);
  EXPECT_EQ(zero.checked, 0u);
}

TEST(Sandwich, ConvergingThirdMomentPinsConstant) {
  const auto lsf = make_left_skip_free(2.0, 1.0, 0.5, 0.5);
  const auto t = harmonic_solve(lsf, 4000);
  ASSERT_TRUE(t.C0.has_value());
  EXPECT_NEAR(*t.C0, 0.5, 1e-15);
  const auto grid = state_range(200, 500);
  const auto sc = find_sandwich_constants(lsf, grid, 0.0);
  EXPECT_NEAR(sc.kappa_min, 0.5, 0.05);
  EXPECT_NEAR(sc.kappa_max, 0.5, 0.05);
  // The outer condition g = 0 above N shifts (V-U)/e^R by about -C0 x/N;
  // extrapolating N -> infinity from N and 2N removes it.
  const auto half = harmonic_solve(lsf, 2000);
  const double d_full = (t.V_at(500) - t.U_at(500)) / t.expR_at(500);
  const double d_half = (half.V_at(500) - half.U_at(500)) / half.expR_at(500);
  EXPECT_LT(d_half, d_full);
  EXPECT_NEAR(2.0 * d_full - d_half, *t.C0, 0.05);
}

TEST(Sandwich, RejectsLongDownJumps) {
  const auto oj = make_origin_jump_chain(make_birth_death_transient(2.5, 1.0));
  const auto &t = bd21_table();
  const std::vector<State> grid{100};
  EXPECT_THROW(skip_free_sandwich_check(oj, t, 1.0, 0.0, grid), Rejected);
}

TEST(Equivalence, AlternativePotentials) {
  const auto bd = make_birth_death(2.0, 1.0);
  const RateFunctions rf = RateFunctions::from(bd);
  const PotentialTable pot(rf, 2001);
  const auto same = u_equivalence_check(bd, 2000, [&](State x) { return pot.U(x); });
  EXPECT_LE(same.max_abs_diff, 1e-10 * same.max_V);

  const auto near = u_equivalence_check(
      bd, 2000, [&](State x) { return pot.U(x) * (1.0 + 1.0 / (1.0 + static_cast<double>(x))); });
  EXPECT_LE(near.max_abs_diff, 1e-3 * near.max_V);

  auto twice = [&](State x) { return 2.0 * pot.U(x); };
  EXPECT_THROW(u_equivalence_check(bd, 2000, twice), Rejected);
  EquivalenceOptions loose;
  loose.enforce_preconditions = false;
  const auto scaled = u_equivalence_check(bd, 2000, twice, loose);
  EXPECT_NEAR(scaled.max_abs_diff / scaled.max_V, 1.0, 1e-9);

  EXPECT_THROW(u_equivalence_check(bd, 2000, [&](State x) { return pot.U(x) + 1.0; }), Rejected);
}
