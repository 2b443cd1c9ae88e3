#include <cmath>

#include <gtest/gtest.h>

#include "lamperti/chain_model.hpp"
#include "lamperti/exact_solver.hpp"
#include "lamperti/h_transform.hpp"
#include "lamperti/harmonic.hpp"
#include "lamperti/mc_engine.hpp"

using namespace lamperti;

namespace {

struct Bd21 {
  ChainSpec spec = make_birth_death(2.0, 1.0);
  StationaryTable stat = stationary_skip_free(spec, 2000);
  HarmonicTable harm = harmonic_solve(spec, 2000);
  TransformedChain tc = transform(spec, harm, stat);
};

const Bd21 &bd21() {
  static const Bd21 b;
  return b;
}

} // namespace

TEST(Transform, RowsAreStochastic) {
  const auto &b = bd21();
  for (State x = b.tc.support_min(); x <= b.tc.truncation_N() - 1; ++x) {
    const JumpLaw r = b.tc.row(x);
    EXPECT_NEAR(r.total(), 1.0, 1e-9) << x;
    for (double p : r.probs) {
      EXPECT_GE(p, 0.0);
    }
    for (int o : r.offsets) {
      EXPECT_GT(x + o, b.harm.boundary_x0);
    }
  }
  // Fallback rows above N.
  for (State x : {2001, 3000, 15000}) {
    EXPECT_NEAR(b.tc.row(x).total(), 1.0, 1e-12);
  }
  EXPECT_THROW(b.tc.row(b.harm.boundary_x0), Rejected);
  EXPECT_THROW(b.tc.row(b.tc.extended_max() + 1), Rejected);
}

TEST(Transform, ConstantVRejected) {
  const auto &b = bd21();
  HarmonicTable flat = b.harm;
  std::fill(flat.V.begin(), flat.V.end(), 1.0);
  try {
    transform(b.spec, flat, b.stat);
    FAIL();
  } catch (const Rejected &e) {
    EXPECT_EQ(e.witness(), b.harm.boundary_x0 + 1);
  }
  HarmonicTable neg = b.harm;
  neg.V[10] = -1.0;
  EXPECT_THROW(transform(b.spec, neg, b.stat), Rejected);
}

TEST(Transform, InitialLawAndBoundaryIntegral) {
  const auto &b = bd21();
  const auto &init = b.tc.init();
  double s = 0.0;
  for (std::size_t i = 0; i < init.states.size(); ++i) {
    EXPECT_GT(init.states[i], b.harm.boundary_x0);
    s += init.probs[i];
  }
  EXPECT_NEAR(s, 1.0, 1e-14);
  // Only x0 -> x0+1 leaves B for the +-1 chain.
  ASSERT_EQ(init.states.size(), 1u);
  EXPECT_EQ(init.states[0], b.harm.boundary_x0 + 1);
  const double I = b.stat.pi(4) * b.spec.law(4).prob_of(1) * b.harm.V_at(5);
  EXPECT_NEAR(b.tc.boundary_integral(), I, 1e-14 * I);
}

TEST(Transform, KernelPowerConsistency) {
  const auto &b = bd21();
  const State x0 = b.harm.boundary_x0;
  const SparseRowMatrix hat = b.tc.kernel_matrix();
  const SparseRowMatrix killed = killed_kernel(b.spec, x0, 300);
  const int n = static_cast<int>(300 - x0);
  for (State x : {5, 20, 77, 150, 280}) {
    Eigen::RowVectorXd ph = Eigen::RowVectorXd::Zero(hat.rows());
    Eigen::RowVectorXd pk = Eigen::RowVectorXd::Zero(n);
    ph(x - x0 - 1) = 1.0;
    pk(x - x0 - 1) = 1.0;
    for (int k = 0; k < 10; ++k) {
      ph = ph * hat;
      pk = pk * killed;
    }
    for (State y = x0 + 1; y <= 290; ++y) {
      const double lhs = pk(y - x0 - 1);
      const double rhs = b.harm.V_at(x) / b.harm.V_at(y) * ph(y - x0 - 1);
      EXPECT_NEAR(lhs, rhs, 1e-8 * std::max(lhs, rhs) + 1e-300) << x << "->" << y;
    }
  }
}

TEST(TransformedMoments, LimitsAtTwoHundred) {
  const auto &b = bd21();
  const std::vector<State> g{200};
  const auto mt = transformed_moments(b.tc, g);
  const double xm1 = 200.0 * mt.m1[0];
  EXPECT_GE(xm1, 2.85);
  EXPECT_LE(xm1, 3.15);
  EXPECT_GE(mt.m2[0], 0.95);
  EXPECT_LE(mt.m2[0], 1.05);
  EXPECT_NEAR(2.0 * xm1 + mt.m2[0], 7.0, 0.7);
  EXPECT_EQ(b.tc.hat_mu, 3.0);
  EXPECT_EQ(b.tc.hat_b, 1.0);
  const std::vector<State> bad{2000};
  EXPECT_THROW(transformed_moments(b.tc, bad), Rejected);
  // Fallback rows keep the same drift profile.
  const auto far = law_moments(b.tc.row(6000), 6000, b.spec.profile);
  EXPECT_NEAR(6000.0 * far.m1, 3.0, 0.05);
}

TEST(ReturnCheck, FarStartRespectsBound) {
  const auto &b = bd21();
  const auto cert = classify(b.tc.as_chain_spec(), state_range(b.tc.support_min(), 2000));
  ASSERT_EQ(cert.classification, Classification::transient);
  ReturnMcParams mc;
  mc.seed = 3;
  mc.replicas = 2000;
  const auto rc = transformed_return_check(b.tc, 400, 40, cert.delta, mc);
  EXPECT_TRUE(rc.within_bound);
  EXPECT_EQ(rc.censored, 0);
  // For a left-skip-free base the return probability is V(x)/V(y) exactly.
  EXPECT_LE(b.harm.V_at(40) / b.harm.V_at(400), rc.bound);
}

TEST(ReturnCheck, MatchesHarmonicRatio) {
  const auto &b = bd21();
  ReturnMcParams mc;
  mc.seed = 5;
  mc.replicas = 10000;
  mc.escape_level = 400;
  const auto rc = transformed_return_check(b.tc, 60, 50, 1.0, mc);
  const double exact = b.harm.V_at(50) / b.harm.V_at(60);
  EXPECT_NEAR(rc.probability, exact, 4.0 * rc.stderr_);
  // Start just above x: the bound is close to one.
  const auto near = transformed_return_check(b.tc, 1001, 1000, 1.0, mc);
  EXPECT_GT(near.bound, 0.99);
  EXPECT_TRUE(near.within_bound);
}

TEST(HatChain, NeverEntersB) {
  const auto &b = bd21();
  const State x0 = b.harm.boundary_x0;
  ReturnMcParams mc;
  mc.seed = 9;
  mc.replicas = 1000;
  mc.escape_level = 10000;
  mc.max_steps = 100000;
  const auto rc = transformed_return_check(b.tc, 2 * x0, x0, 1.0, mc);
  EXPECT_EQ(rc.returned, 0);
  EXPECT_EQ(rc.escaped + rc.censored, 1000);
}
