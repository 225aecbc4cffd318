#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "scool/core_math.hpp"
#include "scool/elbo.hpp"
#include "scool/errors.hpp"
#include "scool/sbm.hpp"

using namespace scool;

namespace {

SbmState plain_state(std::size_t k, std::size_t m) {
  return make_sbm_state(k, m, BlockPriorInit{.membership_jitter = 0.0});
}

}  // namespace

TEST(MakeSbmState, InitialisesConsistently) {
  const SbmState s = make_sbm_state(5, 3, BlockPriorInit{.alpha = 0.7, .seed = 2});
  EXPECT_NO_THROW(validate(s));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(s.w(i, i), 1.0);
  EXPECT_NEAR(s.gamma(2, 1), s.omega(2, 1) + 0.7, 1e-15);
  const SbmState u = plain_state(4, 2);
  for (double v : u.omega.data()) EXPECT_EQ(v, 0.5);
  EXPECT_THROW(make_sbm_state(3, 2, BlockPriorInit{.b_within = 1.0}), ConfigError);
}

TEST(SbmEStepW, ZeroLogitGivesHalf) {
  SbmState s = plain_state(3, 2);
  s.B = Matrix(2, 2, 0.5);
  sbm_e_step_w(s, Matrix(3, 3), Mask::full(3));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s.w(i, j), i == j ? 1.0 : 0.5);
}

TEST(SbmEStepW, SingleBlockScalarCase) {
  SbmState s = plain_state(2, 1);
  s.B(0, 0) = 0.73;
  s.tau = 1.0;
  Matrix ll(2, 2, -1.1);
  sbm_e_step_w(s, ll, Mask::full(2));
  const double expected = 1.0 / (1.0 + std::exp(-(-1.1 + std::log(0.73 / 0.27))));
  EXPECT_NEAR(s.w(0, 1), expected, 1e-14);
  EXPECT_NEAR(s.w(1, 0), expected, 1e-14);
}

TEST(SbmEStepW, MaskedPairsStayZero) {
  Mask mask(3);
  mask.set(0, 1, true);
  SbmState s = plain_state(3, 2);
  sbm_e_step_w(s, Matrix(3, 3, -0.5), mask);
  EXPECT_GT(s.w(0, 1), 0.0);
  EXPECT_EQ(s.w(1, 0), 0.0);
  EXPECT_EQ(s.w(0, 2), 0.0);
}

TEST(SbmEStepW, IsStationary) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_LT(oracle::sbm_w_residual(oracle::random_sbm(seed, 3 + seed % 4, 1 + seed % 3)), 1e-5) << seed;
  }
}

TEST(SbmEStepGamma, Formula) {
  SbmState s = plain_state(2, 2);
  s.omega(0, 0) = 0.3;
  s.omega(0, 1) = 0.7;
  s.alpha = {1.0, 1.0};
  sbm_e_step_gamma(s);
  EXPECT_DOUBLE_EQ(s.gamma(0, 0), 1.3);

  SbmState u = plain_state(3, 4);
  u.alpha.assign(4, 0.6);
  sbm_e_step_gamma(u);
  for (double v : u.gamma.data()) EXPECT_DOUBLE_EQ(v, 0.6 + 0.25);
}

TEST(SbmEStepGamma, IsStationary) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_LT(oracle::sbm_gamma_residual(oracle::random_sbm(seed + 50, 3 + seed % 4, 1 + seed % 3)), 1e-5);
  }
}

TEST(SbmEStepOmega, SingleBlockIsTrivial) {
  SbmState s = plain_state(4, 1);
  sbm_e_step_omega(s, Mask::full(4));
  for (double v : s.omega.data()) EXPECT_EQ(v, 1.0);
}

TEST(SbmEStepOmega, ConcentratesOnPlantedBlocks) {
  const std::size_t k = 8;
  SbmState s = make_sbm_state(k, 2, BlockPriorInit{.membership_jitter = 0.2, .seed = 4});
  s.B(0, 0) = s.B(1, 1) = 0.9;
  s.B(0, 1) = s.B(1, 0) = 0.1;
  // Break the label symmetry slightly so the sweep picks an orientation.
  s.omega(0, 0) = 0.6;
  s.omega(0, 1) = 0.4;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) s.w(i, j) = i == j ? 1.0 : (i / 4 == j / 4 ? 1.0 : 0.0);
  sbm_e_step_omega(s, Mask::full(k), {.max_sweeps = 5});
  const std::size_t block0 = s.omega(0, 0) > 0.5 ? 0 : 1;
  double worst = 1.0;
  for (std::size_t i = 0; i < k; ++i) worst = std::min(worst, s.omega(i, i < 4 ? block0 : 1 - block0));
  EXPECT_GT(worst, 0.95);
}

TEST(SbmEStepOmega, RowsAreKktPoints) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_LT(oracle::sbm_omega_residual(oracle::random_sbm(seed + 100, 3 + seed % 4, 1 + seed % 3)), 1e-4);
  }
}

TEST(SbmEStep, StopsOnTolerance) {
  auto inst = oracle::random_sbm(7, 6, 2);
  const std::size_t used = sbm_e_step(inst.state, inst.loglik, inst.mask, {.max_iterations = 500, .tolerance = 1e-10});
  EXPECT_LT(used, 500u);
  EXPECT_NO_THROW(validate(inst.state));
}

TEST(SbmMStepAlpha, FixedPointIsKept) {
  // gamma rows identical to alpha make every E log pi term match psi(alpha) - psi(sum alpha).
  SbmState s = plain_state(3, 2);
  s.alpha = {0.8, 1.7};
  for (std::size_t i = 0; i < 3; ++i) {
    s.gamma(i, 0) = 0.8;
    s.gamma(i, 1) = 1.7;
  }
  sbm_m_step_alpha(s);
  EXPECT_NEAR(s.alpha[0], 0.8, 1e-12);
  EXPECT_NEAR(s.alpha[1], 1.7, 1e-12);
}

TEST(SbmMStepAlpha, GradientMatchesElbo) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = oracle::random_sbm(seed + 200, 4, 3);
    const auto g = alpha_gradient(inst.state.gamma, inst.state.alpha);
    std::vector<double> numeric(g.size());
    for (std::size_t a = 0; a < g.size(); ++a) {
      numeric[a] = oracle::central_difference(
          [&](double e) {
            SbmState t = inst.state;
            t.alpha[a] += e;
            return sbm_elbo(t, inst.loglik, inst.mask, 0.0).total;
          },
          1e-6);
    }
    EXPECT_LT(oracle::relative_error(g, numeric), 1e-5) << seed;
  }
}

TEST(SbmMStepAlpha, ClampsAtFloor) {
  SbmState s = plain_state(3, 2);
  s.alpha = {2e-3, 1.0};
  s.eta2 = 10.0;
  for (std::size_t i = 0; i < 3; ++i) {
    s.gamma(i, 0) = 1e-3;
    s.gamma(i, 1) = 5.0;
  }
  sbm_m_step_alpha(s);
  EXPECT_EQ(s.alpha[0], kAlphaFloor);
}

TEST(SbmMStepB, UniformMembershipsGiveMeanOfW) {
  oracle::Rng rng(1);
  SbmState s = plain_state(4, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j) continue;
      s.w(i, j) = oracle::uniform(rng, 0.0, 1.0);
      total += s.w(i, j);
    }
  }
  sbm_m_step_B(s, Mask::full(4));
  for (double v : s.B.data()) EXPECT_NEAR(v, total / 12.0, 1e-14);
}

TEST(SbmMStepB, AllOnesClamps) {
  SbmState s = plain_state(3, 2);
  s.w = Matrix(3, 3, 1.0);
  sbm_m_step_B(s, Mask::full(3));
  for (double v : s.B.data()) EXPECT_EQ(v, 1.0 - kBClamp);
}

TEST(SbmMStepB, HardMembershipsRecoverBlockValues) {
  SbmState s = plain_state(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    s.omega(i, 0) = i < 3 ? 1.0 : 0.0;
    s.omega(i, 1) = i < 3 ? 0.0 : 1.0;
  }
  const double block[2][2] = {{0.8, 0.15}, {0.25, 0.6}};
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) s.w(i, j) = i == j ? 1.0 : block[i / 3][j / 3];
  sbm_m_step_B(s, Mask::full(6));
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) EXPECT_NEAR(s.B(a, b), block[a][b], 1e-14);
}

TEST(SbmMStepB, DegenerateBlockPolicy) {
  SbmState s = plain_state(3, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    s.omega(i, 0) = 1.0;
    s.omega(i, 1) = 0.0;
  }
  SbmState keep = s;
  EXPECT_THROW(sbm_m_step_B(s, Mask::full(3)), DegenerateMembershipError);
  sbm_m_step_B(keep, Mask::full(3), DegeneratePolicy::KeepPrevious);
  EXPECT_EQ(keep.B(1, 1), 0.8);
}

TEST(SbmUpdates, NeverDecreaseElbo) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_GE(oracle::sbm_worst_step(oracle::random_sbm(seed + 300, 3 + seed % 4, 1 + seed % 3)), -1e-8);
  }
}

TEST(Validate, RejectsBrokenStates) {
  SbmState s = plain_state(3, 2);
  s.omega(0, 0) = 0.9;
  EXPECT_THROW(validate(s), InvariantError);
  s = plain_state(3, 2);
  s.B(0, 1) = 0.0;
  EXPECT_THROW(validate(s), InvariantError);
}
