#include <gtest/gtest.h>

#include "scool/errors.hpp"
#include "scool/net_sim.hpp"

using namespace scool;

namespace {

std::size_t count_edges(const Mask& m) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) n += i != j && m(i, j);
  return n;
}

}  // namespace

TEST(BuildTopology, FullyConnected) {
  const auto t = build_topology(TopologyKind::FullyConnected, 5);
  EXPECT_EQ(t.mask.directed_edges(), 20u);
  EXPECT_EQ(count_edges(t.mask), 20u);
}

TEST(BuildTopology, GroupRingNeighbourCount) {
  const auto t = build_topology(TopologyKind::GroupRing, 10, {.ring_k0 = 8});
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(t.mask.neighbors(i), 2u);
    EXPECT_TRUE(t.mask(i, (i + 1) % 10));
    EXPECT_TRUE(t.mask(i, (i + 9) % 10));
  }
}

TEST(BuildTopology, GroupRingMatchesInequality) {
  for (std::size_t k0 : {0u, 3u, 6u, 9u}) {
    const std::size_t k = 12;
    const auto t = build_topology(TopologyKind::GroupRing, k, {.ring_k0 = k0});
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t d = std::min(i > j ? i - j : j - i, k - (i > j ? i - j : j - i));
        EXPECT_EQ(t.mask(i, j), 2 * d <= k - k0) << i << "," << j;
      }
    }
  }
  EXPECT_THROW(build_topology(TopologyKind::GroupRing, 5, {.ring_k0 = 5}), ConfigError);
}

TEST(BuildTopology, BipartiteDeterministicAndCrossing) {
  const TopologyParams p{.bipartite_degree = 2, .seed = 17};
  const auto a = build_topology(TopologyKind::Bipartite, 10, p);
  const auto b = build_topology(TopologyKind::Bipartite, 10, p);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_TRUE(a.mask.symmetric());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_GE(a.mask.neighbors(i), 2u);
  EXPECT_THROW(build_topology(TopologyKind::Bipartite, 10, {.bipartite_degree = 6}), ConfigError);
}

TEST(SparsifyTopk, FullKeepIsIdentity) {
  const Mask m = Mask::full(4);
  EXPECT_EQ(sparsify_topk(Matrix(4, 4, 0.3), m, 1.0, 20, 10), m);
}

TEST(SparsifyTopk, InactiveBeforeActivationRound) {
  const Mask m = Mask::full(4);
  EXPECT_EQ(sparsify_topk(Matrix(4, 4, 0.3), m, 0.3, 9, 10), m);
}

TEST(SparsifyTopk, KeepsCeilFraction) {
  Matrix w(11, 11);
  for (std::size_t i = 0; i < 11; ++i)
    for (std::size_t j = 0; j < 11; ++j) w(i, j) = 0.01 * static_cast<double>((i * 7 + j * 3) % 11 + 1);
  const Mask out = sparsify_topk(w, Mask::full(11), 0.1, 10, 10);
  for (std::size_t i = 0; i < 11; ++i) EXPECT_EQ(out.neighbors(i), 1u);
}

TEST(SparsifyTopk, TiesGoToLowerIndex) {
  Matrix w(4, 4);
  w(0, 1) = 0.5;
  w(0, 2) = 0.5;
  w(0, 3) = 0.1;
  for (std::size_t i = 1; i < 4; ++i) w(i, 0) = 1.0;
  const Mask out = sparsify_topk(w, Mask::full(4), 2.0 / 3.0, 10, 10);
  EXPECT_TRUE(out(0, 1));
  EXPECT_TRUE(out(0, 2));
  EXPECT_FALSE(out(0, 3));
}

TEST(Sparsifier, FiresOnce) {
  Sparsifier s(0.5, 3);
  Mask m = Mask::full(5);
  const Matrix w(5, 5, 0.2);
  EXPECT_FALSE(s.maybe_apply(w, m, 2));
  EXPECT_TRUE(s.maybe_apply(w, m, 3));
  const Mask frozen = m;
  EXPECT_FALSE(s.maybe_apply(Matrix(5, 5, 0.9), m, 4));
  EXPECT_EQ(m, frozen);
  EXPECT_EQ(m.directed_edges(), 10u);
}

TEST(AccountExchange, EmptyMaskCostsNothing) {
  CommLedger ledger;
  account_exchange(ledger, Mask(4), GradMode::CrossGradient, 4, 10, 3);
  EXPECT_EQ(ledger.total_units, 0.0);
  EXPECT_EQ(ledger.total_scalars, 0.0);
}

TEST(AccountExchange, TaylorFullyConnectedK3) {
  CommLedger ledger;
  account_exchange(ledger, Mask::full(3), GradMode::TaylorApprox, 3, 10, 1);
  const auto& r = ledger.rounds.back();
  EXPECT_EQ(r.directed_edges, 6u);
  EXPECT_EQ(r.mstep_units, 6.0);
  EXPECT_EQ(r.eval_units, 6.0);
  EXPECT_EQ(r.total_units, 12.0);
  EXPECT_FALSE(r.payload_shared);
}

TEST(AccountExchange, CrossGradientDoublesGradientTraffic) {
  const Mask m = build_topology(TopologyKind::GroupRing, 9, {.ring_k0 = 4}).mask;
  CommLedger taylor;
  CommLedger cross;
  account_exchange(taylor, m, GradMode::TaylorApprox, 9, 10, 4);
  account_exchange(cross, m, GradMode::CrossGradient, 9, 10, 4);
  EXPECT_EQ(cross.rounds[0].mstep_units, 2.0 * taylor.rounds[0].mstep_units);
  EXPECT_TRUE(cross.rounds[0].payload_shared);
  EXPECT_EQ(cross.total_units_shared, cross.rounds[0].mstep_units);
}

TEST(AccountExchange, ModelAveragingCountsFetches) {
  CommLedger ledger;
  account_exchange(ledger, Mask::full(4), GradMode::TaylorApprox, 4, 7, 5, ExchangeKind::ModelAveraging);
  EXPECT_EQ(ledger.total_units, 12.0 * 5.0);
  EXPECT_EQ(ledger.total_floats, 12.0 * 5.0 * 7.0);
}

TEST(AccountExchange, PerClientUnitsSumToTotalsForTaylor) {
  const Mask m = build_topology(TopologyKind::Bipartite, 8, {.bipartite_degree = 2, .seed = 3}).mask;
  CommLedger ledger;
  account_exchange(ledger, m, GradMode::TaylorApprox, 8, 4, 2);
  double sum = 0.0;
  for (double u : ledger.per_client_units) sum += u;
  EXPECT_EQ(sum, ledger.total_units);
}
