#include <gtest/gtest.h>

#include <map>
#include <numeric>

#include "support.hpp"

using namespace pmidx;

namespace {

IndexTable table(std::vector<double> w) {
  IndexTable t;
  t.indexable = true;
  t.h = w;
  t.w = std::move(w);
  return t;
}

std::vector<IndexTable> tables_of(const FleetSpec& f) {
  std::vector<IndexTable> out;
  for (const auto& m : f.machines) out.push_back(w_index(m));
  return out;
}

}  // namespace

// Machine 2 (0-based 1) is more worn than machine 3 (0-based 2) but has the
// smaller index.
TEST(Decide, IndexAndNaiveDisagree) {
  std::vector<IndexTable> t{table({-5, 5, 6, 7, 8, 9, 10}), table({-5, 1, 2, 5, 10, 12, 14}),
                            table({-5, 10, 30, 50, 60, 70, 80}), table({-5, 5, 6, 7, 8, 9, 10}),
                            table({-5, 20, 40, 60, 80, 90, 100})};
  const std::vector<State> states{1, 4, 3, 1, 6};
  auto index = Policy::index(t);
  auto naive = Policy::naive();
  EXPECT_EQ(decide(index, states, 2), (Selection{2, 4}));
  EXPECT_EQ(decide(naive, states, 2), (Selection{1, 4}));
}

TEST(Decide, AllNewGivesEmptySelection) {
  const auto f = pmidx::testing::illustrative_fleet();
  const std::vector<State> zeros(4, 0);
  auto idx = Policy::index(tables_of(f), false);
  auto idle = Policy::index(tables_of(f), true);
  auto naive = Policy::naive(3);
  auto thr = Policy::threshold({0, 0, 0, 0});
  std::vector<IndexTable> perfect;
  for (const auto& m : f.machines) perfect.push_back(w_index_perfect(m));
  auto myopic = Policy::myopic(perfect);
  for (Policy* p : {&idx, &idle, &naive, &thr, &myopic}) EXPECT_TRUE(decide(*p, zeros, 2).empty());
}

TEST(Decide, NonPositiveIndexIdles) {
  std::vector<IndexTable> t{table({-5, -1, 2}), table({-5, 0, 3})};
  auto idle = Policy::index(t, true);
  auto busy = Policy::index(t, false);
  EXPECT_TRUE(decide(idle, std::vector<State>{1, 1}, 2).empty());
  EXPECT_EQ(decide(busy, std::vector<State>{1, 1}, 2), (Selection{0, 1}));
  EXPECT_EQ(decide(idle, std::vector<State>{2, 1}, 2), (Selection{0}));
}

TEST(Decide, ThresholdTruncatesByState) {
  auto thr = Policy::threshold({2, 2, 2, 5});
  EXPECT_EQ(decide(thr, std::vector<State>{3, 2, 6, 4}, 2), (Selection{0, 2}));
  EXPECT_EQ(decide(thr, std::vector<State>{1, 2, 1, 4}, 2), (Selection{1}));
}

TEST(Decide, MissingTablesRejected) {
  auto p = Policy::index({table({0, 1})});
  EXPECT_THROW(decide(p, std::vector<State>{1, 1}, 1), ValidationError);
  IndexTable bad;
  auto q = Policy::index({bad});
  EXPECT_THROW(decide(q, std::vector<State>{1}, 1), ValidationError);
  auto thr = Policy::threshold({1});
  EXPECT_THROW(decide(thr, std::vector<State>{1, 1}, 1), ValidationError);
}

TEST(Decide, FairTieBreaking) {
  auto p = Policy::naive(77);
  const std::vector<State> states{3, 3};
  int first = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) first += decide(p, states, 1).front() == 0;
  EXPECT_NEAR(static_cast<double>(first) / n, 0.5, 0.02);
}

TEST(Decide, ReproducibleForSameSeed) {
  auto a = Policy::naive(5), b = Policy::naive(5);
  Stream rng(1);
  for (int i = 0; i < 500; ++i) {
    std::vector<State> s(6);
    for (auto& x : s) x = rng.below(4);
    EXPECT_EQ(decide(a, s, 2), decide(b, s, 2));
  }
}

TEST(Decide, NeverExceedsRepairmen) {
  const auto f = pmidx::testing::illustrative_fleet();
  auto p = Policy::index(tables_of(f), false, 3);
  auto naive = Policy::naive(4);
  Stream rng(2);
  for (int i = 0; i < 1000; ++i) {
    std::vector<State> s(4);
    for (auto& x : s) x = rng.below(25);
    for (std::size_t r = 1; r <= 4; ++r) {
      EXPECT_LE(decide(p, s, r).size(), r);
      EXPECT_LE(decide(naive, s, r).size(), r);
    }
  }
}

TEST(Decide, CommonCostScaleLeavesDecisionsUnchanged) {
  const auto f = pmidx::testing::illustrative_fleet();
  FleetSpec g = f;
  for (auto& m : g.machines) m = scale_costs(m, 3.0);
  const auto a = Policy::index(tables_of(f)), b = Policy::index(tables_of(g));
  Stream rng(3);
  for (int i = 0; i < 2000; ++i) {
    std::vector<State> s(4);
    for (auto& x : s) x = rng.below(25);
    EXPECT_EQ(decision_distribution(a, s, 2), decision_distribution(b, s, 2));
  }
}

// Idling by exclusion equals competing against |R| virtual machines whose
// index is identically zero.
TEST(Decide, VirtualMachineEquivalence) {
  Stream rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 2 + rng.below(5), r = 1 + rng.below(3);
    std::vector<IndexTable> real, padded;
    std::vector<State> states, padded_states;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> w{-1.0};
      for (int x = 1; x < 6; ++x) w.push_back(rng.uniform(-50, 50));
      real.push_back(table(w));
      padded.push_back(table(w));
      states.push_back(rng.below(6));
      padded_states.push_back(states.back());
    }
    for (std::size_t v = 0; v < r; ++v) {
      padded.push_back(table({0.0, 0.0}));
      padded_states.push_back(1);
    }
    auto idle = Policy::index(real, true);
    auto pad = Policy::index(padded, false);
    Selection expect;
    for (std::size_t id : decide(pad, padded_states, r))
      if (id < m) expect.push_back(id);
    EXPECT_EQ(decide(idle, states, r), expect);
  }
}

TEST(Decide, DistributionMatchesSampling) {
  auto p = Policy::naive(9);
  const std::vector<State> states{4, 4, 4, 2, 5};
  const auto dist = decision_distribution(p, states, 2);
  ASSERT_EQ(dist.size(), 3u);
  double total = 0;
  for (const auto& [sel, prob] : dist) {
    total += prob;
    EXPECT_EQ(sel.size(), 2u);
    EXPECT_NE(std::find(sel.begin(), sel.end(), 4u), sel.end());
  }
  EXPECT_DOUBLE_EQ(total, 1.0);
  std::map<Selection, int> seen;
  for (int i = 0; i < 3000; ++i) ++seen[decide(p, states, 2)];
  for (const auto& [sel, prob] : dist) EXPECT_NEAR(seen[sel] / 3000.0, prob, 0.04);
}

TEST(Thresholds, EvenSpacing) {
  const auto f = pmidx::testing::illustrative_fleet();
  const auto ps = enumerate_thresholds(f, 8);
  ASSERT_EQ(ps.size(), 8u);
  const std::vector<State> expect{3, 5, 8, 11, 13, 16, 19, 21};
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(ps[k].kind(), PolicyKind::Threshold);
    EXPECT_EQ(ps[k].levels(), std::vector<State>(4, expect[k]));
  }
  EXPECT_EQ(enumerate_thresholds(f, 1).front().levels(), std::vector<State>(4, 12));
}

TEST(Thresholds, LevelsInterior) {
  Stream rng(6);
  for (int i = 0; i < 200; ++i) {
    FleetSpec f;
    f.machines.push_back(pmidx::testing::random_machine(rng, 3 + rng.below(20), Mode::WithFailures));
    const std::size_t count = 1 + rng.below(f.machines[0].n_states - 2);
    for (const auto& p : enumerate_thresholds(f, count)) {
      EXPECT_GT(p.levels()[0], 0u);
      EXPECT_LT(p.levels()[0], f.machines[0].top());
    }
  }
}

TEST(Thresholds, CountTooLarge) {
  const auto f = pmidx::testing::illustrative_fleet();
  EXPECT_NO_THROW(enumerate_thresholds(f, 23));
  EXPECT_THROW(enumerate_thresholds(f, 24), ValidationError);
  EXPECT_THROW(enumerate_thresholds(f, 0), ValidationError);
}
