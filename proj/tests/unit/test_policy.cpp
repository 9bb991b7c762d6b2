#include "support.hpp"

#include <nashverify/errors.hpp>
#include <nashverify/policy.hpp>

#include <gtest/gtest.h>

using namespace nashverify;

namespace {

EquilibriumSolution solution(double mean, double dispersion) {
  return EquilibriumSolution{{mean, mean}, mean, dispersion, SolveStatus::Exact};
}

CandidateAssessment candidate(std::size_t index, double mean, double dispersion,
                              const AcceptancePolicy& policy = {}) {
  return assess(solution(mean, dispersion), RawScoreVector({mean, mean}), index, policy);
}

std::vector<RawScoreVector> random_matrix(std::mt19937_64& rng, std::size_t k, std::size_t m) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RawScoreVector> out;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> row(m);
    for (auto& v : row) v = unit(rng);
    out.emplace_back(row);
  }
  return out;
}

const StubbornnessVector kDefaultLambdas({1.5, 1.0, 0.8});

}  // namespace

TEST(Policy, DefaultThresholds) {
  const AcceptancePolicy policy;
  EXPECT_DOUBLE_EQ(policy.tau, 0.6);
  EXPECT_DOUBLE_EQ(policy.epsilon, 0.1);
}

TEST(Policy, AcceptanceIsStrictOnBothThresholds) {
  const AcceptancePolicy policy{.tau = 0.5, .epsilon = 0.125};
  EXPECT_TRUE(candidate(0, 0.75, 0.0625, policy).accepted);
  EXPECT_FALSE(candidate(0, 0.5, 0.0625, policy).accepted);   // mean == tau
  EXPECT_FALSE(candidate(0, 0.75, 0.125, policy).accepted);   // dispersion == epsilon
  EXPECT_FALSE(candidate(0, 0.25, 0.0, policy).accepted);
  EXPECT_DOUBLE_EQ(candidate(0, 0.75, 0.0625, policy).rank_score, 0.6875);
}

TEST(Policy, WorkedExampleIsRejectedOnDispersion) {
  const RawScoreVector raw({0.9, 0.2, 0.9});
  const auto a = assess(solve_equilibrium(raw, kDefaultLambdas), raw, 0, AcceptancePolicy{});
  EXPECT_GT(a.equilibrium.mean, 0.6);
  EXPECT_FALSE(a.accepted);
  const RawScoreVector agree({0.9, 0.85, 0.95});
  EXPECT_TRUE(assess(solve_equilibrium(agree, kDefaultLambdas), agree, 1, AcceptancePolicy{}).accepted);
}

TEST(Policy, ValidateRejectsNegativeEpsilon) {
  EXPECT_THROW((AcceptancePolicy{.tau = 0.6, .epsilon = -0.1}.validate()), InvalidArgument);
  EXPECT_NO_THROW((AcceptancePolicy{.tau = 10.0, .epsilon = 0.0}.validate()));
}

TEST(Select, NormalModePicksHighestAcceptedMean) {
  const auto out = select({candidate(0, 0.7, 0.05), candidate(1, 0.95, 0.3), candidate(2, 0.8, 0.01)});
  EXPECT_EQ(out.mode, SelectionMode::Normal);
  EXPECT_EQ(out.chosen_index, 2u);  // candidate 1 has the top mean but is rejected
  EXPECT_EQ(out.accepted_count(), 2u);
}

TEST(Select, FallbackPicksBestMeanMinusDispersion) {
  const auto out = select({candidate(0, 0.5, 0.05), candidate(1, 0.58, 0.2), candidate(2, 0.55, 0.01)});
  EXPECT_EQ(out.mode, SelectionMode::Fallback);
  EXPECT_EQ(out.chosen_index, 2u);
  EXPECT_EQ(out.accepted_count(), 0u);
}

TEST(Select, TiesGoToLowestIndex) {
  EXPECT_EQ(select({candidate(0, 0.7, 0.0), candidate(1, 0.7, 0.0)}).chosen_index, 0u);
  EXPECT_EQ(select({candidate(0, 0.4, 0.0), candidate(1, 0.4, 0.0)}).chosen_index, 0u);
  EXPECT_THROW(select({}), InvalidArgument);
}

TEST(Strategy, NamesRoundTrip) {
  for (Strategy s : kAllStrategies) EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_THROW(parse_strategy("best_of_n"), InvalidArgument);
  EXPECT_TRUE(is_randomized(Strategy::Random));
  EXPECT_TRUE(is_randomized(Strategy::NoSelection));
  EXPECT_FALSE(is_randomized(Strategy::FullNash));
}

TEST(Strategy, RandomizedStrategiesNeedAnEngine) {
  std::mt19937_64 gen(1);
  const auto matrix = random_matrix(gen, 3, 3);
  const AcceptancePolicy policy;
  EXPECT_THROW(select_with_strategy(Strategy::Random, matrix, kDefaultLambdas, policy, nullptr),
               InvalidArgument);
  EXPECT_THROW(select_with_strategy(Strategy::NoSelection, matrix, kDefaultLambdas, policy, nullptr),
               InvalidArgument);
  EXPECT_NO_THROW(select_with_strategy(Strategy::FullNash, matrix, kDefaultLambdas, policy, nullptr));
  EXPECT_THROW(select_with_strategy(Strategy::FullNash, {}, kDefaultLambdas, policy, nullptr),
               InvalidArgument);
}

TEST(Strategy, RawAverageUsesRawStatistics) {
  const std::vector<RawScoreVector> matrix = {RawScoreVector({0.9, 0.2, 0.9}),
                                              RawScoreVector({0.7, 0.7, 0.7})};
  const auto out = select_with_strategy(Strategy::RawAverage, matrix, kDefaultLambdas, {}, nullptr);
  const auto& a = out.assessments[0];
  EXPECT_EQ(a.equilibrium.status, SolveStatus::RawStatistics);
  EXPECT_NEAR(a.equilibrium.mean, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(a.equilibrium.dispersion, 0.311111111111, 1e-9);
  EXPECT_EQ(out.chosen_index, 1u);
}

TEST(StrategyProperty, StructuralIdentitiesHoldOnRandomMatrices) {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> tau_dist(0.0, 1.0);
  std::uniform_real_distribution<double> eps_dist(0.0, 0.3);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t k = 1 + trial % 5;
    const auto matrix = random_matrix(gen, k, 3);
    const AcceptancePolicy policy{.tau = tau_dist(gen), .epsilon = eps_dist(gen)};
    RandomEngine r1(trial), r2(trial);

    const auto full = select_with_strategy(Strategy::FullNash, matrix, kDefaultLambdas, policy, nullptr);
    const auto nosel = select_with_strategy(Strategy::NoSelection, matrix, kDefaultLambdas, policy, &r1);
    const auto norej = select_with_strategy(Strategy::NoRejection, matrix, kDefaultLambdas, policy, nullptr);
    const auto rnd = select_with_strategy(Strategy::Random, matrix, kDefaultLambdas, policy, &r2);

    EXPECT_EQ(full.mode, nosel.mode);
    EXPECT_EQ(full.accepted_count(), nosel.accepted_count());
    for (std::size_t c = 0; c < k; ++c) {
      EXPECT_EQ(full.assessments[c].accepted, nosel.assessments[c].accepted);
    }
    if (nosel.mode == SelectionMode::Normal) {
      EXPECT_TRUE(nosel.assessments[nosel.chosen_index].accepted);
    } else {
      EXPECT_EQ(nosel.chosen_index, full.chosen_index);
    }
    EXPECT_EQ(norej.accepted_count(), k);
    EXPECT_EQ(norej.mode, SelectionMode::Normal);
    EXPECT_EQ(rnd.accepted_count(), k);
    EXPECT_EQ(rnd.mode, SelectionMode::Normal);
    EXPECT_LT(rnd.chosen_index, k);
    if (full.mode == SelectionMode::Normal) {
      EXPECT_TRUE(full.assessments[full.chosen_index].accepted);
      for (const auto& a : full.assessments) {
        if (a.accepted) {
          EXPECT_LE(a.equilibrium.mean, full.assessments[full.chosen_index].equilibrium.mean);
        }
      }
    }
  }
}

TEST(StrategyProperty, TauAboveOneRejectsEverything) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto matrix = random_matrix(gen, 3, 3);
    const auto out = select_with_strategy(Strategy::FullNash, matrix, kDefaultLambdas,
                                          AcceptancePolicy{.tau = 10.0, .epsilon = 0.1}, nullptr);
    EXPECT_EQ(out.mode, SelectionMode::Fallback);
    EXPECT_EQ(out.accepted_count(), 0u);
  }
}

TEST(StrategyProperty, LargeEpsilonNeverRejectsOnDispersionForThreeJudges) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 500; ++trial) {
    const auto matrix = random_matrix(gen, 3, 3);
    const auto out = select_with_strategy(Strategy::FullNash, matrix, kDefaultLambdas,
                                          AcceptancePolicy{.tau = 0.0, .epsilon = 0.5}, nullptr);
    for (const auto& a : out.assessments) {
      EXPECT_EQ(a.accepted, a.equilibrium.mean > 0.0);
    }
  }
}
