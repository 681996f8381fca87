#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tdg/trust.hpp"

using namespace tdg;

namespace {

Rating raw(double value, AgentId subject = AgentId{1}) { return Rating{AgentId{0}, subject, value, 0, {}}; }

// Straight recomputation: mean of the last `cap` values, mapped to [0, 1].
double oracle_tau(const std::vector<double>& values, std::size_t cap) {
  const auto first = values.size() > cap ? values.size() - cap : 0;
  double sum = 0;
  for (auto i = first; i < values.size(); ++i) sum += values[i];
  const auto n = values.size() - first;
  return n == 0 ? 0.5 : 0.5 + sum / (2.0 * static_cast<double>(n));
}

}  // namespace

TEST(Reputation, EmptyWindowIsNeutral) {
  ReputationProfile p(AgentId{1});
  EXPECT_DOUBLE_EQ(p.tau(), 0.5);
  EXPECT_EQ(classify(p.tau()), TrustClass::Undecided);
}

TEST(Reputation, WorkedExamples) {
  const std::vector<Rating> a{raw(1), raw(1), raw(-1)};
  EXPECT_NEAR(aggregate_reputation(std::span<const Rating>(a)), 0.6667, 5e-5);
  const std::vector<Rating> b{raw(1), raw(1), raw(0)};
  EXPECT_NEAR(aggregate_reputation(std::span<const Rating>(b)), 0.8333, 5e-5);
}

TEST(Reputation, SlidingWindowMatchesRecomputation) {
  Rng rng = make_stream(3, "window");
  ReputationProfile p(AgentId{1}, 7);
  std::vector<double> seen;
  for (int i = 0; i < 200; ++i) {
    const double v = std::round((uniform01(rng) * 2 - 1) * 4) / 4;
    p.record(raw(v));
    seen.push_back(v);
    ASSERT_NEAR(p.tau(), oracle_tau(seen, 7), 1e-12) << "after " << i + 1 << " ratings";
    ASSERT_LE(p.window().size(), 7u);
  }
}

TEST(Reputation, RejectsForeignSubjectAndOutOfRangeValues) {
  ReputationProfile p(AgentId{1});
  EXPECT_THROW(p.record(raw(1, AgentId{2})), ValidationError);
  EXPECT_THROW(p.record(raw(1.5)), ValidationError);
  EXPECT_THROW(ReputationProfile(AgentId{1}, 0), ValidationError);
}

TEST(Reputation, RecordRatingLeavesInputUntouched) {
  const ReputationProfile before(AgentId{1});
  const auto after = record_rating(before, make_rating(AgentId{0}, AgentId{1}, RatingCause::WrongResult, 3));
  EXPECT_TRUE(before.window().empty());
  EXPECT_DOUBLE_EQ(after.tau(), 0.0);
}

TEST(RatingCauses, ValuesAreOrderedByHarm) {
  EXPECT_EQ(rating_value(RatingCause::CorrectOnTime), 1.0);
  EXPECT_GT(rating_value(RatingCause::CorrectOnTime), rating_value(RatingCause::CorrectLate));
  EXPECT_GT(rating_value(RatingCause::CorrectLate), 0.0);
  EXPECT_LT(rating_value(RatingCause::RejectedWU), 0.0);
  EXPECT_GT(rating_value(RatingCause::RejectedWU), rating_value(RatingCause::DroppedWU));
  EXPECT_GE(rating_value(RatingCause::TimedOut), rating_value(RatingCause::WrongResult));
  EXPECT_EQ(rating_value(RatingCause::WrongResult), -1.0);
  for (RatingCause c : kAllRatingCauses) EXPECT_EQ(parse_rating_cause(to_string(c)), c);
}

TEST(Classify, Boundaries) {
  EXPECT_EQ(classify(0.0), TrustClass::Untrusted);
  EXPECT_EQ(classify(0.4), TrustClass::Untrusted);
  EXPECT_EQ(classify(std::nextafter(0.4, 1.0)), TrustClass::Undecided);
  EXPECT_EQ(classify(0.7), TrustClass::Undecided);
  EXPECT_EQ(classify(std::nextafter(0.7, 1.0)), TrustClass::Trusted);
  EXPECT_EQ(classify(1.0), TrustClass::Trusted);
  EXPECT_THROW(classify(-0.01), ValidationError);
  EXPECT_THROW(classify(1.01), ValidationError);
  EXPECT_THROW(classify(std::nan("")), ValidationError);
}

TEST(ReplicationFactor, LinearBetweenLimits) {
  const ReplicationLimits l;
  EXPECT_DOUBLE_EQ(raw_replication_factor(1.0, l), 1.5);
  EXPECT_DOUBLE_EQ(raw_replication_factor(0.0, l), 5.0);
  EXPECT_DOUBLE_EQ(raw_replication_factor(0.5, l), 3.25);
  EXPECT_THROW(raw_replication_factor(1.2, l), ValidationError);
  EXPECT_THROW(raw_replication_factor(0.5, ReplicationLimits{0.5, 2}), ValidationError);
  EXPECT_THROW(raw_replication_factor(0.5, ReplicationLimits{3, 2}), ValidationError);
}

TEST(Roulette, IntegersAreExact) {
  Rng rng = make_stream(1, "roulette");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(roulette_round(3.0, rng), 3);
  EXPECT_THROW(roulette_round(-0.5, rng), ValidationError);
}

TEST(Roulette, RoundsToNeighboursWithFractionalOdds) {
  Rng rng = make_stream(2, "roulette");
  const int n = 200000;
  int ceil_count = 0;
  for (int i = 0; i < n; ++i) {
    const int k = roulette_round(2.3, rng);
    ASSERT_TRUE(k == 2 || k == 3);
    ceil_count += k == 3;
  }
  // Binomial(n, 0.3): five standard deviations is about 0.0051.
  EXPECT_NEAR(static_cast<double>(ceil_count) / n, 0.3, 0.0052);
}

TEST(Roulette, EffectiveFMinFollowsReputation) {
  Rng rng = make_stream(4, "roulette");
  ReputationProfile trusted(AgentId{1});
  for (int i = 0; i < 10; ++i) trusted.record(make_rating(AgentId{0}, AgentId{1}, RatingCause::CorrectOnTime, i));
  for (int i = 0; i < 1000; ++i) {
    const int f = effective_f_min(trusted, ReplicationLimits{}, rng);
    ASSERT_TRUE(f == 1 || f == 2);
  }
}
