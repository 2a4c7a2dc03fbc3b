#include <gtest/gtest.h>

#include "topicdet/aggregation.hpp"

using namespace topicdet;

namespace {

TopicScoreSet scores(std::initializer_list<std::pair<const char*, double>> items) {
    TopicScoreSet s{"doc", {}};
    for (const auto& [name, v] : items) s.scores[TopicId::parse(name)] = v;
    return s;
}

std::vector<std::string> names(const AggregatedPrediction& p) {
    std::vector<std::string> out;
    for (const auto& [t, s] : p.topics) out.push_back(t.str());
    return out;
}

}  // namespace

TEST(Aggregate, Threshold) {
    const auto r = aggregate(scores({{"A_1", 0.9}, {"B_1", 0.3}}), ThresholdPolicy{0.5});
    EXPECT_EQ(names(r), std::vector<std::string>{"A_1"});
    EXPECT_EQ(r.topics[0].second, 0.9);
}

TEST(Aggregate, ThresholdZeroKeepsAllAndClosedInterval) {
    const auto s = scores({{"A_1", 0.9}, {"B_1", 0.3}, {"C_1", 0.0}});
    EXPECT_EQ(aggregate(s, ThresholdPolicy{0.0}).topics.size(), 3u);
    EXPECT_EQ(aggregate(s, ThresholdPolicy{0.9}).topics.size(), 1u);
    EXPECT_EQ(aggregate(scores({{"A_1", 1.0}}), ThresholdPolicy{1.0}).topics.size(), 1u);
}

TEST(Aggregate, TopKTieBreak) {
    const auto r = aggregate(scores({{"B_1", 0.7}, {"A_1", 0.7}}), TopKPolicy{1});
    EXPECT_EQ(names(r), std::vector<std::string>{"A_1"});
    EXPECT_FALSE(r.truncated);
}

TEST(Aggregate, TopKLargerThanScoresIsFlagged) {
    const auto r = aggregate(scores({{"A_1", 0.2}, {"B_1", 0.7}}), TopKPolicy{3});
    EXPECT_EQ(names(r), (std::vector<std::string>{"B_1", "A_1"}));
    EXPECT_TRUE(r.truncated);
}

TEST(Aggregate, ThresholdMonotone) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        TopicScoreSet s{"d", {}};
        for (int t = 0; t < 10; ++t) s.scores[TopicId{"T" + std::to_string(t), 1}] = uniform_real(rng);
        std::size_t prev = 11;
        for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
            const auto n = aggregate(s, ThresholdPolicy{tau}).topics.size();
            EXPECT_LE(n, prev);
            prev = n;
        }
    }
}

TEST(Aggregate, SortedDescending) {
    const auto r = aggregate(scores({{"A_1", 0.6}, {"B_1", 0.95}, {"C_2", 0.6}, {"D_1", 0.8}}), ThresholdPolicy{0.5});
    EXPECT_EQ(names(r), (std::vector<std::string>{"B_1", "D_1", "A_1", "C_2"}));
}

TEST(Aggregate, InvalidScores) {
    EXPECT_THROW(aggregate(scores({{"A_1", 1.5}}), ThresholdPolicy{}), InputError);
    EXPECT_THROW(aggregate(scores({{"A_1", NAN}}), ThresholdPolicy{}), InputError);
}

TEST(Policy, Parse) {
    EXPECT_EQ(std::get<ThresholdPolicy>(parse_policy("threshold:0.5")).tau, 0.5);
    EXPECT_EQ(std::get<ThresholdPolicy>(parse_policy("threshold")).tau, 0.5);
    EXPECT_EQ(std::get<TopKPolicy>(parse_policy("topk:3")).k, 3u);
    EXPECT_EQ(to_string(parse_policy("topk:3")), "topk:3");
    EXPECT_EQ(to_string(parse_policy("threshold:0.25")), "threshold:0.25");
    EXPECT_THROW(parse_policy("topk:0"), ValidationError);
    EXPECT_THROW(parse_policy("topk"), ValidationError);
    EXPECT_THROW(parse_policy("threshold:2"), ValidationError);
    EXPECT_THROW(parse_policy("median"), ValidationError);
}
