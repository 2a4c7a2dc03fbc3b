#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "topicdet/evaluation.hpp"

using namespace topicdet;
using topicdet::fixtures::make_doc;

namespace {

struct AlwaysPositive {};
double predict_score(const AlwaysPositive&, std::span<const double>) { return 1.0; }

Corpus sized_corpus(std::size_t n, const std::vector<std::pair<std::string, std::size_t>>& topics) {
    std::vector<Document> docs(n);
    for (std::size_t i = 0; i < n; ++i) docs[i].id = "d" + std::to_string(i);
    std::size_t offset = 0;
    for (const auto& [name, count] : topics) {
        for (std::size_t j = 0; j < count; ++j) docs[(offset + j * 7) % n].labels.insert(TopicId::parse(name));
        offset += 13;
    }
    return Corpus(std::move(docs));
}

EmbeddingStore store_for(const Corpus& c) { return embed_corpus(c, HashedProvider(64, 0)); }

}  // namespace

TEST(Folds, TenDocsOnePositiveOneNegativePerFold) {
    Corpus c;
    for (int i = 0; i < 10; ++i) c.add(make_doc("d" + std::to_string(i), "x", i < 5 ? std::vector<std::string>{"A_1"} : std::vector<std::string>{}));
    const auto plan = make_folds(c, TopicId::parse("A_1"), 5, 1);
    for (std::size_t f = 0; f < 5; ++f) {
        const auto m = plan.members(f);
        ASSERT_EQ(m.size(), 2u);
        std::size_t pos = 0;
        for (auto i : m) pos += c[i].has_label(TopicId::parse("A_1"));
        EXPECT_EQ(pos, 1u);
    }
}

TEST(Folds, PaperScaleStratification) {
    const auto c = sized_corpus(33147, {{"Department of Health_2", 518}, {"Health Policy_1", 997},
                                        {"Healthcare Situation_1", 13561}});
    for (const auto& [topic, count] : c.topic_index()) {
        const auto plan = make_folds(c, topic, 5, 42);
        std::vector<std::size_t> pos(5, 0), size(5, 0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            ASSERT_LT(plan.assignment[i], 5u);
            ++size[plan.assignment[i]];
            pos[plan.assignment[i]] += c[i].has_label(topic);
        }
        const auto [lo, hi] = std::minmax_element(pos.begin(), pos.end());
        EXPECT_LE(*hi - *lo, 1u) << topic.str();
        const auto [slo, shi] = std::minmax_element(size.begin(), size.end());
        EXPECT_LE(*shi - *slo, 1u) << topic.str();
        std::size_t total = 0;
        for (std::size_t f = 0; f < 5; ++f) total += plan.members(f).size();
        EXPECT_EQ(total, c.size());
        if (count == 518) {
            for (auto p : pos) EXPECT_TRUE(p == 103 || p == 104) << p;
        }
    }
}

TEST(Folds, DeterministicAndSeedSensitive) {
    const auto c = sized_corpus(500, {{"A_1", 60}});
    const auto t = TopicId::parse("A_1");
    EXPECT_EQ(make_folds(c, t, 5, 3).assignment, make_folds(c, t, 5, 3).assignment);
    EXPECT_NE(make_folds(c, t, 5, 3).assignment, make_folds(c, t, 5, 4).assignment);
}

TEST(Folds, InsufficientCountsNameTopic) {
    const auto c = sized_corpus(50, {{"Rare_1", 3}});
    try {
        make_folds(c, TopicId::parse("Rare_1"), 5, 0);
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_NE(std::string(e.what()).find("Rare_1"), std::string::npos);
    }
    EXPECT_THROW(make_folds(c, TopicId::parse("Rare_1"), 1, 0), EvaluationError);
}

TEST(Rates, Formula) {
    const auto r = rates({3, 1, 8, 2});
    EXPECT_DOUBLE_EQ(r.tpr, 0.75);
    EXPECT_DOUBLE_EQ(r.tnr, 0.80);
    const auto p = rates({5, 0, 7, 0});
    EXPECT_EQ(p.tpr, 1.0);
    EXPECT_EQ(p.tnr, 1.0);
    EXPECT_THROW(rates({3, 1, 0, 0}), EvaluationError);
    EXPECT_THROW(rates({0, 0, 3, 1}), EvaluationError);
}

TEST(Summary, PopulationStdAndRecomputation) {
    MetricsSummary s;
    for (int i = 0; i < 5; ++i) s.add_fold({4, 1, 9, 1});
    EXPECT_NEAR(s.tpr_mean, 0.8, 1e-15);
    EXPECT_EQ(s.tpr_std, 0.0);
    EXPECT_EQ(format_cell(s.tpr_mean, s.tpr_std), ".80 (.00)");

    const std::vector<double> xs = {0.5, 1.0};
    EXPECT_DOUBLE_EQ(stddev(xs), 0.25);
    MetricsSummary m;
    Rng rng(1);
    for (int f = 0; f < 5; ++f) {
        m.add_fold({1 + uniform_index(rng, 9), uniform_index(rng, 5), 1 + uniform_index(rng, 30), uniform_index(rng, 9)});
    }
    EXPECT_NEAR(m.tpr_mean, mean(m.tpr), 1e-12);
    EXPECT_NEAR(m.tnr_std, stddev(m.tnr), 1e-12);
    double ss = 0;
    for (double v : m.tpr) ss += (v - m.tpr_mean) * (v - m.tpr_mean);
    EXPECT_NEAR(m.tpr_std, std::sqrt(ss / 5.0), 1e-12);
}

TEST(Format, CellsInPartsPerUnit) {
    EXPECT_EQ(format_cell(0.87, 0.09), ".87 (.09)");
    EXPECT_EQ(format_cell(1.0, 0.0), "1.00 (.00)");
    EXPECT_EQ(format_ppu(0.975), ".98");
    EXPECT_EQ(format_ppu(0.125), ".13");
    EXPECT_EQ(format_ppu(0.0), ".00");
    EXPECT_EQ(format_ppu(0.994), ".99");
    EXPECT_EQ(format_ppu(0.995), "1.00");
}

TEST(Evaluate, AlwaysPositiveDetector) {
    const auto c = sized_corpus(100, {{"A_1", 30}});
    const auto t = TopicId::parse("A_1");
    const auto store = store_for(c);
    const auto plan = make_folds(c, t, 5, 0);
    const auto s = evaluate_topic(c, t, store, plan, [](const LabeledSet&, std::size_t) { return AlwaysPositive{}; });
    EXPECT_EQ(s.tpr_mean, 1.0);
    EXPECT_EQ(s.tnr_mean, 0.0);
    EXPECT_EQ(s.counts.size(), 5u);
    const std::map<TopicId, MetricsSummary> summaries = {{t, s}};
    const auto table = render_table(summaries, TableLayout::by_backbone);
    EXPECT_NE(table.find("1.00 (.00)"), std::string::npos);
    EXPECT_NE(table.find(".00 (.00)"), std::string::npos);
}

TEST(Evaluate, TrainerErrorsCarryFoldIndex) {
    const auto c = sized_corpus(100, {{"A_1", 30}});
    const auto t = TopicId::parse("A_1");
    const auto plan = make_folds(c, t, 5, 0);
    try {
        evaluate_topic(c, t, store_for(c), plan, [](const LabeledSet&, std::size_t fold) -> AlwaysPositive {
            if (fold == 2) throw TrainingError("boom");
            return {};
        });
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("fold 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("A_1"), std::string::npos) << msg;
    }
}

TEST(Evaluate, MemorisedBeatsPermutedLabels) {
    auto planted = fixtures::planted_corpus(60, 2, 5);
    const auto topic = planted.topics[0];
    std::vector<Document> docs;
    for (const auto& d : planted.corpus) docs.push_back(d);
    for (const auto& d : planted.corpus) {
        auto copy = d;
        copy.id += "_copy";
        docs.push_back(copy);
    }
    const Corpus doubled(docs);
    FoldPlan plan{topic, 2, 0, std::vector<std::size_t>(doubled.size())};
    for (std::size_t i = 0; i < doubled.size(); ++i) plan.assignment[i] = i < planted.corpus.size() ? 0 : 1;
    const auto store = embed_corpus(doubled, HashedProvider(128, 0));
    DetectorConfig cfg;
    const auto real = evaluate_topic(doubled, topic, store, cfg, plan, 0);

    // Same texts with labels moved around between documents.
    std::vector<Document> permuted = docs;
    Rng rng(3);
    std::vector<TopicSet> labels;
    for (const auto& d : docs) labels.push_back(d.labels);
    shuffle(labels, rng);
    for (std::size_t i = 0; i < permuted.size(); ++i) permuted[i].labels = labels[i];
    const Corpus shuffled(permuted);
    const auto noise = evaluate_topic(shuffled, topic, store, cfg, plan, 0);
    EXPECT_GE(real.tpr_mean + real.tnr_mean, noise.tpr_mean + noise.tnr_mean);
    EXPECT_EQ(real.tpr_mean, 1.0);
    EXPECT_EQ(real.tnr_mean, 1.0);
}

TEST(Table, RowsInTopicOrderAndLayouts) {
    MetricsSummary s;
    s.add_fold({87, 13, 91, 9});
    ResultColumn col{"roberta-base", "svm", {{TopicId::parse("B_1"), s}, {TopicId::parse("A_2"), s}}};
    const auto by_backbone = render_table(std::span<const ResultColumn>(&col, 1), TableLayout::by_backbone);
    EXPECT_LT(by_backbone.find("A_2"), by_backbone.find("B_1"));
    EXPECT_NE(by_backbone.find(".87 (.00)"), std::string::npos);
    EXPECT_NE(by_backbone.find("roberta-base"), std::string::npos);
    const auto by_classifier = render_table(std::span<const ResultColumn>(&col, 1), TableLayout::by_classifier);
    EXPECT_NE(by_classifier.find("roberta-base + SVM"), std::string::npos);
    EXPECT_EQ(parse_layout("by-classifier"), TableLayout::by_classifier);
    EXPECT_THROW(parse_layout("wide"), ValidationError);
}

TEST(Table, FoldRecordsRoundTrip) {
    MetricsSummary s;
    s.add_fold({3, 1, 8, 2});
    s.add_fold({4, 0, 9, 1});
    ResultColumn col{"hashed-bow-seed0", "nn", {{TopicId::parse("Health Policy_1"), s}}};
    const auto text = serialize_fold_records(col);
    const auto cols = parse_fold_records(text);
    ASSERT_EQ(cols.size(), 1u);
    EXPECT_EQ(cols[0].backbone, col.backbone);
    EXPECT_EQ(cols[0].head, "nn");
    EXPECT_EQ(serialize_fold_records(cols[0]), text);
    EXPECT_EQ(render_table(cols, TableLayout::by_backbone),
              render_table(std::span<const ResultColumn>(&col, 1), TableLayout::by_backbone));
    EXPECT_THROW(parse_fold_records("{\"backbone\":1}\n"), ParseError);
}
