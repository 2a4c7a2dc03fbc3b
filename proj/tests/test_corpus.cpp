#include <gtest/gtest.h>

#include <map>

#include "test_support.hpp"
#include "topicdet/corpus.hpp"

using namespace topicdet;
using topicdet::fixtures::make_doc;

TEST(TopicId, ParseAndRender) {
    const auto t = TopicId::parse("Health Policy_1");
    EXPECT_EQ(t.name, "Health Policy");
    EXPECT_EQ(t.perspective, 1);
    EXPECT_EQ(t.str(), "Health Policy_1");
    EXPECT_EQ(TopicId::parse("Department of Health_2").perspective, 2);
    EXPECT_EQ(TopicId::parse("a_b_3").name, "a_b");
}

TEST(TopicId, RejectsMalformed) {
    EXPECT_THROW(TopicId::parse("Health"), ParseError);
    EXPECT_THROW(TopicId::parse("Health_0"), ParseError);
    EXPECT_THROW(TopicId::parse("Health_x"), ParseError);
    EXPECT_THROW(TopicId::parse("_1"), ParseError);
    EXPECT_THROW(TopicId::parse("Health_"), ParseError);
}

TEST(TopicId, OrderingByNameThenPerspective) {
    EXPECT_LT(TopicId::parse("A_2"), TopicId::parse("B_1"));
    EXPECT_LT(TopicId::parse("A_1"), TopicId::parse("A_2"));
}

TEST(Corpus, WriteReadRoundTrip) {
    Corpus c;
    auto d1 = make_doc("d1", "Primer texto con ñ", {"A_1", "B_2"});
    d1.session = "2021-07";
    d1.extra["source"] = "congreso";
    c.add(d1);
    c.add(make_doc("d2", "Segundo \"citado\"\ttab"));
    c.add(make_doc("d3", "Tercero", {"A_1"}));
    const auto text = serialize_corpus(c);
    const auto back = parse_corpus(text);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].id, c[i].id);
        EXPECT_EQ(back[i].text, c[i].text);
        EXPECT_EQ(back[i].labels, c[i].labels);
        EXPECT_EQ(back[i].session, c[i].session);
    }
    EXPECT_EQ(back[0].extra["source"], "congreso");
    EXPECT_EQ(serialize_corpus(back), text);
}

TEST(Corpus, MissingIdIsParseErrorWithLine) {
    const std::string text = "{\"id\":\"a\",\"text\":\"x\",\"labels\":[]}\n{\"text\":\"y\",\"labels\":[]}\n";
    try {
        parse_corpus(text);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(Corpus, MalformedJsonIsParseError) {
    EXPECT_THROW(parse_corpus("{not json}\n"), ParseError);
    EXPECT_THROW(parse_corpus("{\"id\":\"a\",\"text\":\"x\",\"labels\":[\"nolabel\"]}\n"), ParseError);
}

TEST(Corpus, DuplicateIdIsIntegrityError) {
    const std::string text =
        "{\"id\":\"doc1\",\"text\":\"x\",\"labels\":[]}\n{\"id\":\"doc1\",\"text\":\"y\",\"labels\":[]}\n";
    EXPECT_THROW(parse_corpus(text), IntegrityError);
    Corpus c;
    c.add(make_doc("doc1", "x"));
    EXPECT_THROW(c.add(make_doc("doc1", "y")), IntegrityError);
}

TEST(Corpus, TopicIndexMatchesRecount) {
    Rng rng(5);
    std::vector<std::string> names = {"A_1", "B_1", "C_2", "D_1"};
    Corpus c;
    for (int i = 0; i < 300; ++i) {
        std::vector<std::string> labels;
        for (const auto& n : names) {
            if (uniform_index(rng, 3) == 0) labels.push_back(n);
        }
        c.add(make_doc("d" + std::to_string(i), "t", labels));
    }
    std::size_t labeled = 0, total = 0;
    for (const auto& n : names) {
        const auto t = TopicId::parse(n);
        std::size_t recount = 0;
        for (const auto& d : c) recount += d.has_label(t);
        EXPECT_EQ(c.topic_count(t), recount);
        total += recount;
    }
    for (const auto& d : c) labeled += !d.labels.empty();
    EXPECT_GE(total, labeled);
}

TEST(Corpus, StatsSortedWithTieBreak) {
    Corpus c;
    c.add(make_doc("1", "x", {"A_1"}));
    c.add(make_doc("2", "x", {"A_1", "B_1"}));
    auto stats = corpus_stats(c, 30);
    ASSERT_EQ(stats.size(), 2u);
    EXPECT_EQ(stats[0], std::make_pair(TopicId::parse("A_1"), std::size_t{2}));
    EXPECT_EQ(stats[1], std::make_pair(TopicId::parse("B_1"), std::size_t{1}));

    Corpus tie;
    tie.add(make_doc("1", "x", {"B_1", "A_1"}));
    tie.add(make_doc("2", "x", {"B_1", "A_1"}));
    stats = corpus_stats(tie, 30);
    EXPECT_EQ(stats[0].first.str(), "A_1");
    EXPECT_EQ(corpus_stats(tie, 1).size(), 1u);
    EXPECT_TRUE(corpus_stats(Corpus{}, 5).empty());
}

TEST(Corpus, FileRoundTrip) {
    fixtures::TempDir dir("corpus");
    Corpus c;
    c.add(make_doc("x", "hola", {"A_1"}));
    write_corpus(dir.file("c.jsonl"), c);
    const auto back = read_corpus(dir.file("c.jsonl"));
    EXPECT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].text, "hola");
}

TEST(Corpus, BlankLinesSkipped) {
    const auto c = parse_corpus("\n{\"id\":\"a\",\"text\":\"x\",\"labels\":[]}\n\n");
    EXPECT_EQ(c.size(), 1u);
}
