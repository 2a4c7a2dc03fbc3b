#pragma once

// Random corpora for curation property checks.

#include <string>
#include <vector>

#include "topicdet/curation.hpp"

namespace topicdet::fixtures {

inline CurationConfig fuzz_config() {
    CurationConfig cfg;
    cfg.coofficial_words = {"perquè", "també", "eta", "baina"};
    cfg.id_patterns = {R"(\d{3}/\d{6})"};
    cfg.top_topics = 4;
    return cfg;
}

inline Corpus fuzz_corpus(std::uint64_t seed) {
    static const std::vector<std::string> pieces = {
        "Pregunta", "sobre",  "la",     "vacuna", "  ",    "\n",   "\t",   "https://ex.com/a?b",
        "www.x.es", "184/012345", "núm.", "CSV",  "perquè", "també", "eta", "¿Qué?",
        "¡Ya!",     "(sí)",   "5€",     "\"",     "ñandú", "Ñ",    "é",    "a_b;",
        "-",        ",",      ":",      "ÁRBOL",  "\xC2\xA0", "x",  "\xFF", "Niño",
        "123",      "/",      "184",    "012345", "ley",    "E",  "\xCC\x81", "data"};
    Rng rng(seed * 7919 + 1);
    std::vector<Document> docs;
    const auto n = 1 + uniform_index(rng, 30);
    std::vector<std::string> texts;
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string text;
        if (!texts.empty() && uniform_index(rng, 6) == 0) {
            text = texts[uniform_index(rng, texts.size())];
            if (uniform_index(rng, 2) == 0) text += "  ";
        } else if (uniform_index(rng, 2) == 0) {
            // Mostly plausible text so plenty of documents survive; noise pieces still appear.
            static const std::vector<std::string> words = {"Pregunta", "sobre", "la",  "vacuna", "ley",
                                                           "Niño",     "ñandú", "data", "(sí)",   "¿Qué?"};
            text = uniform_index(rng, 2) ? "Pregunta" : "ÁRBOL";
            const auto len = 20 + uniform_index(rng, 40);
            for (std::uint64_t k = 0; k < len; ++k) {
                text += " ";
                text += uniform_index(rng, 8) == 0 ? pieces[uniform_index(rng, pieces.size())]
                                                   : words[uniform_index(rng, words.size())];
            }
        } else {
            const auto len = uniform_index(rng, 60);
            for (std::uint64_t k = 0; k < len; ++k) {
                text += pieces[uniform_index(rng, pieces.size())];
                if (uniform_index(rng, 3) != 0) text += " ";
            }
        }
        texts.push_back(text);
        Document d;
        d.id = "d" + std::to_string(i);
        d.text = text;
        const auto labels = uniform_index(rng, 4);
        for (std::uint64_t l = 0; l < labels; ++l) {
            d.labels.insert(TopicId{"T" + std::to_string(uniform_index(rng, 5)), 1});
        }
        docs.push_back(std::move(d));
    }
    return Corpus(std::move(docs));
}

// Empty string when every property holds, else a description.
inline std::string check_curation(const Corpus& input, const Corpus& once, const CurationReport& report,
                                  const CurationConfig& cfg) {
    if (report.input_count != input.size()) return "input_count mismatch";
    if (report.input_count != report.kept_count + report.dropped_total()) return "report is not a partition";
    if (report.kept_count != once.size()) return "kept_count mismatch";
    for (const auto& d : once) {
        const auto cps = unicode::decode(d.text);
        if (cps.size() < cfg.min_chars) return "kept text too short: " + d.text;
        if (d.labels.empty()) return "kept unlabeled document";
        if (unicode::is_lower(cps.front())) return "kept lowercase start: " + d.text;
        if (d.text != trim(d.text)) return "untrimmed text";
        if (d.text.find("  ") != std::string::npos) return "uncollapsed whitespace";
        for (char32_t c : cps) {
            const bool ok = unicode::is_letter(c) || unicode::is_digit(c) || unicode::is_combining_mark(c) ||
                            c == U' ' || cfg.keep_punct.find(c) != std::u32string::npos;
            if (!ok) return "disallowed character in: " + d.text;
        }
        if (d.text.find("http") != std::string::npos && d.text.find("://") != std::string::npos) return "url kept";
    }
    if (cfg.top_topics > 0 && once.topic_index().size() > cfg.top_topics) return "more topics than top_topics";
    const auto [twice, report2] = curate(once, cfg);
    if (report2.dropped_total() != 0) return "second pass dropped documents";
    if (serialize_corpus(twice) != serialize_corpus(once)) return "second pass changed the corpus";
    return {};
}

}  // namespace topicdet::fixtures
