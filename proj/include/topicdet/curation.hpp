#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "topicdet/corpus.hpp"
#include "topicdet/errors.hpp"
#include "topicdet/unicode.hpp"

namespace topicdet {

struct CurationConfig {
    std::size_t min_chars = 100;
    std::vector<std::string> bad_prefixes = {"CSV", "núm"};
    std::set<std::string> coofficial_words;
    std::size_t coofficial_min_hits = 2;
    std::u32string keep_punct = U"()-.¿?¡!_;";
    std::vector<std::string> id_patterns;
    /// When non-zero, keep only the N most frequent topics of the surviving
    /// documents; documents left without labels are dropped.
    std::size_t top_topics = 0;

    void validate() const {
        if (coofficial_min_hits < 1) throw ValidationError("coofficial_min_hits must be >= 1");
        for (const auto& p : id_patterns) {
            try {
                std::regex re(p);
            } catch (const std::regex_error& e) {
                throw ValidationError("invalid id pattern '" + p + "': " + e.what());
            }
        }
    }
};

enum class DropRule {
    unlabeled,
    duplicate,
    too_short,
    lowercase_start,
    bad_prefix,
    coofficial_language,
    outside_top_topics,
};

inline constexpr std::array<DropRule, 7> all_drop_rules = {
    DropRule::unlabeled,       DropRule::duplicate,  DropRule::too_short,           DropRule::lowercase_start,
    DropRule::bad_prefix,      DropRule::coofficial_language, DropRule::outside_top_topics,
};

inline std::string_view to_string(DropRule r) {
    switch (r) {
        case DropRule::unlabeled: return "unlabeled";
        case DropRule::duplicate: return "duplicate";
        case DropRule::too_short: return "too_short";
        case DropRule::lowercase_start: return "lowercase_start";
        case DropRule::bad_prefix: return "bad_prefix";
        case DropRule::coofficial_language: return "coofficial_language";
        case DropRule::outside_top_topics: return "outside_top_topics";
    }
    return "unknown";
}

/// std::nullopt means keep.
using DropDecision = std::optional<DropRule>;

struct CurationReport {
    std::size_t input_count = 0;
    std::size_t kept_count = 0;
    std::map<DropRule, std::size_t> drops;
    /// topic → (documents before curation, documents after)
    std::map<TopicId, std::pair<std::size_t, std::size_t>> topic_counts;

    std::size_t dropped_total() const {
        std::size_t n = 0;
        for (const auto& [rule, count] : drops) n += count;
        return n;
    }
};

/// Text cleaner with the configured identifier patterns compiled once.
class TextNormalizer {
public:
    explicit TextNormalizer(const CurationConfig& config)
        : keep_punct_(config.keep_punct),
          url_(R"((?:https?|ftp)://\S+|www\.\S+)", std::regex::ECMAScript | std::regex::icase) {
        for (const auto& p : config.id_patterns) id_patterns_.emplace_back(p);
    }

    std::string operator()(std::string_view text) const {
        std::string current(text);
        // Whitespace collapsing can create new id-pattern matches, so repeat
        // until nothing changes. No pass lengthens the text.
        for (int pass = 0; pass < 64; ++pass) {
            auto next = single_pass(current);
            if (next == current) break;
            current = std::move(next);
        }
        return current;
    }

private:
    std::string single_pass(const std::string& text) const {
        std::string s = std::regex_replace(text, url_, " ");
        for (const auto& re : id_patterns_) s = std::regex_replace(s, re, " ");

        std::string out;
        out.reserve(s.size());
        bool pending_space = false;
        std::size_t pos = 0;
        while (pos < s.size()) {
            const char32_t c = unicode::decode_next(s, pos);
            const bool keep = unicode::is_letter(c) || unicode::is_digit(c) || unicode::is_combining_mark(c) ||
                              keep_punct_.find(c) != std::u32string::npos;
            if (!keep) {
                pending_space = !out.empty();
                continue;
            }
            if (pending_space) {
                out.push_back(' ');
                pending_space = false;
            }
            unicode::append_utf8(out, c);
        }
        return out;
    }

    std::u32string keep_punct_;
    std::regex url_;
    std::vector<std::regex> id_patterns_;
};

/// Removes URLs and identifier-pattern matches, replaces characters outside
/// letters/digits/keep_punct with spaces, collapses whitespace and trims.
inline std::string normalize_text(std::string_view text, const CurationConfig& config) {
    return TextNormalizer(config)(text);
}

namespace detail {

inline std::set<std::string> lowercase_words(std::string_view text) {
    std::set<std::string> words;
    std::string word;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const char32_t c = pos < text.size() ? unicode::decode_next(text, pos) : (++pos, U' ');
        if (unicode::is_word_char(c)) {
            unicode::append_utf8(word, unicode::to_lower(c));
        } else if (!word.empty()) {
            words.insert(std::move(word));
            word.clear();
        }
    }
    return words;
}

}  // namespace detail

/// Rule cascade for a normalized document; the first rule that fires wins.
inline DropDecision should_drop(const Document& doc, const std::unordered_set<std::string>& seen_texts,
                                const CurationConfig& config) {
    const std::string& text = doc.text;
    if (seen_texts.contains(text)) return DropRule::duplicate;
    if (unicode::length(text) < config.min_chars) return DropRule::too_short;
    if (!text.empty()) {
        std::size_t pos = 0;
        if (unicode::is_lower(unicode::decode_next(text, pos))) return DropRule::lowercase_start;
    }
    for (const auto& prefix : config.bad_prefixes) {
        if (!prefix.empty() && text.starts_with(prefix)) return DropRule::bad_prefix;
    }
    if (!config.coofficial_words.empty()) {
        std::size_t hits = 0;
        for (const auto& w : detail::lowercase_words(text)) {
            if (config.coofficial_words.contains(w) && ++hits >= config.coofficial_min_hits) {
                return DropRule::coofficial_language;
            }
        }
    }
    return std::nullopt;
}

/// Cleans a corpus: keeps labeled documents that pass every rule, with
/// normalized text. The first occurrence of a duplicated text survives.
inline std::pair<Corpus, CurationReport> curate(const Corpus& corpus, const CurationConfig& config) {
    config.validate();
    // Word lists are matched case-insensitively.
    CurationConfig cfg = config;
    cfg.coofficial_words.clear();
    for (const auto& w : config.coofficial_words) cfg.coofficial_words.insert(unicode::to_lower(w));

    CurationReport report;
    report.input_count = corpus.size();
    for (auto r : all_drop_rules) report.drops[r] = 0;
    for (const auto& [topic, count] : corpus.topic_index()) report.topic_counts[topic] = {count, 0};

    const TextNormalizer normalize(cfg);
    std::unordered_set<std::string> seen;
    std::vector<Document> kept;
    for (const auto& doc : corpus) {
        if (doc.labels.empty()) {
            ++report.drops[DropRule::unlabeled];
            continue;
        }
        Document d = doc;
        d.text = normalize(doc.text);
        const auto decision = should_drop(d, seen, cfg);
        seen.insert(d.text);
        if (decision) {
            ++report.drops[*decision];
            continue;
        }
        kept.push_back(std::move(d));
    }

    if (cfg.top_topics > 0) {
        std::map<TopicId, std::size_t> counts;
        for (const auto& d : kept) {
            for (const auto& t : d.labels) ++counts[t];
        }
        std::vector<std::pair<TopicId, std::size_t>> ranked(counts.begin(), counts.end());
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        TopicSet allowed;
        for (std::size_t i = 0; i < ranked.size() && i < cfg.top_topics; ++i) allowed.insert(ranked[i].first);
        std::vector<Document> filtered;
        for (auto& d : kept) {
            std::erase_if(d.labels, [&](const TopicId& t) { return !allowed.contains(t); });
            if (d.labels.empty()) {
                ++report.drops[DropRule::outside_top_topics];
            } else {
                filtered.push_back(std::move(d));
            }
        }
        kept = std::move(filtered);
    }

    Corpus out(std::move(kept));
    report.kept_count = out.size();
    for (const auto& [topic, count] : out.topic_index()) report.topic_counts[topic].second = count;
    return {std::move(out), std::move(report)};
}

/// One record per rule, one per topic, then a summary record.
inline std::string serialize_report(const CurationReport& report) {
    std::string out;
    for (const auto& [rule, count] : report.drops) {
        ordered_json j;
        j["rule"] = to_string(rule);
        j["dropped"] = count;
        out += j.dump() + "\n";
    }
    for (const auto& [topic, counts] : report.topic_counts) {
        ordered_json j;
        j["topic"] = topic.str();
        j["before"] = counts.first;
        j["after"] = counts.second;
        out += j.dump() + "\n";
    }
    ordered_json summary;
    summary["summary"] = true;
    summary["input"] = report.input_count;
    summary["kept"] = report.kept_count;
    summary["dropped"] = report.dropped_total();
    out += summary.dump() + "\n";
    return out;
}

}  // namespace topicdet
