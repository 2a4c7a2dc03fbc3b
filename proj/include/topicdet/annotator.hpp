#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicdet/corpus.hpp"
#include "topicdet/errors.hpp"
#include "topicdet/unicode.hpp"
#include "topicdet/util.hpp"

namespace topicdet {

enum class FoldMode { fold, exact };

inline FoldMode parse_fold_mode(std::string_view s) {
    if (s == "fold") return FoldMode::fold;
    if (s == "exact") return FoldMode::exact;
    throw ValidationError("fold mode must be 'fold' or 'exact', got '" + std::string(s) + "'");
}

inline std::string_view to_string(FoldMode m) { return m == FoldMode::fold ? "fold" : "exact"; }

/// Expert keyword lists. Patterns are literal words or phrases.
struct TopicRuleSet {
    std::map<TopicId, std::vector<std::string>> rules;
    FoldMode case_mode = FoldMode::fold;
    FoldMode accent_mode = FoldMode::exact;

    void validate() const {
        for (const auto& [topic, patterns] : rules) {
            if (patterns.empty()) throw ValidationError("topic '" + topic.str() + "' has no patterns");
            for (const auto& p : patterns) {
                if (trim(p).empty()) throw ValidationError("topic '" + topic.str() + "' has an empty pattern");
            }
        }
    }
};

namespace detail {

// Case/accent folding plus whitespace-run collapsing. Both texts and patterns
// go through this before matching.
inline std::u32string fold_for_matching(std::string_view text, FoldMode case_mode, FoldMode accent_mode) {
    std::u32string out;
    out.reserve(text.size());
    bool pending_space = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t c = unicode::decode_next(text, pos);
        if (unicode::is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (accent_mode == FoldMode::fold) {
            c = unicode::strip_accent(c);
            if (c == 0) continue;
        }
        if (case_mode == FoldMode::fold) c = unicode::to_lower(c);
        if (pending_space) {
            out.push_back(U' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace detail

/// Aho-Corasick automaton over all patterns of a rule set. Immutable once
/// built; annotate() may be called concurrently.
class CompiledMatcher {
public:
    explicit CompiledMatcher(const TopicRuleSet& rules)
        : case_mode_(rules.case_mode), accent_mode_(rules.accent_mode) {
        rules.validate();
        nodes_.emplace_back();
        for (const auto& [topic, patterns] : rules.rules) {
            const auto topic_idx = topics_.size();
            topics_.push_back(topic);
            for (const auto& p : patterns) {
                auto folded = detail::fold_for_matching(p, case_mode_, accent_mode_);
                if (folded.empty()) throw ValidationError("topic '" + topic.str() + "' has a pattern that folds to nothing");
                add_pattern(folded, topic_idx);
            }
        }
        build_links();
    }

    FoldMode case_mode() const noexcept { return case_mode_; }
    FoldMode accent_mode() const noexcept { return accent_mode_; }
    const std::vector<TopicId>& topics() const noexcept { return topics_; }

    /// Topics with at least one pattern occurrence delimited by word boundaries.
    TopicSet annotate(std::string_view text) const {
        const auto folded = detail::fold_for_matching(text, case_mode_, accent_mode_);
        std::vector<bool> hit(topics_.size(), false);
        int state = 0;
        for (std::size_t i = 0; i < folded.size(); ++i) {
            state = step(state, folded[i]);
            for (int s = state; s > 0; s = nodes_[s].dict_link) {
                for (const auto& out : nodes_[s].outputs) {
                    if (hit[out.topic]) continue;
                    const std::size_t begin = i + 1 - out.length;
                    if (out.word_start && begin > 0 && unicode::is_word_char(folded[begin - 1])) continue;
                    if (out.word_end && i + 1 < folded.size() && unicode::is_word_char(folded[i + 1])) continue;
                    hit[out.topic] = true;
                }
            }
        }
        TopicSet result;
        for (std::size_t t = 0; t < topics_.size(); ++t) {
            if (hit[t]) result.insert(topics_[t]);
        }
        return result;
    }

private:
    struct Output {
        std::size_t topic;
        std::size_t length;
        bool word_start;  // boundary required before the match
        bool word_end;    // boundary required after the match
    };

    struct Node {
        std::unordered_map<char32_t, int> next;
        int fail = 0;
        int dict_link = 0;  // nearest proper suffix state that has outputs (0 = none)
        std::vector<Output> outputs;
    };

    void add_pattern(const std::u32string& pattern, std::size_t topic_idx) {
        int state = 0;
        for (char32_t c : pattern) {
            auto it = nodes_[state].next.find(c);
            if (it == nodes_[state].next.end()) {
                nodes_[state].next.emplace(c, static_cast<int>(nodes_.size()));
                nodes_.emplace_back();
                state = static_cast<int>(nodes_.size()) - 1;
            } else {
                state = it->second;
            }
        }
        nodes_[state].outputs.push_back(Output{topic_idx, pattern.size(), unicode::is_word_char(pattern.front()),
                                               unicode::is_word_char(pattern.back())});
    }

    void build_links() {
        std::queue<int> queue;
        for (const auto& [c, child] : nodes_[0].next) queue.push(child);
        while (!queue.empty()) {
            const int s = queue.front();
            queue.pop();
            for (const auto& [c, child] : nodes_[s].next) {
                int f = nodes_[s].fail;
                while (f > 0 && !nodes_[f].next.contains(c)) f = nodes_[f].fail;
                const auto it = nodes_[f].next.find(c);
                nodes_[child].fail = (it != nodes_[f].next.end() && it->second != child) ? it->second : 0;
                const int fl = nodes_[child].fail;
                nodes_[child].dict_link = nodes_[fl].outputs.empty() ? nodes_[fl].dict_link : fl;
                queue.push(child);
            }
        }
    }

    // Goto with failure fallback. State s itself is reported by the caller,
    // followed by its dictionary-suffix chain.
    int step(int state, char32_t c) const {
        while (true) {
            const auto it = nodes_[state].next.find(c);
            if (it != nodes_[state].next.end()) return it->second;
            if (state == 0) return 0;
            state = nodes_[state].fail;
        }
    }

    FoldMode case_mode_;
    FoldMode accent_mode_;
    std::vector<TopicId> topics_;
    std::vector<Node> nodes_;
};

inline CompiledMatcher compile_rules(const TopicRuleSet& rules) { return CompiledMatcher(rules); }

inline TopicSet annotate(std::string_view text, const CompiledMatcher& matcher) { return matcher.annotate(text); }

/// Rule file: one JSON object per line, either a topic record
/// {"name": ..., "perspective": N, "patterns": [...]} or a settings record
/// {"case_mode": "fold"|"exact", "accent_mode": "fold"|"exact"}.
inline TopicRuleSet parse_rules(std::string_view content) {
    TopicRuleSet rules;
    std::size_t line_no = 0;
    for (const auto& raw : split(content, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!j.is_object()) throw ParseError("record is not a JSON object", line_no);
        if (!j.contains("name")) {
            if (j.contains("case_mode")) rules.case_mode = parse_fold_mode(j["case_mode"].get<std::string>());
            if (j.contains("accent_mode")) rules.accent_mode = parse_fold_mode(j["accent_mode"].get<std::string>());
            continue;
        }
        try {
            TopicId topic{j.at("name").get<std::string>(), j.value("perspective", 1)};
            if (topic.name.empty() || topic.perspective < 1) throw ParseError("invalid topic identity", line_no);
            auto patterns = j.at("patterns").get<std::vector<std::string>>();
            if (!rules.rules.emplace(topic, std::move(patterns)).second) {
                throw ValidationError("topic '" + topic.str() + "' is defined twice");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad topic record: ") + e.what(), line_no);
        }
    }
    rules.validate();
    return rules;
}

inline TopicRuleSet read_rules(const std::filesystem::path& path) { return parse_rules(read_file(path)); }

/// Replaces every document's labels with the annotator's output.
inline Corpus annotate_corpus(const Corpus& corpus, const CompiledMatcher& matcher) {
    Corpus out;
    for (const auto& doc : corpus) {
        Document d = doc;
        d.labels = matcher.annotate(d.text);
        out.add(std::move(d));
    }
    return out;
}

}  // namespace topicdet
