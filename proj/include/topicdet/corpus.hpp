#pragma once

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicdet/errors.hpp"
#include "topicdet/util.hpp"

namespace topicdet {

using ordered_json = nlohmann::ordered_json;

/// A topic as annotated from one stakeholder perspective. Ordered by name,
/// then perspective.
struct TopicId {
    std::string name;
    int perspective = 1;

    auto operator<=>(const TopicId&) const = default;

    /// "Health Policy_1"
    std::string str() const { return name + "_" + std::to_string(perspective); }

    /// Inverse of str(): splits at the last underscore. The suffix must be a
    /// positive integer and the name non-empty.
    static TopicId parse(std::string_view text) {
        const auto pos = text.rfind('_');
        if (pos == std::string_view::npos || pos == 0 || pos + 1 == text.size()) {
            throw ParseError("topic label '" + std::string(text) + "' is not of the form name_perspective");
        }
        int perspective = 0;
        const auto digits = text.substr(pos + 1);
        const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), perspective);
        if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size() || perspective < 1 ||
            digits.front() == '+') {
            throw ParseError("topic label '" + std::string(text) + "' has a non-positive perspective");
        }
        return TopicId{std::string(text.substr(0, pos)), perspective};
    }

    /// Stable across runs and platforms; used to derive per-topic seeds.
    std::uint64_t stable_hash() const { return fnv1a64(str()); }
};

using TopicSet = std::set<TopicId>;

struct Document {
    std::string id;
    std::string text;
    std::optional<std::string> session;
    TopicSet labels;
    /// Fields not owned by this schema, kept verbatim for round-trips.
    ordered_json extra = ordered_json::object();

    bool has_label(const TopicId& t) const { return labels.contains(t); }
};

/// Documents in insertion order with unique ids and a per-topic document count.
class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::vector<Document> docs) {
        documents_.reserve(docs.size());
        for (auto& d : docs) add(std::move(d));
    }

    /// Throws IntegrityError on an empty or repeated id.
    void add(Document doc) {
        if (doc.id.empty()) throw IntegrityError("document id must be non-empty");
        const auto [it, inserted] = index_.emplace(doc.id, documents_.size());
        if (!inserted) throw IntegrityError("duplicate document id '" + doc.id + "'");
        for (const auto& t : doc.labels) ++topic_index_[t];
        documents_.push_back(std::move(doc));
    }

    const std::vector<Document>& documents() const noexcept { return documents_; }
    const std::map<TopicId, std::size_t>& topic_index() const noexcept { return topic_index_; }
    std::size_t size() const noexcept { return documents_.size(); }
    bool empty() const noexcept { return documents_.empty(); }

    auto begin() const noexcept { return documents_.begin(); }
    auto end() const noexcept { return documents_.end(); }
    const Document& operator[](std::size_t i) const { return documents_[i]; }

    const Document* find(std::string_view id) const {
        const auto it = index_.find(std::string(id));
        return it == index_.end() ? nullptr : &documents_[it->second];
    }

    std::size_t topic_count(const TopicId& t) const {
        const auto it = topic_index_.find(t);
        return it == topic_index_.end() ? 0 : it->second;
    }

private:
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::size_t> index_;
    std::map<TopicId, std::size_t> topic_index_;
};

namespace detail {

inline ordered_json document_to_json(const Document& doc) {
    ordered_json j;
    j["id"] = doc.id;
    j["text"] = doc.text;
    j["session"] = doc.session ? ordered_json(*doc.session) : ordered_json(nullptr);
    auto labels = ordered_json::array();
    for (const auto& t : doc.labels) labels.push_back(t.str());
    j["labels"] = std::move(labels);
    for (const auto& [key, value] : doc.extra.items()) j[key] = value;
    return j;
}

inline Document document_from_json(const ordered_json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError("record is not a JSON object", line);
    Document doc;
    const auto id = j.find("id");
    if (id == j.end() || !id->is_string()) throw ParseError("missing string field 'id'", line);
    doc.id = id->get<std::string>();
    const auto text = j.find("text");
    if (text == j.end() || !text->is_string()) throw ParseError("missing string field 'text'", line);
    doc.text = text->get<std::string>();
    if (const auto s = j.find("session"); s != j.end() && !s->is_null()) {
        if (!s->is_string()) throw ParseError("field 'session' must be a string or null", line);
        doc.session = s->get<std::string>();
    }
    if (const auto labels = j.find("labels"); labels != j.end()) {
        if (!labels->is_array()) throw ParseError("field 'labels' must be an array", line);
        for (const auto& l : *labels) {
            if (!l.is_string()) throw ParseError("labels must be strings", line);
            try {
                doc.labels.insert(TopicId::parse(l.get<std::string>()));
            } catch (const ParseError& e) {
                throw ParseError(e.what(), line);
            }
        }
    }
    for (const auto& [key, value] : j.items()) {
        if (key != "id" && key != "text" && key != "session" && key != "labels") doc.extra[key] = value;
    }
    return doc;
}

}  // namespace detail

/// Parses line-delimited JSON. Blank lines are skipped; line numbers in errors
/// are 1-based positions in the input.
inline Corpus parse_corpus(std::string_view content) {
    Corpus corpus;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        ++line_no;
        const auto line = content.substr(start, end - start);
        start = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        auto doc = detail::document_from_json(j, line_no);
        try {
            corpus.add(std::move(doc));
        } catch (const IntegrityError& e) {
            throw IntegrityError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return corpus;
}

inline std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& doc : corpus) {
        out += detail::document_to_json(doc).dump();
        out += '\n';
    }
    return out;
}

inline Corpus read_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

inline void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    atomic_write_file(path, serialize_corpus(corpus));
}

/// The `top_n` most frequent topics, count descending, ties by topic order.
inline std::vector<std::pair<TopicId, std::size_t>> corpus_stats(const Corpus& corpus, std::size_t top_n) {
    std::vector<std::pair<TopicId, std::size_t>> ranked(corpus.topic_index().begin(), corpus.topic_index().end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > top_n) ranked.resize(top_n);
    return ranked;
}

}  // namespace topicdet
