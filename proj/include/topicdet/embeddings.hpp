#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "topicdet/corpus.hpp"
#include "topicdet/errors.hpp"
#include "topicdet/unicode.hpp"
#include "topicdet/util.hpp"

namespace topicdet {

using EmbeddingVector = std::vector<double>;

inline constexpr std::size_t default_embedding_dim = 768;

enum class Pooling { cls, mean, hashed };

inline std::string_view to_string(Pooling p) {
    switch (p) {
        case Pooling::cls: return "cls";
        case Pooling::mean: return "mean";
        case Pooling::hashed: return "hashed";
    }
    return "?";
}

inline Pooling parse_pooling(std::string_view s) {
    if (s == "cls") return Pooling::cls;
    if (s == "mean") return Pooling::mean;
    if (s == "hashed") return Pooling::hashed;
    throw ValidationError("unknown pooling '" + std::string(s) + "'");
}

/// Bucket of a (case-folded) token under the seeded feature hash.
inline std::size_t hashed_bucket(std::string_view token, std::size_t dim, std::uint64_t seed) {
    return static_cast<std::size_t>(splitmix64(fnv1a64(token) ^ splitmix64(seed)) % dim);
}

/// L2-normalized bag-of-words histogram over whitespace tokens, case-folded,
/// hashed into `dim` buckets. Empty or blank text gives the zero vector.
inline EmbeddingVector hashed_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ValidationError("embedding dimension must be >= 1");
    EmbeddingVector v(dim, 0.0);
    std::string token;
    auto flush = [&] {
        if (!token.empty()) {
            v[hashed_bucket(token, dim, seed)] += 1.0;
            token.clear();
        }
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t c = unicode::decode_next(text, pos);
        if (unicode::is_space(c)) {
            flush();
        } else {
            unicode::append_utf8(token, unicode::to_lower(c));
        }
    }
    flush();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

/// Vectors keyed by document id, in insertion order.
class EmbeddingStore {
public:
    EmbeddingStore(std::size_t dim, Pooling pooling, std::string model_name)
        : dim_(dim), pooling_(pooling), model_name_(std::move(model_name)) {
        if (dim_ == 0) throw ValidationError("embedding dimension must be >= 1");
        if (model_name_.empty() || model_name_.find_first_of(" \t\r\n") != std::string::npos) {
            throw ValidationError("model name must be a non-empty token without whitespace");
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    Pooling pooling() const noexcept { return pooling_; }
    const std::string& model_name() const noexcept { return model_name_; }
    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    void add(std::string id, EmbeddingVector v) {
        if (v.size() != dim_) {
            throw InputError("vector for '" + id + "' has dimension " + std::to_string(v.size()) + ", expected " +
                             std::to_string(dim_));
        }
        for (double x : v) {
            if (!std::isfinite(x)) throw InputError("vector for '" + id + "' has a non-finite entry");
        }
        if (id.empty() || id.find_first_of("\t\n\r") != std::string::npos) {
            throw InputError("document id must be non-empty and free of tabs/newlines");
        }
        if (!index_.emplace(id, vectors_.size()).second) throw IntegrityError("duplicate embedding id '" + id + "'");
        ids_.push_back(std::move(id));
        vectors_.push_back(std::move(v));
    }

    const EmbeddingVector* find(std::string_view id) const {
        const auto it = index_.find(std::string(id));
        return it == index_.end() ? nullptr : &vectors_[it->second];
    }

    const EmbeddingVector& at(std::string_view id) const {
        if (const auto* v = find(id)) return *v;
        throw InputError("no embedding for document '" + std::string(id) + "'");
    }

    friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
        return a.dim_ == b.dim_ && a.pooling_ == b.pooling_ && a.model_name_ == b.model_name_ && a.ids_ == b.ids_ &&
               a.vectors_ == b.vectors_;
    }

private:
    std::size_t dim_;
    Pooling pooling_;
    std::string model_name_;
    std::vector<std::string> ids_;
    std::vector<EmbeddingVector> vectors_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Header line "# dim=D pooling=P model=NAME", then per document
/// "<id>\t<v1> <v2> ... <vD>" with shortest round-trip decimals.
inline std::string serialize_store(const EmbeddingStore& store) {
    std::string out = "# dim=" + std::to_string(store.dim()) + " pooling=" + std::string(to_string(store.pooling())) +
                      " model=" + store.model_name() + "\n";
    for (const auto& id : store.ids()) {
        out += id;
        out += '\t';
        const auto& v = store.at(id);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i > 0) out += ' ';
            out += format_double(v[i]);
        }
        out += '\n';
    }
    return out;
}

/// Record indices in errors are 1-based and exclude the header line.
inline EmbeddingStore parse_store(std::string_view content) {
    const auto first_nl = content.find('\n');
    const auto header = trim(content.substr(0, first_nl));
    if (!header.starts_with("#")) throw FormatError("missing embedding header");
    std::size_t dim = 0;
    std::string pooling, model;
    for (const auto& field : split(trim(std::string_view(header).substr(1)), ' ')) {
        if (field.empty()) continue;
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw FormatError("malformed header field '" + field + "'");
        const auto key = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        if (key == "dim") {
            double d = 0;
            if (!parse_double(value, d) || d < 1 || d != std::floor(d)) throw FormatError("bad header dim '" + value + "'");
            dim = static_cast<std::size_t>(d);
        } else if (key == "pooling") {
            pooling = value;
        } else if (key == "model") {
            model = value;
        }
    }
    if (dim == 0 || pooling.empty() || model.empty()) throw FormatError("header must define dim, pooling and model");
    Pooling pool;
    try {
        pool = parse_pooling(pooling);
    } catch (const ValidationError& e) {
        throw FormatError(e.what());
    }
    EmbeddingStore store(dim, pool, model);

    std::size_t record = 0;
    std::size_t start = first_nl == std::string_view::npos ? content.size() : first_nl + 1;
    EmbeddingVector values;
    while (start < content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        auto line = content.substr(start, end - start);
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        ++record;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0) throw FormatError("record has no id", record);
        const std::string id(line.substr(0, tab));
        values.clear();
        std::size_t p = tab + 1;
        while (p < line.size()) {
            while (p < line.size() && line[p] == ' ') ++p;
            if (p >= line.size()) break;
            auto q = line.find(' ', p);
            if (q == std::string_view::npos) q = line.size();
            double x = 0;
            if (!parse_double(line.substr(p, q - p), x) || !std::isfinite(x)) {
                throw FormatError("bad number '" + std::string(line.substr(p, q - p)) + "'", record);
            }
            values.push_back(x);
            p = q;
        }
        if (values.size() != dim) {
            throw FormatError("record '" + id + "' has " + std::to_string(values.size()) + " values, header says " +
                                  std::to_string(dim),
                              record);
        }
        try {
            store.add(id, values);
        } catch (const std::exception& e) {
            throw FormatError(e.what(), record);
        }
    }
    return store;
}

inline EmbeddingStore load_store(const std::filesystem::path& path) { return parse_store(read_file(path)); }

inline void write_store(const std::filesystem::path& path, const EmbeddingStore& store) {
    atomic_write_file(path, serialize_store(store));
}

template <typename P>
concept EmbeddingProvider = requires(const P& p, const Document& doc) {
    { p.dim() } -> std::convertible_to<std::size_t>;
    { p.pooling() } -> std::convertible_to<Pooling>;
    { p.model_name() } -> std::convertible_to<std::string>;
    { p.embed(doc) } -> std::convertible_to<EmbeddingVector>;
};

/// Deterministic stand-in backbone.
class HashedProvider {
public:
    explicit HashedProvider(std::size_t dim = default_embedding_dim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
        if (dim_ == 0) throw ValidationError("embedding dimension must be >= 1");
    }

    std::size_t dim() const noexcept { return dim_; }
    Pooling pooling() const noexcept { return Pooling::hashed; }
    std::string model_name() const { return "hashed-bow-seed" + std::to_string(seed_); }
    EmbeddingVector embed(const Document& doc) const { return hashed_embed(doc.text, dim_, seed_); }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Serves precomputed vectors (e.g. transformer [CLS] outputs) from a store.
class StoreProvider {
public:
    explicit StoreProvider(EmbeddingStore store) : store_(std::move(store)) {}

    std::size_t dim() const noexcept { return store_.dim(); }
    Pooling pooling() const noexcept { return store_.pooling(); }
    std::string model_name() const { return store_.model_name(); }
    EmbeddingVector embed(const Document& doc) const { return store_.at(doc.id); }

private:
    EmbeddingStore store_;
};

static_assert(EmbeddingProvider<HashedProvider>);
static_assert(EmbeddingProvider<StoreProvider>);

template <EmbeddingProvider P>
EmbeddingStore embed_corpus(const Corpus& corpus, const P& provider) {
    EmbeddingStore store(provider.dim(), provider.pooling(), provider.model_name());
    for (const auto& doc : corpus) store.add(doc.id, provider.embed(doc));
    return store;
}

}  // namespace topicdet
