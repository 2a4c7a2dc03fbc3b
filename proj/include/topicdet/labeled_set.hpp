#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "topicdet/corpus.hpp"
#include "topicdet/embeddings.hpp"
#include "topicdet/errors.hpp"

namespace topicdet {

/// One-vs-all training data for a single topic: y is +1 for documents that
/// carry the topic and -1 otherwise.
struct LabeledSet {
    std::vector<EmbeddingVector> X;
    std::vector<int> y;
    TopicId topic;

    std::size_t size() const noexcept { return y.size(); }
    std::size_t dim() const noexcept { return X.empty() ? 0 : X.front().size(); }

    std::size_t positives() const {
        std::size_t n = 0;
        for (int v : y) n += v > 0;
        return n;
    }
    std::size_t negatives() const { return size() - positives(); }

    void validate() const {
        if (X.size() != y.size()) throw InputError("X and y differ in length");
        if (y.size() < 2) throw TrainingError("topic '" + topic.str() + "': need at least two samples");
        const auto d = dim();
        if (d == 0) throw InputError("zero-dimensional samples");
        for (std::size_t i = 0; i < X.size(); ++i) {
            if (X[i].size() != d) throw InputError("sample " + std::to_string(i) + " has inconsistent dimension");
            if (y[i] != 1 && y[i] != -1) throw InputError("labels must be +1 or -1");
        }
    }

    void require_both_classes() const {
        validate();
        if (positives() == 0 || negatives() == 0) {
            throw TrainingError("topic '" + topic.str() + "': training data contains a single class");
        }
    }
};

/// Builds the one-vs-all view of `docs` (indices into the corpus) for `topic`.
inline LabeledSet make_labeled_set(const Corpus& corpus, std::span<const std::size_t> docs, const TopicId& topic,
                                   const EmbeddingStore& store) {
    LabeledSet set;
    set.topic = topic;
    set.X.reserve(docs.size());
    set.y.reserve(docs.size());
    for (auto i : docs) {
        const auto& doc = corpus[i];
        set.X.push_back(store.at(doc.id));
        set.y.push_back(doc.has_label(topic) ? 1 : -1);
    }
    return set;
}

inline LabeledSet make_labeled_set(const Corpus& corpus, const TopicId& topic, const EmbeddingStore& store) {
    std::vector<std::size_t> all(corpus.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return make_labeled_set(corpus, all, topic, store);
}

inline void check_dimension(std::size_t expected, std::size_t got) {
    if (expected != got) {
        throw InputError("input has dimension " + std::to_string(got) + ", model expects " + std::to_string(expected));
    }
}

}  // namespace topicdet
