#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "topicdet/corpus.hpp"
#include "topicdet/errors.hpp"
#include "topicdet/util.hpp"

namespace topicdet {

struct TopicScoreSet {
    std::string doc_id;
    std::map<TopicId, double> scores;

    void validate() const {
        for (const auto& [t, s] : scores) {
            if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
                throw InputError("score for '" + t.str() + "' is outside [0, 1]");
            }
        }
    }
};

struct ThresholdPolicy {
    double tau = 0.5;
};

struct TopKPolicy {
    std::size_t k = 3;
};

using AggregationPolicy = std::variant<ThresholdPolicy, TopKPolicy>;

/// "threshold:0.5" or "topk:3".
inline AggregationPolicy parse_policy(std::string_view text) {
    const auto colon = text.find(':');
    const auto kind = text.substr(0, colon);
    const auto arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    if (kind == "threshold") {
        double tau = 0.5;
        if (!arg.empty() && !parse_double(arg, tau)) throw ValidationError("bad threshold '" + std::string(arg) + "'");
        if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("threshold must be in [0, 1]");
        return ThresholdPolicy{tau};
    }
    if (kind == "topk") {
        std::size_t k = 0;
        const auto res = std::from_chars(arg.data(), arg.data() + arg.size(), k);
        if (arg.empty() || res.ec != std::errc{} || res.ptr != arg.data() + arg.size() || k == 0) {
            throw ValidationError("top-k needs a positive integer, got '" + std::string(arg) + "'");
        }
        return TopKPolicy{k};
    }
    throw ValidationError("unknown aggregation policy '" + std::string(text) + "'");
}

inline std::string to_string(const AggregationPolicy& p) {
    if (const auto* t = std::get_if<ThresholdPolicy>(&p)) return "threshold:" + format_double(t->tau);
    return "topk:" + std::to_string(std::get<TopKPolicy>(p).k);
}

struct AggregatedPrediction {
    std::vector<std::pair<TopicId, double>> topics;
    /// Set when top-k asked for more topics than were scored.
    bool truncated = false;
};

/// Score descending, ties by topic order. Threshold keeps score >= tau.
inline AggregatedPrediction aggregate(const TopicScoreSet& scores, const AggregationPolicy& policy) {
    scores.validate();
    AggregatedPrediction out;
    out.topics.assign(scores.scores.begin(), scores.scores.end());
    std::stable_sort(out.topics.begin(), out.topics.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (const auto* t = std::get_if<ThresholdPolicy>(&policy)) {
        std::erase_if(out.topics, [&](const auto& e) { return e.second < t->tau; });
    } else {
        const auto k = std::get<TopKPolicy>(policy).k;
        if (k > out.topics.size()) {
            out.truncated = true;
        } else {
            out.topics.resize(k);
        }
    }
    return out;
}

}  // namespace topicdet
