#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicdet/corpus.hpp"
#include "topicdet/detector.hpp"
#include "topicdet/embeddings.hpp"
#include "topicdet/errors.hpp"
#include "topicdet/labeled_set.hpp"
#include "topicdet/util.hpp"

namespace topicdet {

/// Stratified K-fold assignment for one topic. `assignment[i]` is the fold of
/// the i-th corpus document.
struct FoldPlan {
    TopicId topic;
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::vector<std::size_t> assignment;

    std::vector<std::size_t> members(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] == fold) out.push_back(i);
        }
        return out;
    }

    std::vector<std::size_t> complement(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] != fold) out.push_back(i);
        }
        return out;
    }
};

/// Positives and negatives are shuffled separately and dealt round-robin;
/// negatives continue where positives stopped so fold sizes stay balanced.
inline FoldPlan make_folds(const Corpus& corpus, const TopicId& topic, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw EvaluationError("k must be >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < corpus.size(); ++i) (corpus[i].has_label(topic) ? pos : neg).push_back(i);
    if (pos.size() < k || neg.size() < k) {
        throw EvaluationError("topic '" + topic.str() + "' has " + std::to_string(pos.size()) + " positives and " +
                              std::to_string(neg.size()) + " negatives; need at least " + std::to_string(k) +
                              " of each");
    }
    Rng rng(seed + topic.stable_hash());
    shuffle(pos, rng);
    shuffle(neg, rng);
    FoldPlan plan{topic, k, seed, std::vector<std::size_t>(corpus.size(), 0)};
    for (std::size_t i = 0; i < pos.size(); ++i) plan.assignment[pos[i]] = i % k;
    for (std::size_t j = 0; j < neg.size(); ++j) plan.assignment[neg[j]] = (pos.size() + j) % k;
    return plan;
}

struct ConfusionCounts {
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;

    std::size_t positives() const { return tp + fn; }
    std::size_t negatives() const { return tn + fp; }
};

struct Rates {
    double tpr = 0.0;
    double tnr = 0.0;
};

inline Rates rates(const ConfusionCounts& c) {
    if (c.positives() == 0 || c.negatives() == 0) {
        throw EvaluationError("TPR/TNR undefined: " + std::to_string(c.positives()) + " positives, " +
                              std::to_string(c.negatives()) + " negatives");
    }
    return {static_cast<double>(c.tp) / static_cast<double>(c.positives()),
            static_cast<double>(c.tn) / static_cast<double>(c.negatives())};
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Population standard deviation.
inline double stddev(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

struct MetricsSummary {
    std::vector<ConfusionCounts> counts;
    std::vector<double> tpr;
    std::vector<double> tnr;
    double tpr_mean = 0.0, tpr_std = 0.0;
    double tnr_mean = 0.0, tnr_std = 0.0;

    void add_fold(const ConfusionCounts& c) {
        const auto r = rates(c);
        counts.push_back(c);
        tpr.push_back(r.tpr);
        tnr.push_back(r.tnr);
        tpr_mean = mean(tpr);
        tpr_std = stddev(tpr);
        tnr_mean = mean(tnr);
        tnr_std = stddev(tnr);
    }
};

/// Anything trained per fold must be scoreable through predict_score(model, x).
template <typename M>
concept Scoreable = requires(const M& m, std::span<const double> x) {
    { predict_score(m, x) } -> std::convertible_to<double>;
};

/// For each fold i: train on the other folds, score fold i with threshold
/// 0.5, and record TPR/TNR. `train(set, fold)` returns a Scoreable model.
template <typename Train>
MetricsSummary evaluate_topic(const Corpus& corpus, const TopicId& topic, const EmbeddingStore& store,
                              const FoldPlan& folds, Train&& train) {
    if (folds.assignment.size() != corpus.size()) throw EvaluationError("fold plan does not match corpus");
    MetricsSummary summary;
    for (std::size_t fold = 0; fold < folds.k; ++fold) {
        try {
            const auto train_idx = folds.complement(fold);
            const auto test_idx = folds.members(fold);
            const auto train_set = make_labeled_set(corpus, train_idx, topic, store);
            const auto model = train(train_set, fold);
            static_assert(Scoreable<std::decay_t<decltype(model)>>);
            ConfusionCounts c;
            for (auto i : test_idx) {
                const bool predicted = predict_score(model, store.at(corpus[i].id)) >= 0.5;
                if (corpus[i].has_label(topic)) {
                    (predicted ? c.tp : c.fn)++;
                } else {
                    (predicted ? c.fp : c.tn)++;
                }
            }
            summary.add_fold(c);
        } catch (const std::exception& e) {
            throw EvaluationError("topic '" + topic.str() + "' fold " + std::to_string(fold) + ": " + e.what());
        }
    }
    return summary;
}

/// Seeds each fold's trainer with topic_seed(base_seed, topic) + fold.
inline MetricsSummary evaluate_topic(const Corpus& corpus, const TopicId& topic, const EmbeddingStore& store,
                                     const DetectorConfig& config, const FoldPlan& folds, std::uint64_t base_seed) {
    return evaluate_topic(corpus, topic, store, folds, [&](const LabeledSet& set, std::size_t fold) {
        return train_head(set, config, topic_seed(base_seed, topic) + fold);
    });
}

/// Two decimals, round half up, leading zero dropped below 1: 0.87 -> ".87".
inline std::string format_ppu(double x) {
    const double scaled = std::floor(x * 100.0 + 0.5 + 1e-9);
    const auto hundredths = static_cast<long long>(scaled);
    const auto whole = hundredths / 100;
    const auto frac = hundredths % 100;
    std::string out = whole == 0 ? "" : std::to_string(whole);
    out += '.';
    if (frac < 10) out += '0';
    out += std::to_string(frac);
    return out;
}

/// "mean (std)", e.g. ".87 (.09)".
inline std::string format_cell(double mean_value, double std_value) {
    return format_ppu(mean_value) + " (" + format_ppu(std_value) + ")";
}

enum class TableLayout { by_backbone, by_classifier };

inline TableLayout parse_layout(std::string_view s) {
    if (s == "by-backbone") return TableLayout::by_backbone;
    if (s == "by-classifier") return TableLayout::by_classifier;
    throw ValidationError("unknown table layout '" + std::string(s) + "'");
}

/// Results of one backbone + head configuration across topics.
struct ResultColumn {
    std::string backbone;
    std::string head;
    std::map<TopicId, MetricsSummary> summaries;
};

/// One row per topic (topic order), a TPR and TNR cell per column group.
inline std::string render_table(std::span<const ResultColumn> columns, TableLayout layout) {
    std::map<TopicId, int> topics;
    for (const auto& col : columns) {
        for (const auto& [t, s] : col.summaries) topics[t] = 0;
    }
    std::size_t topic_width = 5;
    for (const auto& [t, _] : topics) topic_width = std::max(topic_width, t.str().size());
    constexpr std::size_t cell_width = 10;

    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    auto upper = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return s;
    };

    std::string header = pad("Topic", topic_width);
    std::string sub = pad("", topic_width);
    for (const auto& col : columns) {
        const std::string title =
            layout == TableLayout::by_backbone ? col.backbone : col.backbone + " + " + upper(col.head);
        header += " | " + pad(title, 2 * cell_width + 1);
        sub += " | " + pad("TPR", cell_width) + " " + pad("TNR", cell_width);
    }
    std::string out = header + "\n" + sub + "\n";
    out += std::string(sub.size(), '-') + "\n";
    for (const auto& [t, _] : topics) {
        std::string row = pad(t.str(), topic_width);
        for (const auto& col : columns) {
            const auto it = col.summaries.find(t);
            if (it == col.summaries.end()) {
                row += " | " + pad("-", cell_width) + " " + pad("-", cell_width);
            } else {
                const auto& s = it->second;
                row += " | " + pad(format_cell(s.tpr_mean, s.tpr_std), cell_width) + " " +
                       pad(format_cell(s.tnr_mean, s.tnr_std), cell_width);
            }
        }
        while (!row.empty() && row.back() == ' ') row.pop_back();
        out += row + "\n";
    }
    return out;
}

inline std::string render_table(const std::map<TopicId, MetricsSummary>& summaries, TableLayout layout,
                                std::string backbone = "embeddings", std::string head = "") {
    const ResultColumn col{std::move(backbone), std::move(head), summaries};
    return render_table(std::span<const ResultColumn>(&col, 1), layout);
}

/// One JSON record per topic per fold.
inline std::string serialize_fold_records(const ResultColumn& column) {
    std::string out;
    for (const auto& [topic, s] : column.summaries) {
        for (std::size_t f = 0; f < s.counts.size(); ++f) {
            nlohmann::ordered_json j;
            j["backbone"] = column.backbone;
            j["head"] = column.head;
            j["topic"] = topic.str();
            j["fold"] = f;
            j["tp"] = s.counts[f].tp;
            j["fn"] = s.counts[f].fn;
            j["tn"] = s.counts[f].tn;
            j["fp"] = s.counts[f].fp;
            j["tpr"] = s.tpr[f];
            j["tnr"] = s.tnr[f];
            out += j.dump() + "\n";
        }
    }
    return out;
}

/// Groups fold records back into columns, in first-seen (backbone, head) order.
inline std::vector<ResultColumn> parse_fold_records(std::string_view content) {
    std::vector<ResultColumn> columns;
    std::size_t line_no = 0;
    for (const auto& raw : split(content, '\n')) {
        ++line_no;
        if (trim(raw).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(raw);
            const auto backbone = j.at("backbone").get<std::string>();
            const auto head = j.at("head").get<std::string>();
            auto it = std::find_if(columns.begin(), columns.end(),
                                   [&](const auto& c) { return c.backbone == backbone && c.head == head; });
            if (it == columns.end()) {
                columns.push_back(ResultColumn{backbone, head, {}});
                it = std::prev(columns.end());
            }
            ConfusionCounts c{j.at("tp").get<std::size_t>(), j.at("fn").get<std::size_t>(),
                              j.at("tn").get<std::size_t>(), j.at("fp").get<std::size_t>()};
            it->summaries[TopicId::parse(j.at("topic").get<std::string>())].add_fold(c);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad fold record: ") + e.what(), line_no);
        }
    }
    return columns;
}

}  // namespace topicdet
