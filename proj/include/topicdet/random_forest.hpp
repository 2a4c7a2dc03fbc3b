#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "topicdet/errors.hpp"
#include "topicdet/labeled_set.hpp"
#include "topicdet/util.hpp"

namespace topicdet {

struct RfConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 1000;
    /// Features examined per node; 0 = ceil(sqrt(d)).
    std::size_t feature_subset = 0;
    std::uint64_t seed = 0;
    bool bootstrap = true;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;   // x[feature] <= threshold
    int right = -1;
    int label = 1;   // leaf vote
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    std::size_t depth = 0;

    int predict(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].label;
    }
};

struct RfModel {
    std::size_t input_dim = 0;
    RfConfig config;
    std::vector<DecisionTree> trees;
};

namespace detail {

inline double gini(double pos, double total) {
    if (total <= 0.0) return 0.0;
    const double p = pos / total;
    return 2.0 * p * (1.0 - p);
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;  // weighted child impurity
};

// CART growth with Gini impurity. Samples are indices into the labeled set
// (repeats allowed, from the bootstrap); nodes are grown depth-first from an
// explicit stack so deep trees do not recurse.
class TreeBuilder {
public:
    TreeBuilder(const LabeledSet& data, std::size_t max_depth, std::size_t mtry, Rng& rng)
        : data_(data), max_depth_(max_depth), mtry_(mtry), rng_(rng), features_(data.dim()) {
        std::iota(features_.begin(), features_.end(), 0);
    }

    DecisionTree build(std::vector<std::size_t> samples) {
        DecisionTree tree;
        tree.nodes.emplace_back();
        struct Task {
            int node;
            std::size_t begin, end, depth;
        };
        samples_ = std::move(samples);
        std::vector<Task> stack{{0, 0, samples_.size(), 0}};
        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            tree.depth = std::max(tree.depth, task.depth);
            const auto span = std::span<std::size_t>(samples_).subspan(task.begin, task.end - task.begin);
            std::size_t pos = 0;
            for (auto s : span) pos += data_.y[s] > 0;
            const std::size_t neg = span.size() - pos;
            tree.nodes[static_cast<std::size_t>(task.node)].label = pos >= neg ? 1 : -1;
            if (pos == 0 || neg == 0 || task.depth >= max_depth_ || span.size() < 2) continue;

            const Split split = find_split(span, pos);
            if (split.feature < 0) continue;
            const auto mid = std::partition(span.begin(), span.end(), [&](std::size_t s) {
                return data_.X[s][static_cast<std::size_t>(split.feature)] <= split.threshold;
            });
            const std::size_t n_left = static_cast<std::size_t>(mid - span.begin());

            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = left;
            node.right = left + 1;
            stack.push_back({left + 1, task.begin + n_left, task.end, task.depth + 1});
            stack.push_back({left, task.begin, task.begin + n_left, task.depth + 1});
        }
        return tree;
    }

private:
    // Draws features without replacement until `mtry` non-constant ones have
    // been evaluated or all are exhausted.
    Split find_split(std::span<const std::size_t> span, std::size_t pos_total) {
        Split best;
        best.impurity = std::numeric_limits<double>::infinity();
        const double total = static_cast<double>(span.size());
        std::size_t evaluated = 0;
        const std::size_t d = features_.size();
        for (std::size_t k = 0; k < d && evaluated < mtry_; ++k) {
            const auto pick = k + static_cast<std::size_t>(uniform_index(rng_, d - k));
            std::swap(features_[k], features_[pick]);
            const std::size_t f = features_[k];

            values_.clear();
            for (auto s : span) values_.emplace_back(data_.X[s][f], data_.y[s] > 0 ? 1 : 0);
            const auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
            if (lo->first == hi->first) continue;
            ++evaluated;
            std::sort(values_.begin(), values_.end());

            double left_pos = 0.0;
            for (std::size_t i = 0; i + 1 < values_.size(); ++i) {
                left_pos += values_[i].second;
                if (values_[i].first == values_[i + 1].first) continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = total - nl;
                const double right_pos = static_cast<double>(pos_total) - left_pos;
                const double imp = (nl * gini(left_pos, nl) + nr * gini(right_pos, nr)) / total;
                if (imp < best.impurity) {
                    best.impurity = imp;
                    best.feature = static_cast<int>(f);
                    double t = values_[i].first + (values_[i + 1].first - values_[i].first) / 2.0;
                    if (!(t < values_[i + 1].first)) t = values_[i].first;
                    best.threshold = t;
                }
            }
        }
        return best;
    }

    const LabeledSet& data_;
    std::size_t max_depth_;
    std::size_t mtry_;
    Rng& rng_;
    std::vector<std::size_t> features_;
    std::vector<std::size_t> samples_;
    std::vector<std::pair<double, int>> values_;
};

}  // namespace detail

inline RfModel train_rf(const LabeledSet& data, const RfConfig& config = {}) {
    data.validate();
    if (config.n_trees == 0) throw ValidationError("n_trees must be >= 1");
    if (config.max_depth == 0) throw ValidationError("max_depth must be >= 1");
    const std::size_t d = data.dim();
    const std::size_t mtry = config.feature_subset
                                 ? std::min(config.feature_subset, d)
                                 : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));

    RfModel model;
    model.input_dim = d;
    model.config = config;
    Rng rng(config.seed);
    detail::TreeBuilder builder(data, config.max_depth, mtry, rng);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
        std::vector<std::size_t> samples(data.size());
        if (config.bootstrap) {
            for (auto& s : samples) s = static_cast<std::size_t>(uniform_index(rng, data.size()));
        } else {
            std::iota(samples.begin(), samples.end(), std::size_t{0});
        }
        model.trees.push_back(builder.build(std::move(samples)));
    }
    return model;
}

/// Fraction of trees voting +1.
inline double predict_score(const RfModel& model, std::span<const double> x) {
    check_dimension(model.input_dim, x.size());
    std::size_t votes = 0;
    for (const auto& tree : model.trees) votes += tree.predict(x) > 0;
    return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

}  // namespace topicdet
