#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicdet/corpus.hpp"
#include "topicdet/errors.hpp"
#include "topicdet/labeled_set.hpp"
#include "topicdet/logistic.hpp"
#include "topicdet/random_forest.hpp"
#include "topicdet/svm.hpp"
#include "topicdet/util.hpp"

namespace topicdet {

enum class HeadKind { nn, svm, rf };

inline std::string_view to_string(HeadKind h) {
    switch (h) {
        case HeadKind::nn: return "nn";
        case HeadKind::svm: return "svm";
        case HeadKind::rf: return "rf";
    }
    return "?";
}

inline HeadKind parse_head(std::string_view s) {
    if (s == "nn") return HeadKind::nn;
    if (s == "svm") return HeadKind::svm;
    if (s == "rf") return HeadKind::rf;
    throw ValidationError("unknown classifier head '" + std::string(s) + "' (expected nn, svm or rf)");
}

struct DetectorConfig {
    HeadKind head = HeadKind::svm;
    LogisticConfig nn;
    SvmConfig svm;
    RfConfig rf;
};

using DetectorModel = std::variant<LogisticModel, SvmModel, RfModel>;

/// A trained binary classifier bound to one topic.
struct TopicDetector {
    TopicId topic;
    std::uint64_t seed = 0;
    DetectorModel model;

    HeadKind head() const { return static_cast<HeadKind>(model.index()); }
};

/// Seed used for a topic's trainer; independent of scheduling order.
inline std::uint64_t topic_seed(std::uint64_t base_seed, const TopicId& topic) {
    return base_seed + topic.stable_hash();
}

inline DetectorModel train_head(const LabeledSet& data, const DetectorConfig& config, std::uint64_t seed) {
    switch (config.head) {
        case HeadKind::nn: {
            auto c = config.nn;
            c.seed = seed;
            return train_logistic(data, c);
        }
        case HeadKind::svm:
            return train_svm(data, config.svm);
        case HeadKind::rf: {
            auto c = config.rf;
            c.seed = seed;
            data.require_both_classes();
            return train_rf(data, c);
        }
    }
    throw ValidationError("unknown head");
}

inline TopicDetector train_detector(const LabeledSet& data, const DetectorConfig& config, std::uint64_t base_seed) {
    const auto seed = topic_seed(base_seed, data.topic);
    return TopicDetector{data.topic, seed, train_head(data, config, seed)};
}

inline double predict_score(const DetectorModel& model, std::span<const double> x) {
    return std::visit([&](const auto& m) { return predict_score(m, x); }, model);
}

inline double predict_score(const TopicDetector& detector, std::span<const double> x) {
    return predict_score(detector.model, x);
}

inline std::size_t input_dim(const DetectorModel& model) {
    return std::visit([](const auto& m) { return m.input_dim; }, model);
}

// Model files: a JSON header line, then one JSON record per parameter block.
// Doubles are written in shortest round-trip form, so a reload reproduces
// every score bit for bit.
namespace detail {

using json = nlohmann::ordered_json;

inline std::string model_header(const TopicDetector& det) {
    json h;
    h["format"] = "topicdet-model/1";
    h["kind"] = to_string(det.head());
    h["topic"] = det.topic.str();
    h["dim"] = input_dim(det.model);
    h["seed"] = det.seed;
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LogisticModel>) {
                h["epochs"] = m.config.epochs;
                h["batch_size"] = m.config.batch_size;
                h["learning_rate"] = m.config.learning_rate;
                h["class_weighting"] = m.config.class_weighting;
                h["hidden_units"] = m.hidden_units;
                h["weight_pos"] = m.class_weights.positive;
                h["weight_neg"] = m.class_weights.negative;
            } else if constexpr (std::is_same_v<M, SvmModel>) {
                h["C"] = m.C;
                h["gamma"] = m.gamma;
                h["bias"] = m.bias;
                h["support_vectors"] = m.support_vectors.size();
            } else {
                h["n_trees"] = m.config.n_trees;
                h["max_depth"] = m.config.max_depth;
                h["feature_subset"] = m.config.feature_subset;
                h["bootstrap"] = m.config.bootstrap;
            }
        },
        det.model);
    return h.dump();
}

}  // namespace detail

inline std::string serialize_detector(const TopicDetector& det) {
    using detail::json;
    std::string out = detail::model_header(det) + "\n";
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LogisticModel>) {
                out += json{{"weights", m.weights}, {"bias", m.bias}}.dump() + "\n";
                for (std::size_t u = 0; u < m.hidden_units; ++u) {
                    const auto row = std::span(m.hidden_weights).subspan(u * m.input_dim, m.input_dim);
                    json r;
                    r["hidden"] = u;
                    r["weights"] = std::vector<double>(row.begin(), row.end());
                    r["bias"] = m.hidden_bias[u];
                    out += r.dump() + "\n";
                }
            } else if constexpr (std::is_same_v<M, SvmModel>) {
                for (std::size_t i = 0; i < m.support_vectors.size(); ++i) {
                    json r;
                    r["coef"] = m.coefficients[i];
                    r["sv"] = m.support_vectors[i];
                    out += r.dump() + "\n";
                }
            } else {
                for (const auto& tree : m.trees) {
                    json feature = json::array(), threshold = json::array(), left = json::array(),
                         right = json::array(), label = json::array();
                    for (const auto& n : tree.nodes) {
                        feature.push_back(n.feature);
                        threshold.push_back(n.threshold);
                        left.push_back(n.left);
                        right.push_back(n.right);
                        label.push_back(n.label);
                    }
                    json r;
                    r["depth"] = tree.depth;
                    r["feature"] = std::move(feature);
                    r["threshold"] = std::move(threshold);
                    r["left"] = std::move(left);
                    r["right"] = std::move(right);
                    r["label"] = std::move(label);
                    out += r.dump() + "\n";
                }
            }
        },
        det.model);
    return out;
}

inline TopicDetector parse_detector(std::string_view content) {
    using detail::json;
    const auto lines = split(content, '\n');
    std::vector<json> records;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            records.push_back(json::parse(lines[i]));
        } catch (const json::parse_error& e) {
            throw FormatError(std::string("invalid JSON: ") + e.what(), i + 1);
        }
    }
    if (records.empty()) throw FormatError("empty model file");
    try {
        const auto& h = records.front();
        if (h.value("format", "") != "topicdet-model/1") throw FormatError("not a topicdet model file", 1);
        TopicDetector det;
        det.topic = TopicId::parse(h.at("topic").get<std::string>());
        det.seed = h.at("seed").get<std::uint64_t>();
        const auto dim = h.at("dim").get<std::size_t>();
        const auto kind = parse_head(h.at("kind").get<std::string>());
        const std::span<const json> body(records.data() + 1, records.size() - 1);
        switch (kind) {
            case HeadKind::nn: {
                const auto hidden = h.at("hidden_units").get<std::size_t>();
                auto m = LogisticModel::zeros(dim, hidden);
                m.config.epochs = h.at("epochs").get<std::size_t>();
                m.config.batch_size = h.at("batch_size").get<std::size_t>();
                m.config.learning_rate = h.at("learning_rate").get<double>();
                m.config.class_weighting = h.at("class_weighting").get<bool>();
                m.config.hidden_units = hidden;
                m.config.seed = det.seed;
                m.class_weights = {h.at("weight_pos").get<double>(), h.at("weight_neg").get<double>()};
                if (body.size() != 1 + hidden) throw FormatError("wrong number of parameter records");
                m.weights = body[0].at("weights").get<std::vector<double>>();
                m.bias = body[0].at("bias").get<double>();
                if (m.weights.size() != (hidden ? hidden : dim)) throw FormatError("output weights have wrong size");
                for (std::size_t u = 0; u < hidden; ++u) {
                    const auto row = body[1 + u].at("weights").get<std::vector<double>>();
                    if (row.size() != dim) throw FormatError("hidden row has wrong size", u + 3);
                    std::copy(row.begin(), row.end(), m.hidden_weights.begin() + static_cast<std::ptrdiff_t>(u * dim));
                    m.hidden_bias[u] = body[1 + u].at("bias").get<double>();
                }
                det.model = std::move(m);
                break;
            }
            case HeadKind::svm: {
                SvmModel m;
                m.input_dim = dim;
                m.C = h.at("C").get<double>();
                m.gamma = h.at("gamma").get<double>();
                m.bias = h.at("bias").get<double>();
                for (std::size_t i = 0; i < body.size(); ++i) {
                    auto sv = body[i].at("sv").get<std::vector<double>>();
                    if (sv.size() != dim) throw FormatError("support vector has wrong dimension", i + 2);
                    m.support_vectors.push_back(std::move(sv));
                    m.coefficients.push_back(body[i].at("coef").get<double>());
                }
                if (m.support_vectors.size() != h.at("support_vectors").get<std::size_t>()) {
                    throw FormatError("support vector count does not match header");
                }
                det.model = std::move(m);
                break;
            }
            case HeadKind::rf: {
                RfModel m;
                m.input_dim = dim;
                m.config.n_trees = h.at("n_trees").get<std::size_t>();
                m.config.max_depth = h.at("max_depth").get<std::size_t>();
                m.config.feature_subset = h.at("feature_subset").get<std::size_t>();
                m.config.bootstrap = h.at("bootstrap").get<bool>();
                m.config.seed = det.seed;
                for (std::size_t i = 0; i < body.size(); ++i) {
                    const auto& r = body[i];
                    DecisionTree tree;
                    tree.depth = r.at("depth").get<std::size_t>();
                    const auto feature = r.at("feature").get<std::vector<int>>();
                    const auto threshold = r.at("threshold").get<std::vector<double>>();
                    const auto left = r.at("left").get<std::vector<int>>();
                    const auto right = r.at("right").get<std::vector<int>>();
                    const auto label = r.at("label").get<std::vector<int>>();
                    const auto nn = feature.size();
                    if (nn == 0 || threshold.size() != nn || left.size() != nn || right.size() != nn ||
                        label.size() != nn) {
                        throw FormatError("tree arrays have inconsistent lengths", i + 2);
                    }
                    for (std::size_t k = 0; k < nn; ++k) {
                        const bool leaf = feature[k] < 0;
                        const auto in_range = [&](int c) { return c > static_cast<int>(k) && c < static_cast<int>(nn); };
                        if (!leaf && (feature[k] >= static_cast<int>(dim) || !in_range(left[k]) || !in_range(right[k]))) {
                            throw FormatError("tree node references are out of range", i + 2);
                        }
                        tree.nodes.push_back(TreeNode{feature[k], threshold[k], left[k], right[k], label[k]});
                    }
                    m.trees.push_back(std::move(tree));
                }
                if (m.trees.size() != m.config.n_trees) throw FormatError("tree count does not match header");
                det.model = std::move(m);
                break;
            }
        }
        return det;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad model record: ") + e.what());
    } catch (const ParseError& e) {
        throw FormatError(e.what());
    }
}

inline TopicDetector read_detector(const std::filesystem::path& path) { return parse_detector(read_file(path)); }

inline void write_detector(const std::filesystem::path& path, const TopicDetector& det) {
    atomic_write_file(path, serialize_detector(det));
}

/// File-system friendly name for a topic's model file.
inline std::string model_file_name(const TopicId& topic) {
    std::string out;
    for (unsigned char c : topic.str()) {
        out += (std::isalnum(c) || c == '_' || c == '-') ? static_cast<char>(c) : '-';
    }
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(topic.stable_hash()));
    return out + "." + std::string(hash, 8) + ".model";
}

}  // namespace topicdet
