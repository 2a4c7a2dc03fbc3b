#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <type_traits>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicdet/aggregation.hpp"
#include "topicdet/annotator.hpp"
#include "topicdet/corpus.hpp"
#include "topicdet/curation.hpp"
#include "topicdet/detector.hpp"
#include "topicdet/embeddings.hpp"
#include "topicdet/errors.hpp"
#include "topicdet/evaluation.hpp"
#include "topicdet/unicode.hpp"
#include "topicdet/util.hpp"

namespace topicdet {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int internal = 1;
inline constexpr int missing_input = 2;
inline constexpr int validation = 3;
}  // namespace exit_code

/// A required input file or directory does not exist.
class MissingInputError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view env_prefix = "TOPICDET_";

inline const std::vector<std::string_view>& pipeline_stages() {
    static const std::vector<std::string_view> stages = {"annotate", "curate", "embed", "train",
                                                         "eval",     "predict", "report"};
    return stages;
}

inline std::string usage_text() {
    std::string out = "usage: topicdet <stage> [--config FILE] [--seed N] [--jobs N] [stage options]\nstages:";
    for (auto s : pipeline_stages()) {
        out += ' ';
        out += s;
    }
    return out + "\n";
}

struct PipelineConfig {
    struct Paths {
        std::string raw_corpus, rules, annotated, corpus, embeddings, embeddings_source, models, curation_report,
            eval_table, eval_folds, predictions, report_table;
        std::vector<std::string> report_inputs;
    } paths;

    CurationConfig curation;

    std::string embed_provider = "hashed";
    std::size_t embed_dim = default_embedding_dim;
    std::uint64_t embed_seed = 0;

    /// Empty = every topic in the corpus; "top:N" = the N most frequent.
    std::string topics;
    HeadKind default_head = HeadKind::svm;
    std::map<TopicId, HeadKind> topic_heads;
    DetectorConfig detector;

    std::size_t k = 5;
    TableLayout layout = TableLayout::by_backbone;
    std::uint64_t base_seed = 0;
    std::size_t jobs = 1;
    AggregationPolicy policy = ThresholdPolicy{0.5};

    DetectorConfig detector_for(const TopicId& t) const {
        auto c = detector;
        const auto it = topic_heads.find(t);
        c.head = it == topic_heads.end() ? default_head : it->second;
        return c;
    }

    void validate() const {
        if (k < 2) throw ValidationError("eval.k must be >= 2");
        if (jobs < 1) throw ValidationError("run.jobs must be >= 1");
        if (embed_provider != "hashed" && embed_provider != "file") {
            throw ValidationError("embed.provider must be 'hashed' or 'file'");
        }
        curation.validate();
    }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    double d = 0;
    if (!parse_double(trim(value), d)) throw ValidationError("config key '" + key + "': '" + value + "' is not a number");
    if constexpr (std::is_integral_v<T>) {
        if (d < 0 || d != std::floor(d)) throw ValidationError("config key '" + key + "' must be a non-negative integer");
    }
    return static_cast<T>(d);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ValidationError("config key '" + key + "' must be a boolean");
}

inline std::vector<std::string> parse_list(const std::string& value) {
    std::vector<std::string> out;
    for (const auto& part : split(value, ',')) {
        auto t = trim(part);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

inline std::string env_name(std::string_view key) {
    std::string out(env_prefix);
    for (unsigned char c : key) out += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
    return out;
}

}  // namespace detail

/// Applies one "key = value" setting. Unknown keys are validation errors.
inline void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_number;
    auto& p = cfg.paths;
    static const std::map<std::string, std::string PipelineConfig::Paths::*> path_keys = {
        {"paths.raw_corpus", &PipelineConfig::Paths::raw_corpus},
        {"paths.rules", &PipelineConfig::Paths::rules},
        {"paths.annotated", &PipelineConfig::Paths::annotated},
        {"paths.corpus", &PipelineConfig::Paths::corpus},
        {"paths.embeddings", &PipelineConfig::Paths::embeddings},
        {"paths.embeddings_source", &PipelineConfig::Paths::embeddings_source},
        {"paths.models", &PipelineConfig::Paths::models},
        {"paths.curation_report", &PipelineConfig::Paths::curation_report},
        {"paths.eval_table", &PipelineConfig::Paths::eval_table},
        {"paths.eval_folds", &PipelineConfig::Paths::eval_folds},
        {"paths.predictions", &PipelineConfig::Paths::predictions},
        {"paths.report_table", &PipelineConfig::Paths::report_table},
    };
    if (const auto it = path_keys.find(key); it != path_keys.end()) {
        p.*(it->second) = value;
    } else if (key == "paths.report_inputs") {
        p.report_inputs = detail::parse_list(value);
    } else if (key == "curation.min_chars") {
        cfg.curation.min_chars = parse_number<std::size_t>(key, value);
    } else if (key == "curation.bad_prefixes") {
        cfg.curation.bad_prefixes = detail::parse_list(value);
    } else if (key == "curation.coofficial_words") {
        const auto words = detail::parse_list(value);
        cfg.curation.coofficial_words = std::set<std::string>(words.begin(), words.end());
    } else if (key == "curation.coofficial_min_hits") {
        cfg.curation.coofficial_min_hits = parse_number<std::size_t>(key, value);
    } else if (key == "curation.keep_punct") {
        cfg.curation.keep_punct = unicode::decode(value);
    } else if (key == "curation.id_pattern") {
        cfg.curation.id_patterns.push_back(value);
    } else if (key == "curation.top_topics") {
        cfg.curation.top_topics = parse_number<std::size_t>(key, value);
    } else if (key == "embed.provider") {
        cfg.embed_provider = value;
    } else if (key == "embed.dim") {
        cfg.embed_dim = parse_number<std::size_t>(key, value);
        if (cfg.embed_dim == 0) throw ValidationError("embed.dim must be >= 1");
    } else if (key == "embed.seed") {
        cfg.embed_seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "train.topics") {
        cfg.topics = value;
    } else if (key == "head.default") {
        cfg.default_head = parse_head(value);
    } else if (key.starts_with("head.")) {
        cfg.topic_heads[TopicId::parse(key.substr(5))] = parse_head(value);
    } else if (key == "nn.epochs") {
        cfg.detector.nn.epochs = parse_number<std::size_t>(key, value);
    } else if (key == "nn.batch_size") {
        cfg.detector.nn.batch_size = parse_number<std::size_t>(key, value);
    } else if (key == "nn.learning_rate") {
        cfg.detector.nn.learning_rate = parse_number<double>(key, value);
    } else if (key == "nn.hidden_units") {
        cfg.detector.nn.hidden_units = parse_number<std::size_t>(key, value);
    } else if (key == "nn.class_weighting") {
        cfg.detector.nn.class_weighting = detail::parse_bool(key, value);
    } else if (key == "svm.C") {
        cfg.detector.svm.C = parse_number<double>(key, value);
    } else if (key == "svm.gamma") {
        if (value == "auto") {
            cfg.detector.svm.gamma.reset();
        } else {
            cfg.detector.svm.gamma = parse_number<double>(key, value);
        }
    } else if (key == "svm.tol") {
        cfg.detector.svm.tol = parse_number<double>(key, value);
    } else if (key == "svm.max_iter") {
        cfg.detector.svm.max_iter = parse_number<std::size_t>(key, value);
    } else if (key == "rf.n_trees") {
        cfg.detector.rf.n_trees = parse_number<std::size_t>(key, value);
    } else if (key == "rf.max_depth") {
        cfg.detector.rf.max_depth = parse_number<std::size_t>(key, value);
    } else if (key == "rf.feature_subset") {
        cfg.detector.rf.feature_subset = parse_number<std::size_t>(key, value);
    } else if (key == "eval.k") {
        cfg.k = parse_number<std::size_t>(key, value);
    } else if (key == "eval.layout") {
        cfg.layout = parse_layout(value);
    } else if (key == "run.seed") {
        cfg.base_seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "run.jobs") {
        cfg.jobs = parse_number<std::size_t>(key, value);
    } else if (key == "aggregation.policy") {
        cfg.policy = parse_policy(value);
    } else {
        throw ValidationError("unknown config key '" + key + "'");
    }
}

/// Keys recognised by apply_setting, used for environment overrides.
inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "paths.raw_corpus", "paths.rules", "paths.annotated", "paths.corpus", "paths.embeddings",
        "paths.embeddings_source", "paths.models", "paths.curation_report", "paths.eval_table",
        "paths.eval_folds", "paths.predictions", "paths.report_table", "paths.report_inputs",
        "curation.min_chars", "curation.bad_prefixes", "curation.coofficial_words",
        "curation.coofficial_min_hits", "curation.keep_punct", "curation.id_pattern", "curation.top_topics",
        "embed.provider", "embed.dim", "embed.seed", "train.topics", "head.default", "nn.epochs",
        "nn.batch_size", "nn.learning_rate", "nn.hidden_units", "nn.class_weighting", "svm.C", "svm.gamma",
        "svm.tol", "svm.max_iter", "rf.n_trees", "rf.max_depth", "rf.feature_subset", "eval.k", "eval.layout",
        "run.seed", "run.jobs", "aggregation.policy"};
    return keys;
}

using SettingList = std::vector<std::pair<std::string, std::string>>;

/// Flat "section.key = value" lines; '#' starts a comment line. Repeated
/// curation.id_pattern lines accumulate, other keys take the last value.
inline SettingList parse_config_text(std::string_view text) {
    SettingList settings;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
        auto key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ParseError("empty key", line_no);
        settings.emplace_back(std::move(key), trim(std::string_view(line).substr(eq + 1)));
    }
    return settings;
}

/// File settings, then TOPICDET_* environment overrides for every known key
/// and every key present in the file.
inline PipelineConfig load_config(const SettingList& file_settings,
                                  const std::function<const char*(const char*)>& getenv = std::getenv) {
    PipelineConfig cfg;
    std::vector<std::string> keys = known_config_keys();
    for (const auto& [key, value] : file_settings) {
        apply_setting(cfg, key, value);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    for (const auto& key : keys) {
        if (const char* v = getenv(detail::env_name(key).c_str())) {
            if (key == "curation.id_pattern") cfg.curation.id_patterns.clear();
            apply_setting(cfg, key, v);
        }
    }
    return cfg;
}

inline PipelineConfig load_config_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingInputError("config file not found: " + path.string());
    return load_config(parse_config_text(read_file(path)));
}

namespace detail {

inline const std::string& require_input(const std::string& path, std::string_view what) {
    if (path.empty()) throw MissingInputError(std::string(what) + " path is not configured");
    if (!std::filesystem::exists(path)) throw MissingInputError(std::string(what) + " not found: " + path);
    return path;
}

inline const std::string& require_output(const std::string& path, std::string_view what) {
    if (path.empty()) throw ValidationError(std::string(what) + " output path is not configured");
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    return path;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are collected
// per index and the lowest-index one is rethrown, so failures are reported
// the same way regardless of scheduling.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto extra = std::min(jobs, n) > 0 ? std::min(jobs, n) - 1 : 0;
        for (std::size_t t = 0; t < extra; ++t) pool.emplace_back(worker);
        worker();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline std::vector<TopicId> select_topics(const Corpus& corpus, const std::string& spec) {
    std::vector<TopicId> topics;
    if (spec.empty() || spec == "all") {
        for (const auto& [t, _] : corpus.topic_index()) topics.push_back(t);
    } else if (spec.starts_with("top:")) {
        const auto n = parse_number<std::size_t>("train.topics", spec.substr(4));
        for (const auto& [t, _] : corpus_stats(corpus, n)) topics.push_back(t);
        std::sort(topics.begin(), topics.end());
    } else {
        std::vector<std::string> names;
        if (std::filesystem::is_regular_file(spec)) {
            for (const auto& [t, _] : read_rules(spec).rules) topics.push_back(t);
        } else {
            for (const auto& name : parse_list(spec)) topics.push_back(TopicId::parse(name));
        }
        std::sort(topics.begin(), topics.end());
        topics.erase(std::unique(topics.begin(), topics.end()), topics.end());
    }
    if (topics.empty()) throw ValidationError("no topics selected");
    return topics;
}

inline void stage_annotate(const PipelineConfig& cfg, std::ostream& log) {
    const auto corpus = read_corpus(require_input(cfg.paths.raw_corpus, "raw corpus"));
    const auto matcher = compile_rules(read_rules(require_input(cfg.paths.rules, "rule file")));
    const auto out = annotate_corpus(corpus, matcher);
    write_corpus(require_output(cfg.paths.annotated, "annotated corpus"), out);
    std::size_t labeled = 0;
    for (const auto& d : out) labeled += !d.labels.empty();
    log << "annotate: " << out.size() << " documents, " << labeled << " labeled\n";
}

inline void stage_curate(const PipelineConfig& cfg, std::ostream& log) {
    const auto corpus = read_corpus(require_input(cfg.paths.annotated, "annotated corpus"));
    const auto [curated, report] = curate(corpus, cfg.curation);
    write_corpus(require_output(cfg.paths.corpus, "curated corpus"), curated);
    atomic_write_file(require_output(cfg.paths.curation_report, "curation report"), serialize_report(report));
    log << "curate: kept " << report.kept_count << " of " << report.input_count << "\n";
}

inline void stage_embed(const PipelineConfig& cfg, std::ostream& log) {
    const auto corpus = read_corpus(require_input(cfg.paths.corpus, "corpus"));
    EmbeddingStore store = [&] {
        if (cfg.embed_provider == "file") {
            StoreProvider provider(load_store(require_input(cfg.paths.embeddings_source, "embedding source")));
            return embed_corpus(corpus, provider);
        }
        return embed_corpus(corpus, HashedProvider(cfg.embed_dim, cfg.embed_seed));
    }();
    write_store(require_output(cfg.paths.embeddings, "embeddings"), store);
    log << "embed: " << store.size() << " vectors, dim " << store.dim() << "\n";
}

inline void stage_train(const PipelineConfig& cfg, std::ostream& log) {
    const auto corpus = read_corpus(require_input(cfg.paths.corpus, "corpus"));
    const auto store = load_store(require_input(cfg.paths.embeddings, "embeddings"));
    if (cfg.paths.models.empty()) throw ValidationError("models directory is not configured");
    std::filesystem::create_directories(cfg.paths.models);
    const auto topics = select_topics(corpus, cfg.topics);
    parallel_for(topics.size(), cfg.jobs, [&](std::size_t i) {
        const auto set = make_labeled_set(corpus, topics[i], store);
        const auto det = train_detector(set, cfg.detector_for(topics[i]), cfg.base_seed);
        write_detector(std::filesystem::path(cfg.paths.models) / model_file_name(topics[i]), det);
    });
    log << "train: " << topics.size() << " detectors\n";
}

inline void stage_eval(const PipelineConfig& cfg, std::ostream& log) {
    const auto corpus = read_corpus(require_input(cfg.paths.corpus, "corpus"));
    const auto store = load_store(require_input(cfg.paths.embeddings, "embeddings"));
    const auto topics = select_topics(corpus, cfg.topics);
    std::vector<MetricsSummary> results(topics.size());
    parallel_for(topics.size(), cfg.jobs, [&](std::size_t i) {
        const auto folds = make_folds(corpus, topics[i], cfg.k, cfg.base_seed);
        results[i] = evaluate_topic(corpus, topics[i], store, cfg.detector_for(topics[i]), folds, cfg.base_seed);
    });
    // Heads may differ per topic; the column is named after the default head
    // unless every topic shares one override.
    std::set<HeadKind> heads;
    for (const auto& t : topics) heads.insert(cfg.detector_for(t).head);
    ResultColumn column{store.model_name(), heads.size() == 1 ? std::string(to_string(*heads.begin())) : "mixed", {}};
    for (std::size_t i = 0; i < topics.size(); ++i) column.summaries[topics[i]] = std::move(results[i]);
    atomic_write_file(require_output(cfg.paths.eval_table, "evaluation table"),
                      render_table(std::span<const ResultColumn>(&column, 1), cfg.layout));
    atomic_write_file(require_output(cfg.paths.eval_folds, "fold records"), serialize_fold_records(column));
    log << "eval: " << topics.size() << " topics, k=" << cfg.k << "\n";
}

inline void stage_predict(const PipelineConfig& cfg, std::ostream& log) {
    const auto store = load_store(require_input(cfg.paths.embeddings, "embeddings"));
    const auto& dir = require_input(cfg.paths.models, "models directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".model") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw MissingInputError("no .model files in " + dir);
    std::vector<TopicDetector> detectors;
    for (const auto& f : files) {
        detectors.push_back(read_detector(f));
        check_dimension(input_dim(detectors.back().model), store.dim());
    }
    std::sort(detectors.begin(), detectors.end(), [](const auto& a, const auto& b) { return a.topic < b.topic; });

    std::vector<std::string> lines(store.size());
    parallel_for(store.size(), cfg.jobs, [&](std::size_t i) {
        const auto& id = store.ids()[i];
        TopicScoreSet scores{id, {}};
        for (const auto& det : detectors) scores.scores[det.topic] = predict_score(det, store.at(id));
        const auto result = aggregate(scores, cfg.policy);
        nlohmann::ordered_json j;
        j["id"] = id;
        auto ranked = nlohmann::ordered_json::array();
        for (const auto& [t, s] : result.topics) {
            nlohmann::ordered_json e;
            e["topic"] = t.str();
            e["score"] = s;
            ranked.push_back(std::move(e));
        }
        j["topics"] = std::move(ranked);
        j["truncated"] = result.truncated;
        lines[i] = j.dump() + "\n";
    });
    std::string out;
    for (const auto& l : lines) out += l;
    atomic_write_file(require_output(cfg.paths.predictions, "predictions"), out);
    log << "predict: " << store.size() << " documents, " << detectors.size() << " detectors\n";
}

inline void stage_report(const PipelineConfig& cfg, std::ostream& log) {
    auto inputs = cfg.paths.report_inputs;
    if (inputs.empty() && !cfg.paths.eval_folds.empty()) inputs.push_back(cfg.paths.eval_folds);
    if (inputs.empty()) throw MissingInputError("no fold-record inputs configured");
    std::vector<ResultColumn> columns;
    for (const auto& in : inputs) {
        for (auto& c : parse_fold_records(read_file(require_input(in, "fold records")))) columns.push_back(std::move(c));
    }
    atomic_write_file(require_output(cfg.paths.report_table, "report table"), render_table(columns, cfg.layout));
    log << "report: " << columns.size() << " column groups\n";
}

}  // namespace detail

/// Runs one stage and maps failures to exit codes: 2 missing input,
/// 3 validation, 1 anything else.
inline int run_stage(std::string_view stage, const PipelineConfig& cfg, std::ostream& log, std::ostream& err) {
    static const std::map<std::string_view, void (*)(const PipelineConfig&, std::ostream&)> stages = {
        {"annotate", detail::stage_annotate}, {"curate", detail::stage_curate}, {"embed", detail::stage_embed},
        {"train", detail::stage_train},       {"eval", detail::stage_eval},     {"predict", detail::stage_predict},
        {"report", detail::stage_report},
    };
    const auto it = stages.find(stage);
    if (it == stages.end()) {
        err << "unknown stage '" << stage << "'\n" << usage_text();
        return exit_code::validation;
    }
    try {
        cfg.validate();
        it->second(cfg, log);
        return exit_code::ok;
    } catch (const MissingInputError& e) {
        err << stage << ": " << e.what() << "\n";
        return exit_code::missing_input;
    } catch (const std::system_error& e) {
        err << stage << ": " << e.what() << "\n";
        return e.code() == std::errc::no_such_file_or_directory ? exit_code::missing_input : exit_code::internal;
    } catch (const ValidationError& e) {
        err << stage << ": " << e.what() << "\n";
        return exit_code::validation;
    } catch (const ParseError& e) {
        err << stage << ": " << e.what() << "\n";
        return exit_code::validation;
    } catch (const IntegrityError& e) {
        err << stage << ": " << e.what() << "\n";
        return exit_code::validation;
    } catch (const EvaluationError& e) {
        err << stage << ": " << e.what() << "\n";
        return exit_code::validation;
    } catch (const std::exception& e) {
        err << stage << ": internal error: " << e.what() << "\n";
        return exit_code::internal;
    }
}

}  // namespace topicdet
