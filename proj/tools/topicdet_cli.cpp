// topicdet: command-line driver for the topic detection pipeline.

#include <iostream>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "topicdet/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"topic detection pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string seed, jobs;
    app.add_option("--config", config_path, "pipeline config file");
    app.add_option("--seed", seed, "base seed");
    app.add_option("--jobs", jobs, "parallel per-topic jobs");

    struct Binding {
        CLI::App* sub;
        std::string flag;
        std::string key;
        CLI::Option* opt = nullptr;
        std::string value;
    };
    std::vector<std::unique_ptr<Binding>> bindings;
    auto bind = [&](CLI::App* sub, std::string flag, std::string key, const std::string& help) {
        auto b = std::make_unique<Binding>(Binding{sub, std::move(flag), std::move(key), nullptr, {}});
        b->opt = sub->add_option(b->flag, b->value, help);
        bindings.push_back(std::move(b));
    };

    auto* annotate = app.add_subcommand("annotate", "apply topic rules to a raw corpus");
    bind(annotate, "--rules", "paths.rules", "rule file");
    bind(annotate, "--in", "paths.raw_corpus", "raw corpus");
    bind(annotate, "--out", "paths.annotated", "annotated corpus");

    auto* curate = app.add_subcommand("curate", "normalize, deduplicate and filter a corpus");
    bind(curate, "--in", "paths.annotated", "annotated corpus");
    bind(curate, "--out", "paths.corpus", "curated corpus");
    bind(curate, "--report", "paths.curation_report", "curation report");
    bind(curate, "--min-chars", "curation.min_chars", "minimum text length");
    bind(curate, "--top-topics", "curation.top_topics", "keep only documents with one of the N most frequent topics");

    auto* embed = app.add_subcommand("embed", "write document embeddings");
    bind(embed, "--provider", "embed.provider", "hashed|file");
    bind(embed, "--in", "paths.corpus", "corpus");
    bind(embed, "--source", "paths.embeddings_source", "precomputed embedding file (provider=file)");
    bind(embed, "--out", "paths.embeddings", "embedding file");
    bind(embed, "--dim", "embed.dim", "hashed embedding dimension");
    bind(embed, "--embed-seed", "embed.seed", "hashed embedding seed");

    auto* train = app.add_subcommand("train", "train one detector per topic");
    bind(train, "--corpus", "paths.corpus", "curated corpus");
    bind(train, "--embeddings", "paths.embeddings", "embedding file");
    bind(train, "--models", "paths.models", "model directory");
    bind(train, "--topics", "train.topics", "comma list, top:N, or a rule file");
    bind(train, "--head", "head.default", "nn|svm|rf");

    auto* eval = app.add_subcommand("eval", "stratified k-fold evaluation");
    bind(eval, "--corpus", "paths.corpus", "curated corpus");
    bind(eval, "--embeddings", "paths.embeddings", "embedding file");
    bind(eval, "--rules-topics", "train.topics", "comma list, top:N, or a rule file");
    bind(eval, "--head", "head.default", "nn|svm|rf");
    bind(eval, "--k", "eval.k", "number of folds");
    bind(eval, "--out", "paths.eval_table", "text table");
    bind(eval, "--folds-out", "paths.eval_folds", "per-fold records (default: TABLE.jsonl)");
    bind(eval, "--layout", "eval.layout", "by-backbone|by-classifier");

    auto* predict = app.add_subcommand("predict", "score documents with trained detectors");
    bind(predict, "--models", "paths.models", "model directory");
    bind(predict, "--embeddings", "paths.embeddings", "embedding file");
    bind(predict, "--policy", "aggregation.policy", "threshold:T|topk:K");
    bind(predict, "--out", "paths.predictions", "prediction file");

    auto* report = app.add_subcommand("report", "render evaluation tables from fold records");
    bind(report, "--in", "paths.report_inputs", "comma list of fold-record files");
    bind(report, "--layout", "eval.layout", "by-backbone|by-classifier");
    bind(report, "--out", "paths.report_table", "text table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << topicdet::usage_text();
        return topicdet::exit_code::validation;
    }

    const auto* sub = app.get_subcommands().front();
    const std::string stage = sub->get_name();

    topicdet::PipelineConfig cfg;
    try {
        topicdet::SettingList settings;
        if (!config_path.empty()) {
            if (!std::filesystem::exists(config_path)) {
                std::cerr << "config file not found: " << config_path << "\n";
                return topicdet::exit_code::missing_input;
            }
            settings = topicdet::parse_config_text(topicdet::read_file(config_path));
        }
        cfg = topicdet::load_config(settings);
        if (!seed.empty()) topicdet::apply_setting(cfg, "run.seed", seed);
        if (!jobs.empty()) topicdet::apply_setting(cfg, "run.jobs", jobs);
        for (const auto& b : bindings) {
            if (b->sub == sub && b->opt->count() > 0) topicdet::apply_setting(cfg, b->key, b->value);
        }
        if (stage == "eval" && eval->get_option("--out")->count() > 0 && eval->get_option("--folds-out")->count() == 0) {
            cfg.paths.eval_folds = cfg.paths.eval_table + ".jsonl";
        }
    } catch (const std::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return topicdet::exit_code::validation;
    }
    return topicdet::run_stage(stage, cfg, std::cout, std::cerr);
}
