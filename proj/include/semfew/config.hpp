#pragma once

// Experiment configuration read from TOML. Every key is optional; unknown keys
// are rejected.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "semfew/alignment_net.hpp"
#include "semfew/checkpoint.hpp"
#include "semfew/episodic.hpp"
#include "semfew/errors.hpp"
#include "semfew/evaluation.hpp"
#include "semfew/llm_client.hpp"
#include "semfew/semantic_evolution.hpp"
#include "semfew/synthetic.hpp"
#include "semfew/training.hpp"

namespace semfew {

enum class TargetKind { Mean, Cluster };

inline constexpr std::string_view to_string(TargetKind t) { return t == TargetKind::Mean ? "mean" : "cluster"; }

inline TargetKind parse_target_kind(std::string_view text) {
    if (text == "mean") {
        return TargetKind::Mean;
    }
    if (text == "cluster") {
        return TargetKind::Cluster;
    }
    throw ArgumentError("unknown prototype target '" + std::string(text) + "' (expected mean or cluster)");
}

/// Files of one run. Empty paths resolve against `data_dir`.
struct ExperimentPaths {
    std::filesystem::path data_dir = ".";
    std::filesystem::path cache;
    std::vector<std::filesystem::path> semantics; ///< one file per text encoder; the first is the default
    std::filesystem::path centers;                ///< reference centers for the proximity check
    std::filesystem::path checkpoint;
    std::filesystem::path output_dir;
    std::filesystem::path definitions;
    std::filesystem::path classes;
    std::filesystem::path corpus;
    std::filesystem::path llm_cache;

    std::filesystem::path cache_file() const { return cache.empty() ? data_dir / "cache.sfew" : cache; }
    std::vector<std::filesystem::path> semantics_files() const {
        return semantics.empty() ? std::vector{data_dir / "semantics.json"} : semantics;
    }
    std::filesystem::path centers_file() const { return centers.empty() ? data_dir / "centers.json" : centers; }
    std::filesystem::path checkpoint_file() const { return checkpoint.empty() ? data_dir / "net.ckpt" : checkpoint; }
    std::filesystem::path output() const { return output_dir.empty() ? data_dir : output_dir; }
    std::filesystem::path definitions_file() const {
        return definitions.empty() ? data_dir / "definitions.json" : definitions;
    }
    std::filesystem::path classes_file() const { return classes.empty() ? data_dir / "classes.json" : classes; }
    std::filesystem::path corpus_file() const { return corpus.empty() ? data_dir / "corpus.json" : corpus; }
    std::filesystem::path llm_cache_dir() const { return llm_cache.empty() ? data_dir / "llm_cache" : llm_cache; }
};

struct ExperimentConfig {
    ExperimentPaths paths;
    TrainConfig train;
    TargetKind target = TargetKind::Mean;
    std::size_t clusters_per_class = 2;
    std::uint64_t cluster_seed = 0;
    EpisodeSpec episode;
    double k = 0.0;
    bool select_best_k = false; ///< report the best point of the k sweep instead of the fixed k
    double sweep_step = 0.01;
    ClassifierKind classifier = ClassifierKind::Cosine;
    SemanticSource source = SemanticSource::Paraphrase;
    unsigned workers = 1;
    SyntheticSpec synthetic;
    LlmConfig llm;
    std::string name_template{default_name_template};

    void validate() const {
        train.validate();
        episode.validate();
        if (!(k >= 0.0 && k <= 1.0)) {
            throw ArgumentError("fusion factor k must lie in [0, 1]");
        }
        if (clusters_per_class < 1) {
            throw ArgumentError("clusters_per_class must be >= 1");
        }
        fusion_grid(sweep_step);
        llm.validate();
    }

    /// Seeds and settings that determine results; no file paths.
    nlohmann::json snapshot() const {
        return {{"train", train_config_to_json(train)},
                {"target", to_string(target)},
                {"clusters_per_class", clusters_per_class},
                {"cluster_seed", cluster_seed},
                {"episode", detail::spec_to_json(episode)},
                {"k", k},
                {"select_best_k", select_best_k},
                {"sweep_step", sweep_step},
                {"classifier", to_string(classifier)},
                {"semantic_source", to_string(source)}};
    }
};

namespace detail {

class TomlSection {
  public:
    TomlSection(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    template <class T>
    void read(const char* key, T& out) {
        known_.insert(key);
        if (table_ == nullptr) {
            return;
        }
        const toml::node* node = table_->get(key);
        if (node == nullptr) {
            return;
        }
        if constexpr (std::is_same_v<T, bool>) {
            out = require(node->value<bool>(), key, "a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            const auto v = require(node->value<std::int64_t>(), key, "an integer");
            if (v < 0 && std::is_unsigned_v<T>) {
                fail(key, "a non-negative integer");
            }
            out = static_cast<T>(v);
        } else if constexpr (std::is_floating_point_v<T>) {
            out = require(node->value<double>(), key, "a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            out = require(node->value<std::string>(), key, "a string");
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
            out = require(node->value<std::string>(), key, "a string");
        } else {
            static_assert(std::is_same_v<T, std::vector<std::filesystem::path>>);
            const auto* arr = node->as_array();
            if (arr == nullptr) {
                fail(key, "an array of strings");
            }
            out.clear();
            for (const auto& item : *arr) {
                out.emplace_back(require(item.value<std::string>(), key, "an array of strings"));
            }
        }
    }

    template <class Parse, class T>
    void read_enum(const char* key, T& out, Parse parse) {
        std::string tmp;
        known_.insert(key);
        if (table_ != nullptr && table_->get(key) != nullptr) {
            read(key, tmp);
            out = parse(tmp);
        }
    }

    void reject_unknown() const {
        if (table_ == nullptr) {
            return;
        }
        for (const auto& [key, node] : *table_) {
            if (!known_.contains(std::string(key.str()))) {
                throw ConfigError("unknown key '" + name_ + "." + std::string(key.str()) + "'");
            }
        }
    }

  private:
    template <class V>
    V require(std::optional<V> v, const char* key, const char* what) const {
        if (!v) {
            fail(key, what);
        }
        return *v;
    }

    [[noreturn]] void fail(const char* key, const char* what) const {
        throw ConfigError("'" + name_ + "." + key + "' must be " + what);
    }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> known_;
};

} // namespace detail

inline ExperimentConfig config_from_toml(const toml::table& root, const std::filesystem::path& base_dir = {}) {
    static const std::set<std::string> sections = {"paths", "train", "episode", "eval", "synthetic", "llm"};
    for (const auto& [key, node] : root) {
        if (!sections.contains(std::string(key.str())) || !node.is_table()) {
            throw ConfigError("unknown config section '" + std::string(key.str()) + "'");
        }
    }
    auto section = [&](const char* name) { return detail::TomlSection(root[name].as_table(), name); };
    ExperimentConfig c;

    try {
        auto p = section("paths");
        p.read("data_dir", c.paths.data_dir);
        p.read("cache", c.paths.cache);
        p.read("semantics", c.paths.semantics);
        p.read("centers", c.paths.centers);
        p.read("checkpoint", c.paths.checkpoint);
        p.read("output_dir", c.paths.output_dir);
        p.read("definitions", c.paths.definitions);
        p.read("classes", c.paths.classes);
        p.read("corpus", c.paths.corpus);
        p.read("llm_cache", c.paths.llm_cache);
        p.reject_unknown();

        auto t = section("train");
        t.read("epochs", c.train.epochs);
        t.read("batch_size", c.train.batch_size);
        t.read("learning_rate", c.train.learning_rate);
        t.read("hidden_dim", c.train.hidden_dim);
        t.read("seed", c.train.seed);
        t.read("adam_beta1", c.train.adam_beta1);
        t.read("adam_beta2", c.train.adam_beta2);
        t.read("adam_eps", c.train.adam_eps);
        t.read_enum("alignment_source", c.train.alignment_source, parse_alignment_source);
        t.read("leaky_slope", c.train.leaky_slope);
        t.read("use_bias", c.train.use_bias);
        t.read_enum("target", c.target, parse_target_kind);
        t.read("clusters_per_class", c.clusters_per_class);
        t.read("cluster_seed", c.cluster_seed);
        t.reject_unknown();

        auto e = section("episode");
        e.read("n_way", c.episode.n_way);
        e.read("k_shot", c.episode.k_shot);
        e.read("m_query", c.episode.m_query);
        e.read("task_count", c.episode.task_count);
        e.read("split", c.episode.split);
        e.read("seed", c.episode.seed);
        e.read("periphery_bias", c.episode.periphery_bias);
        e.reject_unknown();

        auto v = section("eval");
        v.read("k", c.k);
        v.read("select_best_k", c.select_best_k);
        v.read("sweep_step", c.sweep_step);
        v.read_enum("classifier", c.classifier, parse_classifier);
        v.read_enum("semantic_source", c.source, parse_semantic_source);
        v.read("workers", c.workers);
        v.reject_unknown();

        auto s = section("synthetic");
        s.read("base_classes", c.synthetic.base_classes);
        s.read("val_classes", c.synthetic.val_classes);
        s.read("novel_classes", c.synthetic.novel_classes);
        s.read("samples_per_class", c.synthetic.samples_per_class);
        s.read("visual_dim", c.synthetic.visual_dim);
        s.read("text_dim", c.synthetic.text_dim);
        s.read("center_scale", c.synthetic.center_scale);
        s.read("noise_sigma", c.synthetic.noise_sigma);
        s.read("seed", c.synthetic.seed);
        s.read("semantic_map_seed", c.synthetic.semantic_map_seed);
        s.read("periphery_bias", c.synthetic.periphery_bias);
        s.read("center_rank", c.synthetic.center_rank);
        s.read("semantic_gain", c.synthetic.semantic_gain);
        s.read("paraphrase_noise", c.synthetic.paraphrase_noise);
        s.read("definition_noise", c.synthetic.definition_noise);
        s.read("name_noise", c.synthetic.name_noise);
        s.read("dataset_name", c.synthetic.dataset_name);
        s.reject_unknown();

        auto l = section("llm");
        l.read("endpoint_url", c.llm.endpoint_url);
        l.read("model_name", c.llm.model_name);
        l.read("api_key_env_var", c.llm.api_key_env_var);
        l.read("max_retries", c.llm.max_retries);
        l.read("timeout_seconds", c.llm.timeout_seconds);
        l.read("temperature", c.llm.temperature);
        l.read("backoff_base_seconds", c.llm.backoff_base_seconds);
        l.read("backoff_factor", c.llm.backoff_factor);
        l.read("name_template", c.name_template);
        l.reject_unknown();
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }

    if (!base_dir.empty()) {
        for (auto* path : {&c.paths.data_dir, &c.paths.cache, &c.paths.centers, &c.paths.checkpoint,
                           &c.paths.output_dir, &c.paths.definitions, &c.paths.classes, &c.paths.corpus,
                           &c.paths.llm_cache}) {
            if (!path->empty() && path->is_relative()) {
                *path = base_dir / *path;
            }
        }
        for (auto& path : c.paths.semantics) {
            if (path.is_relative()) {
                path = base_dir / path;
            }
        }
    }
    return c;
}

inline ExperimentConfig parse_config(std::string_view text) {
    try {
        return config_from_toml(toml::parse(text));
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string("invalid TOML: ") + std::string(e.description()));
    }
}

/// Relative paths in the file resolve against the file's directory.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
    try {
        return config_from_toml(toml::parse_file(path.string()), path.parent_path());
    } catch (const toml::parse_error& e) {
        throw ConfigError(path.string() + ": " + std::string(e.description()));
    }
}

} // namespace semfew
