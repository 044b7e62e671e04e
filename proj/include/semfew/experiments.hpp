#pragma once

// Ablation drivers and report emission. Compared arms always share the
// episode spec, so they are scored on identical tasks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semfew/clustering.hpp"
#include "semfew/config.hpp"
#include "semfew/evaluation.hpp"
#include "semfew/feature_store.hpp"
#include "semfew/semantic_evolution.hpp"
#include "semfew/training.hpp"

namespace semfew {

/// Inputs of one experiment, loaded once and shared by every arm.
struct ExperimentData {
    FeatureCache cache;
    std::vector<SemanticEmbeddingSet> semantic_sets; ///< one per text encoder
    std::optional<ClassCenterSet> reference_centers;
};

/// Missing semantics files are tolerated (V=>C needs none); a missing
/// reference-center file falls back to split means where needed.
inline ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
    ExperimentData d;
    d.cache = read_cache(cfg.paths.cache_file());
    for (const auto& path : cfg.paths.semantics_files()) {
        if (std::filesystem::exists(path)) {
            d.semantic_sets.push_back(load_semantic_embeddings(path));
        } else if (!cfg.paths.semantics.empty()) {
            throw MissingSemanticsError("semantic embedding file not found: " + path.string());
        }
    }
    if (std::filesystem::exists(cfg.paths.centers_file())) {
        d.reference_centers = load_centers(cfg.paths.centers_file());
    }
    return d;
}

inline ExperimentData from_synthetic(const SyntheticData& s) {
    return {s.cache, {s.semantics}, s.centers};
}

struct ReportRow {
    std::string experiment;
    std::string dataset;
    std::string setting; ///< "N-way K-shot"
    std::string semantic_source;
    std::string classifier;
    double k = 0.0;
    std::uint64_t episode_seed = 0;
    EvalReport report;
};

inline std::string setting_label(const EpisodeSpec& spec) {
    return std::to_string(spec.n_way) + "-way " + std::to_string(spec.k_shot) + "-shot";
}

inline const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols = {"experiment", "dataset",       "setting", "semantic_source",
                                                  "classifier", "k",             "mean_accuracy", "ci95",
                                                  "episode_seed"};
    return cols;
}

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

} // namespace detail

inline std::string rows_to_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    const auto& cols = report_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out << (i ? "," : "") << cols[i];
    }
    out << '\n';
    for (const auto& r : rows) {
        out << detail::csv_field(r.experiment) << ',' << detail::csv_field(r.dataset) << ','
            << detail::csv_field(r.setting) << ',' << detail::csv_field(r.semantic_source) << ','
            << detail::csv_field(r.classifier) << ',' << detail::fixed(r.k, 2) << ','
            << detail::fixed(r.report.mean_accuracy, 6) << ',' << detail::fixed(r.report.ci95, 6) << ','
            << r.episode_seed << '\n';
    }
    return out.str();
}

inline std::string sweep_to_csv(const std::vector<SweepPoint>& curve) {
    std::ostringstream out;
    out << "k,mean_accuracy,ci95\n";
    for (const auto& p : curve) {
        out << detail::fixed(p.k, 2) << ',' << detail::fixed(p.report.mean_accuracy, 6) << ','
            << detail::fixed(p.report.ci95, 6) << '\n';
    }
    return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    detail::write_file_atomic(path, text);
}

// ---- building blocks -----------------------------------------------------------------

/// Class vectors of one source from encoder set `set_index`; empty when no set is loaded.
inline ClassSemanticVectors select_semantics(const ExperimentData& d, SemanticSource source,
                                             std::size_t set_index = 0) {
    if (set_index >= d.semantic_sets.size()) {
        return {};
    }
    return d.semantic_sets[set_index].for_source(source);
}

inline ClassCenterSet training_targets(const FeatureCache& cache, TargetKind target, std::size_t clusters_per_class,
                                       std::uint64_t seed) {
    return target == TargetKind::Mean ? class_centers(cache, split::base)
                                      : cluster_centers(cache, split::base, clusters_per_class, seed);
}

/// Reference centers of the evaluation split: ground truth when available,
/// otherwise the split means.
inline ClassCenterSet reference_centers(const ExperimentData& d, const std::string& split_name) {
    if (d.reference_centers) {
        return *d.reference_centers;
    }
    return class_centers(d.cache, split_name);
}

inline std::optional<PeripheryPools> periphery_for(const ExperimentData& d, const EpisodeSpec& spec) {
    if (spec.periphery_bias <= 0.0) {
        return std::nullopt;
    }
    return periphery_pools(d.cache, spec.split, reference_centers(d, spec.split));
}

struct ArmSetup {
    AlignmentSource alignment = AlignmentSource::VisualSemantic;
    TargetKind target = TargetKind::Mean;
    SemanticSource source = SemanticSource::Paraphrase;
    std::size_t set_index = 0;
};

inline TrainResult train_arm(const ExperimentData& d, const ExperimentConfig& cfg, const ArmSetup& arm) {
    TrainConfig tc = cfg.train;
    tc.alignment_source = arm.alignment;
    const auto targets = training_targets(d.cache, arm.target, cfg.clusters_per_class, cfg.cluster_seed);
    const auto sem = uses_semantic(arm.alignment) ? select_semantics(d, arm.source, arm.set_index)
                                                  : ClassSemanticVectors{};
    return train(d.cache, sem, targets, tc);
}

/// Scores a network at the configured k, or at the best sweep point when
/// `cfg.select_best_k` is set.
inline EvalReport score(const ExperimentData& d, const ExperimentConfig& cfg, const AlignmentNetwork* net,
                        const ClassSemanticVectors& sem, ClassifierKind kind) {
    const auto pools = periphery_for(d, cfg.episode);
    const EvalContext ctx{&d.cache, net, &sem, pools ? &*pools : nullptr, cfg.workers};
    if (cfg.select_best_k && net != nullptr) {
        auto curve = sweep_k(ctx, cfg.episode, kind, cfg.sweep_step);
        return std::move(curve[best_point(curve)].report);
    }
    return evaluate(ctx, cfg.episode, cfg.k, kind);
}

inline ReportRow make_row(const ExperimentData& d, const ExperimentConfig& cfg, std::string experiment,
                          std::string semantic_source, ClassifierKind kind, EvalReport report) {
    ReportRow row;
    row.experiment = std::move(experiment);
    row.dataset = d.cache.header().dataset_name;
    row.setting = setting_label(cfg.episode);
    row.semantic_source = std::move(semantic_source);
    row.classifier = std::string(to_string(kind));
    row.k = report.config.value("k", 0.0);
    row.episode_seed = cfg.episode.seed;
    row.report = std::move(report);
    return row;
}

// ---- drivers -------------------------------------------------------------------------

/// V=>C, S=>C and V+S=>C networks, differing only in their input.
inline std::vector<ReportRow> run_ablation_sources(const ExperimentData& d, const ExperimentConfig& cfg) {
    const std::pair<AlignmentSource, const char*> arms[] = {{AlignmentSource::Visual, "sources/V=>C"},
                                                            {AlignmentSource::Semantic, "sources/S=>C"},
                                                            {AlignmentSource::VisualSemantic, "sources/V+S=>C"}};
    std::vector<ReportRow> rows;
    for (const auto& [alignment, name] : arms) {
        const auto trained = train_arm(d, cfg, {alignment, cfg.target, cfg.source, 0});
        const auto sem = uses_semantic(alignment) ? select_semantics(d, cfg.source) : ClassSemanticVectors{};
        rows.push_back(make_row(d, cfg, name, uses_semantic(alignment) ? std::string(to_string(cfg.source)) : "none",
                                cfg.classifier, score(d, cfg, &trained.network, sem, cfg.classifier)));
    }
    return rows;
}

/// Training targets from class means versus the largest k-means cluster.
inline std::vector<ReportRow> run_ablation_targets(const ExperimentData& d, const ExperimentConfig& cfg) {
    std::vector<ReportRow> rows;
    const auto sem = select_semantics(d, cfg.source);
    for (TargetKind target : {TargetKind::Mean, TargetKind::Cluster}) {
        const auto trained = train_arm(d, cfg, {cfg.train.alignment_source, target, cfg.source, 0});
        rows.push_back(make_row(d, cfg, "targets/" + std::string(to_string(target)), std::string(to_string(cfg.source)),
                                cfg.classifier, score(d, cfg, &trained.network, sem, cfg.classifier)));
    }
    return rows;
}

/// One network scored under every classifier.
inline std::vector<ReportRow> run_ablation_classifiers(const ExperimentData& d, const ExperimentConfig& cfg) {
    const auto trained = train_arm(d, cfg, {cfg.train.alignment_source, cfg.target, cfg.source, 0});
    const auto sem = select_semantics(d, cfg.source);
    std::vector<ReportRow> rows;
    for (ClassifierKind kind : {ClassifierKind::LogisticRegression, ClassifierKind::Euclidean, ClassifierKind::Cosine}) {
        rows.push_back(make_row(d, cfg, "classifiers/" + std::string(to_string(kind)),
                                std::string(to_string(cfg.source)), kind, score(d, cfg, &trained.network, sem, kind)));
    }
    return rows;
}

/// Every semantic source under every loaded text encoder.
inline std::vector<ReportRow> run_semantic_grid(const ExperimentData& d, const ExperimentConfig& cfg) {
    if (d.semantic_sets.empty()) {
        throw MissingSemanticsError("semantic grid needs at least one embedding set");
    }
    std::vector<ReportRow> rows;
    for (std::size_t s = 0; s < d.semantic_sets.size(); ++s) {
        for (SemanticSource source :
             {SemanticSource::NameTemplate, SemanticSource::Definition, SemanticSource::Paraphrase}) {
            const auto trained = train_arm(d, cfg, {cfg.train.alignment_source, cfg.target, source, s});
            const auto sem = select_semantics(d, source, s);
            rows.push_back(make_row(d, cfg, "semantics/" + d.semantic_sets[s].encoder_name(),
                                    std::string(to_string(source)), cfg.classifier,
                                    score(d, cfg, &trained.network, sem, cfg.classifier)));
        }
    }
    return rows;
}

inline std::vector<SweepPoint> run_sweep(const ExperimentData& d, const ExperimentConfig& cfg,
                                         const AlignmentNetwork& net) {
    const auto sem = select_semantics(d, cfg.source);
    const auto pools = periphery_for(d, cfg.episode);
    const EvalContext ctx{&d.cache, &net, &sem, pools ? &*pools : nullptr, cfg.workers};
    return sweep_k(ctx, cfg.episode, cfg.classifier, cfg.sweep_step);
}

/// Proximity of reconstructed versus support-mean prototypes to the reference
/// centers, over one-shot episodes.
inline ProximityReport run_fig5_check(const ExperimentData& d, const ExperimentConfig& cfg,
                                      const AlignmentNetwork& net) {
    EpisodeSpec spec = cfg.episode;
    spec.k_shot = 1;
    const auto sem = select_semantics(d, cfg.source);
    const auto pools = periphery_for(d, spec);
    const EvalContext ctx{&d.cache, &net, &sem, pools ? &*pools : nullptr, cfg.workers};
    return prototype_proximity(ctx, spec, reference_centers(d, spec.split));
}

} // namespace semfew
