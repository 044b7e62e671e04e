#include <gtest/gtest.h>

#include <sstream>

#include "semfew/experiments.hpp"
#include "semfew/synthetic.hpp"
#include "test_support.hpp"

using namespace semfew;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.train.hidden_dim = 32;
    c.train.epochs = 3;
    c.train.batch_size = 64;
    c.train.learning_rate = 1e-3;
    c.episode.task_count = 20;
    c.k = 0.5;
    return c;
}

ExperimentData small_data() {
    SyntheticSpec s;
    s.base_classes = 8;
    s.novel_classes = 6;
    s.samples_per_class = 30;
    s.visual_dim = 12;
    s.text_dim = 6;
    return from_synthetic(gen_synthetic(s));
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST(Ablation, SourcesShareEpisodesAndLabelRows) {
    const auto d = small_data();
    const auto cfg = small_config();
    const auto rows = run_ablation_sources(d, cfg);
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_EQ(rows[0].experiment, "sources/V=>C");
    EXPECT_EQ(rows[0].semantic_source, "none");
    EXPECT_EQ(rows[1].experiment, "sources/S=>C");
    EXPECT_EQ(rows[2].experiment, "sources/V+S=>C");
    for (const auto& r : rows) {
        EXPECT_EQ(r.episode_seed, cfg.episode.seed);
        EXPECT_EQ(r.report.per_task_accuracy.size(), 20U);
        EXPECT_EQ(r.report.config["seed"], rows[0].report.config["seed"]);
        EXPECT_EQ(r.setting, "5-way 1-shot");
        EXPECT_EQ(r.k, 0.5);
    }
}

TEST(Ablation, VisualOnlyArmNeedsNoSemantics) {
    auto d = small_data();
    d.semantic_sets.clear();
    ExperimentConfig cfg = small_config();
    cfg.train.alignment_source = AlignmentSource::Visual;
    EXPECT_NO_THROW(train_arm(d, cfg, {AlignmentSource::Visual, TargetKind::Mean, SemanticSource::Paraphrase, 0}));
    EXPECT_THROW(run_semantic_grid(d, cfg), MissingSemanticsError);
}

TEST(Ablation, OneClusterPerClassEqualsMeanTarget) {
    const auto d = small_data();
    auto cfg = small_config();
    cfg.clusters_per_class = 1;
    const auto rows = run_ablation_targets(d, cfg);
    ASSERT_EQ(rows.size(), 2U);
    EXPECT_EQ(rows[0].experiment, "targets/mean");
    EXPECT_EQ(rows[1].experiment, "targets/cluster");
    ASSERT_EQ(rows[0].report.per_task_accuracy.size(), rows[1].report.per_task_accuracy.size());
    for (std::size_t t = 0; t < rows[0].report.per_task_accuracy.size(); ++t) {
        EXPECT_NEAR(rows[0].report.per_task_accuracy[t], rows[1].report.per_task_accuracy[t], 1e-12);
    }
}

TEST(Ablation, ClassifiersShareOneNetwork) {
    const auto d = small_data();
    const auto rows = run_ablation_classifiers(d, small_config());
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_EQ(rows[0].classifier, "logistic");
    EXPECT_EQ(rows[1].classifier, "euclidean");
    EXPECT_EQ(rows[2].classifier, "cosine");
}

TEST(Ablation, SemanticGridCoversSources) {
    const auto d = small_data();
    const auto rows = run_semantic_grid(d, small_config());
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_EQ(rows[0].semantic_source, "name_template");
    EXPECT_EQ(rows[1].semantic_source, "definition");
    EXPECT_EQ(rows[2].semantic_source, "paraphrase");
    EXPECT_EQ(rows[0].experiment, "semantics/synthetic-linear");
}

TEST(Reports, CsvColumnsAndRows) {
    const auto d = small_data();
    const auto rows = run_ablation_sources(d, small_config());
    const auto csv = rows_to_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "experiment,dataset,setting,semantic_source,classifier,k,mean_accuracy,ci95,episode_seed");
    EXPECT_EQ(line_count(csv), 4U);
    EXPECT_NE(csv.find("sources/V=>C,synthetic,5-way 1-shot,none,cosine,0.50,"), std::string::npos);
}

TEST(Reports, CsvQuotesSpecialFields) {
    ReportRow r;
    r.experiment = "a,b";
    r.classifier = "say \"hi\"";
    const auto csv = rows_to_csv({r});
    EXPECT_NE(csv.find("\"a,b\""), std::string::npos);
    EXPECT_NE(csv.find("\"say \"\"hi\"\"\""), std::string::npos);
}

TEST(Sweep, CsvHasOneRowPerGridPoint) {
    const auto d = small_data();
    const auto cfg = small_config();
    const auto net = train_arm(d, cfg, {}).network;
    const auto curve = run_sweep(d, cfg, net);
    ASSERT_EQ(curve.size(), 101U);
    const auto csv = sweep_to_csv(curve);
    EXPECT_EQ(line_count(csv), 102U);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,mean_accuracy,ci95");
}

TEST(Scoring, BestKIsMaximumOfSweep) {
    const auto d = small_data();
    auto cfg = small_config();
    const auto net = train_arm(d, cfg, {}).network;
    const auto sem = select_semantics(d, cfg.source);
    const auto curve = run_sweep(d, cfg, net);
    cfg.select_best_k = true;
    const auto best = score(d, cfg, &net, sem, cfg.classifier);
    EXPECT_EQ(best.mean_accuracy, curve[best_point(curve)].report.mean_accuracy);
    EXPECT_EQ(best.config["k"], curve[best_point(curve)].k);
    const auto baseline = score(d, cfg, nullptr, sem, cfg.classifier);
    EXPECT_EQ(baseline.per_task_accuracy, curve[0].report.per_task_accuracy);
}

TEST(Fig5, ForcesOneShot) {
    const auto d = small_data();
    auto cfg = small_config();
    cfg.episode.k_shot = 5;
    const auto net = train_arm(d, cfg, {}).network;
    const auto rep = run_fig5_check(d, cfg, net);
    EXPECT_EQ(rep.pairs, 100U);
    EXPECT_GE(rep.fraction_closer, 0.0);
    EXPECT_LE(rep.fraction_closer, 1.0);
}

TEST(Data, LoadsFromDirectory) {
    semfew::testing::TempDir dir;
    SyntheticSpec s;
    s.samples_per_class = 20;
    const auto syn = gen_synthetic(s);
    write_cache(syn.cache, dir / "cache.sfew");
    ExperimentConfig cfg;
    cfg.paths.data_dir = dir.path();
    auto d = load_experiment_data(cfg);
    EXPECT_EQ(d.cache.raw_values(), syn.cache.raw_values());
    EXPECT_TRUE(d.semantic_sets.empty());
    EXPECT_FALSE(d.reference_centers.has_value());
    store_semantic_embeddings(syn.semantics, dir / "semantics.json");
    save_centers(syn.centers, dir / "centers.json");
    d = load_experiment_data(cfg);
    EXPECT_EQ(d.semantic_sets.size(), 1U);
    EXPECT_TRUE(d.reference_centers.has_value());
    cfg.paths.semantics = {dir / "missing.json"};
    EXPECT_THROW(load_experiment_data(cfg), MissingSemanticsError);
}
