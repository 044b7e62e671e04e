#include <gtest/gtest.h>

#include <fstream>

#include "semfew/config.hpp"
#include "test_support.hpp"

using namespace semfew;

TEST(Config, DefaultProtocol) {
    const ExperimentConfig c;
    EXPECT_EQ(c.train.epochs, 50);
    EXPECT_EQ(c.train.batch_size, 128);
    EXPECT_EQ(c.train.learning_rate, 1e-4);
    EXPECT_EQ(c.train.hidden_dim, 4096U);
    EXPECT_EQ(c.episode.n_way, 5U);
    EXPECT_EQ(c.episode.m_query, 15U);
    EXPECT_EQ(c.episode.task_count, 600U);
    EXPECT_EQ(c.classifier, ClassifierKind::Cosine);
    EXPECT_EQ(c.source, SemanticSource::Paraphrase);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesAllSections) {
    const auto c = parse_config(R"(
[paths]
data_dir = "data"
semantics = ["a.json", "b.json"]

[train]
epochs = 7
hidden_dim = 128
alignment_source = "s"
target = "cluster"
clusters_per_class = 3

[episode]
k_shot = 5
task_count = 42
periphery_bias = 0.5

[eval]
k = 0.3
select_best_k = true
classifier = "EU"
semantic_source = "definition"
workers = 3

[synthetic]
noise_sigma = 1.8
center_rank = 16

[llm]
model_name = "m"
max_retries = 2
name_template = "a {class_name}"
)");
    EXPECT_EQ(c.paths.data_dir, "data");
    EXPECT_EQ(c.paths.semantics.size(), 2U);
    EXPECT_EQ(c.train.epochs, 7);
    EXPECT_EQ(c.train.hidden_dim, 128U);
    EXPECT_EQ(c.train.alignment_source, AlignmentSource::Semantic);
    EXPECT_EQ(c.target, TargetKind::Cluster);
    EXPECT_EQ(c.clusters_per_class, 3U);
    EXPECT_EQ(c.episode.k_shot, 5U);
    EXPECT_EQ(c.episode.task_count, 42U);
    EXPECT_EQ(c.episode.periphery_bias, 0.5);
    EXPECT_EQ(c.k, 0.3);
    EXPECT_TRUE(c.select_best_k);
    EXPECT_EQ(c.classifier, ClassifierKind::Euclidean);
    EXPECT_EQ(c.source, SemanticSource::Definition);
    EXPECT_EQ(c.workers, 3U);
    EXPECT_EQ(c.synthetic.noise_sigma, 1.8);
    EXPECT_EQ(c.synthetic.center_rank, 16U);
    EXPECT_EQ(c.llm.model_name, "m");
    EXPECT_EQ(c.llm.max_retries, 2);
    EXPECT_EQ(c.name_template, "a {class_name}");
}

TEST(Config, UnknownKeysAndSectionsRejected) {
    EXPECT_THROW(parse_config("[train]\nepochz = 3\n"), ConfigError);
    EXPECT_THROW(parse_config("[nope]\nx = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("[train]\nepochs = \"many\"\n"), ConfigError);
    EXPECT_THROW(parse_config("[eval]\nclassifier = \"svm\"\n"), ConfigError);
    EXPECT_THROW(parse_config("[train\n"), ConfigError);
}

TEST(Config, ValidateCatchesRanges) {
    auto c = parse_config("[eval]\nk = 1.5\n");
    EXPECT_THROW(c.validate(), ArgumentError);
    c = parse_config("[eval]\nsweep_step = 0.3\n");
    EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Config, RelativePathsResolveAgainstFile) {
    semfew::testing::TempDir dir;
    std::filesystem::create_directories(dir / "cfg");
    std::ofstream(dir / "cfg/x.toml") << "[paths]\ndata_dir = \"../data\"\nsemantics = [\"s.json\", \"/abs/t.json\"]\n";
    const auto c = load_config(dir / "cfg/x.toml");
    EXPECT_EQ(c.paths.data_dir, dir.path() / "cfg" / "../data");
    EXPECT_EQ(c.paths.semantics[0], dir.path() / "cfg" / "s.json");
    EXPECT_EQ(c.paths.semantics[1], "/abs/t.json");
    EXPECT_EQ(c.paths.cache_file(), dir.path() / "cfg" / "../data" / "cache.sfew");
}

TEST(Config, SnapshotHasNoPaths) {
    ExperimentConfig c;
    c.paths.data_dir = "/somewhere/private";
    const auto s = c.snapshot().dump();
    EXPECT_EQ(s.find("somewhere"), std::string::npos);
    EXPECT_NE(s.find("\"classifier\":\"cosine\""), std::string::npos);
}

TEST(Config, TargetKindNames) {
    EXPECT_EQ(parse_target_kind("mean"), TargetKind::Mean);
    EXPECT_EQ(parse_target_kind(to_string(TargetKind::Cluster)), TargetKind::Cluster);
    EXPECT_THROW(parse_target_kind("median"), ArgumentError);
}
