#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "semfew/episodic.hpp"
#include "test_support.hpp"

using namespace semfew;
using semfew::testing::random_cache;

namespace {

FeatureCache line_cache(const std::vector<std::pair<ClassId, std::vector<float>>>& rows) {
    FeatureCacheHeader h;
    h.visual_dim = static_cast<std::uint32_t>(rows.front().second.size());
    std::set<ClassId> ids;
    std::vector<FeatureRecord> recs;
    for (const auto& [id, v] : rows) {
        ids.insert(id);
        recs.push_back({id, v});
    }
    h.split_table[split::novel] = {ids.begin(), ids.end()};
    h.record_count = recs.size();
    return FeatureCache::from_records(h, recs);
}

} // namespace

TEST(EpisodeSpecDefaults, FiveWayProtocol) {
    const EpisodeSpec s;
    EXPECT_EQ(s.m_query, 15U);
    EXPECT_EQ(s.task_count, 600U);
    EpisodeSpec bad;
    bad.n_way = 1;
    EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(SampleEpisode, ReproducibleInIsolation) {
    const auto cache = random_cache(0, 12, 30, 3, 1);
    EpisodeSpec spec;
    spec.seed = 77;
    EXPECT_EQ(sample_episode(cache, spec, 41), sample_episode(cache, spec, 41));
    EXPECT_NE(sample_episode(cache, spec, 41), sample_episode(cache, spec, 42));
}

TEST(SampleEpisode, StructureInvariants) {
    const auto cache = random_cache(0, 10, 25, 3, 2);
    EpisodeSpec spec;
    spec.k_shot = 3;
    spec.m_query = 7;
    for (std::size_t t = 0; t < 50; ++t) {
        const auto ep = sample_episode(cache, spec, t);
        ASSERT_EQ(ep.class_ids.size(), 5U);
        EXPECT_EQ(std::set<ClassId>(ep.class_ids.begin(), ep.class_ids.end()).size(), 5U);
        for (std::size_t c = 0; c < 5; ++c) {
            EXPECT_EQ(ep.support[c].size(), 3U);
            EXPECT_EQ(ep.query[c].size(), 7U);
            std::set<std::size_t> all(ep.support[c].begin(), ep.support[c].end());
            all.insert(ep.query[c].begin(), ep.query[c].end());
            EXPECT_EQ(all.size(), 10U);
            for (std::size_t r : all) {
                EXPECT_EQ(cache.class_id(r), ep.class_ids[c]);
            }
        }
    }
}

TEST(SampleEpisode, TooSmallClassIsSamplingError) {
    const auto cache = random_cache(0, 6, 10, 2, 3);
    EpisodeSpec spec;
    spec.k_shot = 1;
    spec.m_query = 10;
    EXPECT_THROW(sample_episode(cache, spec, 0), SamplingError);
    spec.m_query = 5;
    spec.n_way = 7;
    EXPECT_THROW(sample_episode(cache, spec, 0), SamplingError);
}

TEST(SampleEpisode, ClassFrequenciesWithinBinomialBound) {
    const auto cache = random_cache(0, 20, 16, 1, 4);
    EpisodeSpec spec;
    spec.m_query = 1;
    constexpr int draws = 10000;
    std::map<ClassId, int> count;
    for (std::size_t t = 0; t < draws; ++t) {
        for (ClassId id : sample_episode(cache, spec, t).class_ids) {
            ++count[id];
        }
    }
    const double p = 5.0 / 20.0;
    const double mean = draws * p;
    const double sigma = std::sqrt(draws * p * (1 - p));
    ASSERT_EQ(count.size(), 20U);
    for (const auto& [id, c] : count) {
        EXPECT_LE(std::abs(c - mean), 3 * sigma) << "class " << id;
    }
}

TEST(SampleEpisode, PeripherySupportComesFromPool) {
    const auto cache = random_cache(0, 6, 40, 4, 5);
    const auto centers = class_centers(cache, split::novel);
    const auto pools = periphery_pools(cache, split::novel, centers);
    for (const auto& [id, pool] : pools) {
        EXPECT_EQ(pool.size(), 10U);
        double min_in = 1e300;
        for (std::size_t r : pool) {
            min_in = std::min(min_in, (cache.row(r).cast<double>() - centers.at(id)).norm());
        }
        for (std::size_t r : cache.records_of(id)) {
            if (std::find(pool.begin(), pool.end(), r) == pool.end()) {
                EXPECT_LE((cache.row(r).cast<double>() - centers.at(id)).norm(), min_in);
            }
        }
    }
    EpisodeSpec spec;
    spec.periphery_bias = 1.0;
    spec.k_shot = 2;
    for (std::size_t t = 0; t < 30; ++t) {
        const auto ep = sample_episode(cache, spec, t, &pools);
        for (std::size_t c = 0; c < ep.class_ids.size(); ++c) {
            for (std::size_t r : ep.support[c]) {
                const auto& pool = pools.at(ep.class_ids[c]);
                EXPECT_NE(std::find(pool.begin(), pool.end(), r), pool.end());
            }
            for (std::size_t r : ep.query[c]) {
                EXPECT_EQ(std::find(ep.support[c].begin(), ep.support[c].end(), r), ep.support[c].end());
            }
        }
    }
    EXPECT_THROW(sample_episode(cache, spec, 0), ArgumentError);
}

TEST(SupportMean, SmallCases) {
    const auto cache = line_cache({{0, {1, 0}}, {0, {0, 1}}, {1, {3, 4}}});
    Episode ep{{0, 1}, {{0, 1}, {2}}, {{}, {}}};
    const auto u = support_mean(ep, cache);
    EXPECT_EQ(u[0], Eigen::Vector2d(0.5, 0.5));
    EXPECT_EQ(u[1], Eigen::Vector2d(3, 4));
}

TEST(SupportMean, MatchesLoopOracle) {
    const auto cache = random_cache(0, 5, 20, 6, 6);
    EpisodeSpec spec;
    spec.k_shot = 5;
    const auto ep = sample_episode(cache, spec, 3);
    const auto u = support_mean(ep, cache);
    for (std::size_t c = 0; c < 5; ++c) {
        for (std::size_t d = 0; d < 6; ++d) {
            double s = 0.0;
            for (std::size_t r : ep.support[c]) {
                s += cache.vector(r)[d];
            }
            EXPECT_NEAR(u[c][static_cast<Eigen::Index>(d)], s / 5.0, 1e-12);
        }
    }
}

TEST(Reconstruct, ForwardEachSupportThenAverage) {
    const auto cache = random_cache(0, 5, 20, 4, 7);
    const auto net = init_network(4, 3, 16, 1, AlignmentSource::VisualSemantic);
    ClassSemanticVectors sem;
    for (ClassId id : cache.classes_in(split::novel)) {
        sem[id] = Eigen::Vector3d(0.1 * id, -0.5, 1.0);
    }
    EpisodeSpec spec;
    spec.k_shot = 4;
    const auto ep = sample_episode(cache, spec, 0);
    const auto r = reconstruct(net, ep, cache, sem);
    bool averaging_order_matters = false;
    for (std::size_t c = 0; c < 5; ++c) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(4);
        Eigen::VectorXd mean_input = Eigen::VectorXd::Zero(4);
        for (std::size_t rec : ep.support[c]) {
            acc += forward(net, cache.row(rec).cast<double>(), sem.at(ep.class_ids[c]));
            mean_input += cache.row(rec).cast<double>();
        }
        EXPECT_LT((r[c] - acc / 4.0).norm(), 1e-12);
        const auto swapped = forward(net, mean_input / 4.0, sem.at(ep.class_ids[c]));
        averaging_order_matters |= (swapped - r[c]).norm() > 1e-9;
    }
    EXPECT_TRUE(averaging_order_matters);
}

TEST(Reconstruct, SingleShotIsOneForward) {
    const auto cache = random_cache(0, 5, 20, 4, 8);
    const auto net = init_network(4, 2, 8, 1, AlignmentSource::VisualSemantic);
    ClassSemanticVectors sem;
    for (ClassId id : cache.classes_in(split::novel)) {
        sem[id] = Eigen::Vector2d(id, 1);
    }
    const auto ep = sample_episode(cache, EpisodeSpec{}, 2);
    const auto r = reconstruct(net, ep, cache, sem);
    for (std::size_t c = 0; c < 5; ++c) {
        EXPECT_EQ(r[c], forward(net, cache.row(ep.support[c][0]).cast<double>(), sem.at(ep.class_ids[c])));
    }
}

TEST(Reconstruct, IdenticalSupportGivesSingleOutput) {
    const auto cache = line_cache({{0, {1, 2}}, {0, {1, 2}}, {0, {1, 2}}, {1, {0, 1}}, {1, {0, 1}}, {1, {0, 1}}});
    const auto net = init_network(2, 1, 8, 1, AlignmentSource::VisualSemantic);
    ClassSemanticVectors sem{{0, Eigen::VectorXd::Constant(1, 0.3)}, {1, Eigen::VectorXd::Constant(1, -0.3)}};
    const Episode ep{{0, 1}, {{0, 1, 2}, {3, 4, 5}}, {{}, {}}};
    const auto r = reconstruct(net, ep, cache, sem);
    EXPECT_LT((r[0] - forward(net, Eigen::Vector2d(1, 2), sem.at(0))).norm(), 1e-14);
}

TEST(Reconstruct, MissingSemanticRaises) {
    const auto cache = random_cache(0, 5, 20, 4, 9);
    const auto net = init_network(4, 2, 8, 1, AlignmentSource::VisualSemantic);
    EXPECT_THROW(reconstruct(net, sample_episode(cache, EpisodeSpec{}, 0), cache, {}), MissingSemanticsError);
    const auto vnet = init_network(4, 0, 8, 1, AlignmentSource::Visual);
    EXPECT_NO_THROW(reconstruct(vnet, sample_episode(cache, EpisodeSpec{}, 0), cache, {}));
}

TEST(Fuse, EndpointsAndMidpoint) {
    const Eigen::Vector2d r(2, 0);
    const Eigen::Vector2d u(0, 2);
    EXPECT_EQ(fuse(r, u, 0.0), u);
    EXPECT_EQ(fuse(r, u, 1.0), r);
    EXPECT_EQ(fuse(r, u, 0.5), Eigen::Vector2d(1, 1));
    EXPECT_THROW(fuse(r, u, 1.5), ArgumentError);
    EXPECT_THROW(fuse(r, u, -0.01), ArgumentError);
    EXPECT_THROW(fuse(r, Eigen::Vector3d(1, 2, 3), 0.5), DimensionError);
}

TEST(Classify, CosineHandSoftmax) {
    const std::vector<Eigen::VectorXd> protos{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
    const auto c = classify(Eigen::Vector2d(1, 0), protos, ClassifierKind::Cosine);
    EXPECT_EQ(c.predicted, 0U);
    EXPECT_NEAR(c.probabilities[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-12);
    EXPECT_NEAR(c.probabilities[0], 0.7311, 1e-4);
    EXPECT_NEAR(c.probabilities[1], 0.2689, 1e-4);
}

TEST(Classify, IdenticalPrototypesAreUniform) {
    const std::vector<Eigen::VectorXd> protos(4, Eigen::Vector3d(1, 2, 3));
    for (auto kind : {ClassifierKind::Cosine, ClassifierKind::Euclidean}) {
        const auto c = classify(Eigen::Vector3d(-1, 0, 2), protos, kind);
        for (double p : c.probabilities) {
            EXPECT_NEAR(p, 0.25, 1e-15);
        }
        EXPECT_EQ(c.predicted, 0U);
    }
}

TEST(Classify, ProbabilitiesSumToOneAndScaleInvariance) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Eigen::VectorXd> protos;
        for (int i = 0; i < 5; ++i) {
            protos.push_back(semfew::testing::random_matrix(8, 1, rng));
        }
        const Eigen::VectorXd q = semfew::testing::random_matrix(8, 1, rng);
        for (auto kind : {ClassifierKind::Cosine, ClassifierKind::Euclidean}) {
            const auto c = classify(q, protos, kind);
            double s = 0.0;
            for (double p : c.probabilities) {
                s += p;
            }
            EXPECT_NEAR(s, 1.0, 1e-9);
        }
        const auto a = classify(q, protos, ClassifierKind::Cosine);
        const auto b = classify(3.7 * q, protos, ClassifierKind::Cosine);
        EXPECT_EQ(a.predicted, b.predicted);
        for (int i = 0; i < 5; ++i) {
            EXPECT_NEAR(a.probabilities[static_cast<std::size_t>(i)], b.probabilities[static_cast<std::size_t>(i)],
                        1e-12);
        }
    }
}

TEST(Classify, EuclideanPicksNearest) {
    const std::vector<Eigen::VectorXd> protos{Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 10)};
    EXPECT_EQ(classify(Eigen::Vector2d(9, 8), protos, ClassifierKind::Euclidean).predicted, 1U);
}

TEST(Classify, ZeroVectorUnderCosineRaises) {
    const std::vector<Eigen::VectorXd> protos{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)};
    EXPECT_THROW(classify(Eigen::Vector2d(1, 0), protos, ClassifierKind::Cosine), NumericsError);
    EXPECT_THROW(classify(Eigen::Vector2d(0, 0), std::span(protos).subspan(1), ClassifierKind::Cosine), NumericsError);
}

TEST(Classify, ParseNames) {
    EXPECT_EQ(parse_classifier("LR"), ClassifierKind::LogisticRegression);
    EXPECT_EQ(parse_classifier("euclidean"), ClassifierKind::Euclidean);
    EXPECT_EQ(parse_classifier(to_string(ClassifierKind::Cosine)), ClassifierKind::Cosine);
    EXPECT_THROW(parse_classifier("svm"), ArgumentError);
}

TEST(LogisticRegression, SeparatesEasyClasses) {
    const auto cache = line_cache({{0, {1, 0.1F}}, {0, {1, 0.2F}}, {0, {0.9F, 0}}, {1, {0, 1}}, {1, {0.1F, 1}},
                                   {1, {0.2F, 0.9F}}});
    const Episode ep{{0, 1}, {{0, 1}, {3, 4}}, {{2}, {5}}};
    const auto protos = fuse_all(support_mean(ep, cache), {}, 0.0);
    const EpisodeClassifier clf(ClassifierKind::LogisticRegression, protos, ep, cache);
    EXPECT_EQ(clf.classify(Eigen::Vector2d(0.9, 0)).predicted, 0U);
    EXPECT_EQ(clf.classify(Eigen::Vector2d(0.2, 0.9)).predicted, 1U);
    const auto c = clf.classify(Eigen::Vector2d(1, 0));
    EXPECT_NEAR(c.probabilities[0] + c.probabilities[1], 1.0, 1e-12);
}
