#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "semfew/synthetic.hpp"

using namespace semfew;

TEST(Synthetic, ZeroNoiseSamplesSitOnCenters) {
    SyntheticSpec s;
    s.noise_sigma = 0.0;
    s.samples_per_class = 5;
    const auto d = gen_synthetic(s);
    for (std::size_t i = 0; i < d.cache.size(); ++i) {
        EXPECT_EQ(d.cache.row(i).cast<double>(), d.centers.at(d.cache.class_id(i)));
    }
}

TEST(Synthetic, EmpiricalMeanApproachesCenter) {
    SyntheticSpec s;
    s.samples_per_class = 400;
    s.noise_sigma = 1.5;
    s.visual_dim = 16;
    const auto d = gen_synthetic(s);
    const double bound = 4.5 * s.noise_sigma / std::sqrt(400.0);
    for (const auto& [id, c] : class_centers(d.cache, split::base)) {
        for (Eigen::Index k = 0; k < c.size(); ++k) {
            EXPECT_LE(std::abs(c[k] - d.centers.at(id)[k]), bound + 1e-6) << "class " << id << " dim " << k;
        }
    }
}

TEST(Synthetic, FixedSeedsAreBitIdentical) {
    SyntheticSpec s;
    s.samples_per_class = 10;
    const auto a = gen_synthetic(s);
    const auto b = gen_synthetic(s);
    EXPECT_EQ(a.cache.raw_values(), b.cache.raw_values());
    EXPECT_EQ(a.semantics, b.semantics);
    EXPECT_EQ(a.centers, b.centers);
    s.seed = 1;
    EXPECT_NE(gen_synthetic(s).cache.raw_values(), a.cache.raw_values());
}

TEST(Synthetic, LayoutAndSemantics) {
    SyntheticSpec s;
    s.val_classes = 3;
    s.samples_per_class = 4;
    s.noise_sigma = 0.0;
    const auto d = gen_synthetic(s);
    EXPECT_EQ(d.cache.classes_in(split::base).size(), 20U);
    EXPECT_EQ(d.cache.classes_in(split::val).size(), 3U);
    EXPECT_EQ(d.cache.classes_in(split::novel).size(), 5U);
    EXPECT_EQ(d.cache.size(), 28U * 4U);
    EXPECT_EQ(d.semantics.size(), 28U * 3U);
    EXPECT_EQ(d.semantics.text_dim(), 32U);
    for (const auto& [id, c] : d.centers) {
        const Eigen::VectorXd clean = d.semantic_map * c;
        EXPECT_LT((d.semantics.get(id, SemanticSource::Paraphrase) - clean).norm(), 1e-12);
    }
}

TEST(Synthetic, CentersPairwiseDistinct) {
    SyntheticSpec s;
    s.center_rank = 4;
    s.samples_per_class = 1;
    const auto d = gen_synthetic(s);
    for (auto a = d.centers.begin(); a != d.centers.end(); ++a) {
        for (auto b = std::next(a); b != d.centers.end(); ++b) {
            EXPECT_GT((a->second - b->second).norm(), 0.0);
        }
    }
}

TEST(Synthetic, LowRankCentersLieInSubspace) {
    SyntheticSpec s;
    s.center_rank = 3;
    s.samples_per_class = 1;
    const auto d = gen_synthetic(s);
    Eigen::MatrixXd m(64, static_cast<Eigen::Index>(d.centers.size()));
    Eigen::Index col = 0;
    double mean_sq = 0.0;
    for (const auto& [id, c] : d.centers) {
        m.col(col++) = c;
        mean_sq += c.squaredNorm();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    EXPECT_LT(svd.singularValues()[3], 1e-5 * svd.singularValues()[0]);
    EXPECT_NEAR(mean_sq / static_cast<double>(d.centers.size()) / 64.0, 1.0, 0.5);
}

TEST(Synthetic, InvalidSpecRejected) {
    SyntheticSpec s;
    s.visual_dim = 0;
    EXPECT_THROW(gen_synthetic(s), ArgumentError);
    s = {};
    s.noise_sigma = -1;
    EXPECT_THROW(gen_synthetic(s), ArgumentError);
    s = {};
    s.center_rank = 65;
    EXPECT_THROW(gen_synthetic(s), ArgumentError);
}
