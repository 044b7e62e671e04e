#pragma once

// Desk-scale synthetic data. Class semantics are a fixed random linear image of
// the class centers plus per-source noise.

#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "semfew/errors.hpp"
#include "semfew/feature_store.hpp"
#include "semfew/random.hpp"
#include "semfew/semantic_evolution.hpp"

namespace semfew {

struct SyntheticSpec {
    std::size_t base_classes = 20;
    std::size_t val_classes = 0;
    std::size_t novel_classes = 5;
    std::size_t samples_per_class = 200;
    std::size_t visual_dim = 64;
    std::size_t text_dim = 32;
    double center_scale = 1.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t semantic_map_seed = 0;
    /// Stored with the data; episode samplers read it as their default.
    double periphery_bias = 0.0;
    /// Dimension of the subspace holding class centers (0: all of visual space).
    std::size_t center_rank = 0;
    /// Gain of the center-to-semantic map; entries are N(0, gain^2 / visual_dim).
    double semantic_gain = 1.0;
    /// Semantic noise per source, as multiples of noise_sigma.
    double paraphrase_noise = 0.1;
    double definition_noise = 1.0;
    double name_noise = 3.0;
    std::string dataset_name = "synthetic";

    std::size_t effective_rank() const noexcept { return center_rank == 0 ? visual_dim : center_rank; }

    void validate() const {
        if (visual_dim == 0 || text_dim == 0) {
            throw ArgumentError("synthetic dims must be positive");
        }
        if (base_classes == 0 || novel_classes == 0 || samples_per_class == 0) {
            throw ArgumentError("synthetic class and sample counts must be positive");
        }
        if (!(noise_sigma >= 0.0) || !(center_scale > 0.0)) {
            throw ArgumentError("noise_sigma must be >= 0 and center_scale > 0");
        }
        if (effective_rank() > visual_dim) {
            throw ArgumentError("center_rank cannot exceed visual_dim");
        }
        if (!(periphery_bias >= 0.0 && periphery_bias <= 1.0)) {
            throw ArgumentError("periphery_bias must lie in [0, 1]");
        }
    }
};

struct SyntheticData {
    FeatureCache cache;
    SemanticEmbeddingSet semantics;
    /// Ground-truth centers, rounded through f32 like the cached samples.
    ClassCenterSet centers;
    Eigen::MatrixXd semantic_map; ///< text_dim x visual_dim
};

namespace detail {

inline double gaussian(Rng& rng, double sigma) {
    if (sigma == 0.0) {
        return 0.0;
    }
    return std::normal_distribution<double>(0.0, sigma)(rng);
}

} // namespace detail

inline SyntheticData gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const auto vdim = static_cast<Eigen::Index>(spec.visual_dim);
    const auto tdim = static_cast<Eigen::Index>(spec.text_dim);
    const auto rank = static_cast<Eigen::Index>(spec.effective_rank());
    const std::size_t total_classes = spec.base_classes + spec.val_classes + spec.novel_classes;

    Rng rng = derive_rng(spec.seed, 0, salt::synthetic);

    Eigen::MatrixXd basis;
    if (rank < vdim) {
        Eigen::MatrixXd g(vdim, rank);
        for (Eigen::Index c = 0; c < rank; ++c) {
            for (Eigen::Index r = 0; r < vdim; ++r) {
                g(r, c) = detail::gaussian(rng, 1.0);
            }
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        basis = qr.householderQ() * Eigen::MatrixXd::Identity(vdim, rank);
    }
    // keeps E|c|^2 = visual_dim * center_scale^2 regardless of rank
    const double coeff_sigma =
        spec.center_scale * std::sqrt(static_cast<double>(vdim) / static_cast<double>(rank));

    SyntheticData out;
    std::vector<Eigen::VectorXd> centers(total_classes);
    for (std::size_t c = 0; c < total_classes; ++c) {
        Eigen::VectorXd coeff(rank);
        for (Eigen::Index d = 0; d < rank; ++d) {
            coeff[d] = detail::gaussian(rng, coeff_sigma);
        }
        centers[c] = rank < vdim ? Eigen::VectorXd(basis * coeff) : coeff;
        centers[c] = centers[c].cast<float>().cast<double>();
    }

    std::vector<FeatureRecord> records;
    records.reserve(total_classes * spec.samples_per_class);
    for (std::size_t c = 0; c < total_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            FeatureRecord rec{static_cast<ClassId>(c), std::vector<float>(spec.visual_dim)};
            for (std::size_t d = 0; d < spec.visual_dim; ++d) {
                rec.vector[d] = static_cast<float>(centers[c][static_cast<Eigen::Index>(d)] +
                                                   detail::gaussian(rng, spec.noise_sigma));
            }
            records.push_back(std::move(rec));
        }
    }

    FeatureCacheHeader header;
    header.visual_dim = static_cast<std::uint32_t>(spec.visual_dim);
    header.record_count = records.size();
    header.dataset_name = spec.dataset_name;
    auto range = [](std::size_t from, std::size_t count) {
        std::vector<ClassId> ids(count);
        for (std::size_t i = 0; i < count; ++i) {
            ids[i] = static_cast<ClassId>(from + i);
        }
        return ids;
    };
    header.split_table[split::base] = range(0, spec.base_classes);
    header.split_table[split::val] = range(spec.base_classes, spec.val_classes);
    header.split_table[split::novel] = range(spec.base_classes + spec.val_classes, spec.novel_classes);
    out.cache = FeatureCache::from_records(std::move(header), records);

    Rng map_rng = derive_rng(spec.semantic_map_seed, 0, salt::semantic_map);
    out.semantic_map.resize(tdim, vdim);
    const double map_sigma = spec.semantic_gain / std::sqrt(static_cast<double>(vdim));
    for (Eigen::Index c = 0; c < vdim; ++c) {
        for (Eigen::Index r = 0; r < tdim; ++r) {
            out.semantic_map(r, c) = detail::gaussian(map_rng, map_sigma);
        }
    }

    Rng sem_rng = derive_rng(spec.seed, 1, salt::synthetic);
    out.semantics = SemanticEmbeddingSet("synthetic-linear", spec.text_dim);
    const std::pair<SemanticSource, double> sources[] = {{SemanticSource::NameTemplate, spec.name_noise},
                                                         {SemanticSource::Definition, spec.definition_noise},
                                                         {SemanticSource::Paraphrase, spec.paraphrase_noise}};
    for (std::size_t c = 0; c < total_classes; ++c) {
        const Eigen::VectorXd clean = out.semantic_map * centers[c];
        for (const auto& [source, mult] : sources) {
            Eigen::VectorXd v = clean;
            for (Eigen::Index d = 0; d < tdim; ++d) {
                v[d] += detail::gaussian(sem_rng, mult * spec.noise_sigma);
            }
            out.semantics.set(static_cast<ClassId>(c), source, std::move(v));
        }
        out.centers.emplace(static_cast<ClassId>(c), centers[c]);
    }
    return out;
}

/// Plain-text class table for synthetic classes ("class_<id>").
inline ClassTable synthetic_class_table(const FeatureCache& cache) {
    ClassTable t;
    for (const auto& [name, ids] : cache.header().split_table) {
        for (ClassId id : ids) {
            t.push_back({id, "class_" + std::to_string(id), std::nullopt});
        }
    }
    std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) { return a.class_id < b.class_id; });
    return t;
}

} // namespace semfew
