#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semfew/errors.hpp"
#include "semfew/feature_store.hpp"
#include "semfew/random.hpp"

namespace semfew {

struct KMeansOptions {
    int max_iterations = 100;
    double tolerance = 1e-6; ///< stop once no center moves further than this (euclidean)
};

struct KMeansResult {
    std::vector<Eigen::VectorXd> centers;
    std::vector<std::size_t> assignment; ///< per point, index into centers
    std::vector<std::size_t> sizes;
    int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding over cache records `indices`.
/// Center updates reuse `mean_of`, so k = 1 reproduces the plain class mean bit for bit.
inline KMeansResult kmeans(const FeatureCache& cache, std::span<const std::size_t> indices, std::size_t k, Rng& rng,
                           const KMeansOptions& opts = {}) {
    const std::size_t n = indices.size();
    if (k == 0) {
        throw ArgumentError("k must be at least 1");
    }
    if (n < k) {
        throw ClusterError("cannot form " + std::to_string(k) + " clusters from " + std::to_string(n) + " records");
    }
    std::vector<Eigen::VectorXd> points;
    points.reserve(n);
    for (std::size_t i : indices) {
        points.push_back(cache.row(i).cast<double>());
    }

    // k-means++ seeding
    KMeansResult res;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    res.centers.push_back(points[pick(rng)]);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (res.centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (points[i] - res.centers.back()).squaredNorm());
            total += d2[i];
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            double target = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (chosen = 0; chosen + 1 < n; ++chosen) {
                target -= d2[chosen];
                if (target < 0.0) {
                    break;
                }
            }
        } else {
            chosen = pick(rng); // all points coincide with chosen centers
        }
        res.centers.push_back(points[chosen]);
    }

    res.assignment.assign(n, 0);
    for (res.iterations = 1; res.iterations <= opts.max_iterations; ++res.iterations) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double dist = (points[i] - res.centers[c]).squaredNorm();
                if (dist < best) {
                    best = dist;
                    res.assignment[i] = c;
                }
            }
        }
        double moved = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i) {
                if (res.assignment[i] == c) {
                    members.push_back(indices[i]);
                }
            }
            if (members.empty()) {
                continue; // empty cluster keeps its previous center
            }
            Eigen::VectorXd updated = mean_of(cache, members);
            moved = std::max(moved, (updated - res.centers[c]).norm());
            res.centers[c] = std::move(updated);
        }
        if (moved <= opts.tolerance) {
            break;
        }
    }
    res.iterations = std::min(res.iterations, opts.max_iterations);

    res.sizes.assign(k, 0);
    for (std::size_t a : res.assignment) {
        ++res.sizes[a];
    }
    return res;
}

/// Per-class k-means; each class is represented by the center of its largest
/// cluster (ties go to the lowest cluster index).
inline ClassCenterSet cluster_centers(const FeatureCache& cache, const std::string& split_name,
                                      std::size_t clusters_per_class, std::uint64_t seed,
                                      const KMeansOptions& opts = {}) {
    if (clusters_per_class < 1) {
        throw ArgumentError("clusters_per_class must be at least 1");
    }
    ClassCenterSet out;
    for (ClassId id : cache.classes_in(split_name)) {
        const auto& idx = cache.records_of(id);
        if (idx.empty()) {
            throw EmptyClassError("class " + std::to_string(id) + " has no records");
        }
        Rng rng = derive_rng(seed, id, salt::kmeans);
        auto res = kmeans(cache, idx, clusters_per_class, rng, opts);
        std::size_t largest = 0;
        for (std::size_t c = 1; c < res.sizes.size(); ++c) {
            if (res.sizes[c] > res.sizes[largest]) {
                largest = c;
            }
        }
        out.emplace(id, std::move(res.centers[largest]));
    }
    return out;
}

} // namespace semfew
