#pragma once

#include <cmath>
#include <vector>

#include "semfew/episodic.hpp"
#include "semfew/feature_store.hpp"

namespace semfew::testing {

/// Standalone ProtoNet: plain loops, cosine score, lowest index wins ties.
inline double protonet_task_accuracy(const FeatureCache& cache, const Episode& ep) {
    const std::size_t dim = cache.dim();
    std::vector<std::vector<double>> protos;
    for (const auto& support : ep.support) {
        std::vector<double> m(dim, 0.0);
        for (std::size_t r : support) {
            const auto v = cache.vector(r);
            for (std::size_t d = 0; d < dim; ++d) {
                m[d] += v[d];
            }
        }
        for (auto& x : m) {
            x /= static_cast<double>(support.size());
        }
        protos.push_back(m);
    }
    std::size_t correct = 0;
    std::size_t total = 0;
    for (std::size_t c = 0; c < ep.query.size(); ++c) {
        for (std::size_t r : ep.query[c]) {
            const auto q = cache.vector(r);
            std::size_t best = 0;
            double best_score = -2.0;
            for (std::size_t p = 0; p < protos.size(); ++p) {
                double dot = 0.0;
                double nq = 0.0;
                double np = 0.0;
                for (std::size_t d = 0; d < dim; ++d) {
                    dot += q[d] * protos[p][d];
                    nq += static_cast<double>(q[d]) * q[d];
                    np += protos[p][d] * protos[p][d];
                }
                const double s = dot / std::sqrt(nq * np);
                if (s > best_score) {
                    best_score = s;
                    best = p;
                }
            }
            correct += best == c ? 1 : 0;
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

} // namespace semfew::testing
