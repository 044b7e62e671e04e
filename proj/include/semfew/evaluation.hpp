#pragma once

// Episodic evaluation: accuracy over sampled tasks, 95% confidence interval,
// fusion-factor sweeps and the prototype-proximity statistic.

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "semfew/alignment_net.hpp"
#include "semfew/episodic.hpp"
#include "semfew/errors.hpp"
#include "semfew/feature_store.hpp"
#include "semfew/semantic_evolution.hpp"

namespace semfew {

/// 1.96 * population stddev / sqrt(n).
inline double ci95(std::span<const double> values) {
    if (values.empty()) {
        return 0.0;
    }
    const double n = static_cast<double>(values.size());
    const double shift = values.front();
    double mean = 0.0;
    for (double v : values) {
        mean += v - shift;
    }
    mean /= n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - shift - mean) * (v - shift - mean);
    }
    return 1.96 * std::sqrt(ss / n) / std::sqrt(n);
}

inline double mean_of_values(std::span<const double> values) {
    double s = 0.0;
    for (double v : values) {
        s += v;
    }
    return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

struct EvalReport {
    double mean_accuracy = 0.0;
    double ci95 = 0.0;
    std::vector<double> per_task_accuracy;
    nlohmann::json config = nlohmann::json::object();

    static EvalReport from_tasks(std::vector<double> per_task, nlohmann::json config) {
        EvalReport r;
        r.mean_accuracy = mean_of_values(per_task);
        r.ci95 = semfew::ci95(per_task);
        r.per_task_accuracy = std::move(per_task);
        r.config = std::move(config);
        return r;
    }

    nlohmann::json to_json() const {
        return {{"mean_accuracy", mean_accuracy},
                {"ci95", ci95},
                {"task_count", per_task_accuracy.size()},
                {"per_task_accuracy", per_task_accuracy},
                {"config", config}};
    }

    static EvalReport from_json(const nlohmann::json& j) {
        EvalReport r;
        r.mean_accuracy = j.at("mean_accuracy").get<double>();
        r.ci95 = j.at("ci95").get<double>();
        r.per_task_accuracy = j.at("per_task_accuracy").get<std::vector<double>>();
        r.config = j.value("config", nlohmann::json::object());
        return r;
    }
};

/// Read-only inputs shared by every task.
struct EvalContext {
    const FeatureCache* cache = nullptr;
    const AlignmentNetwork* net = nullptr;         ///< null: plain support-mean prototypes
    const ClassSemanticVectors* semantics = nullptr;
    const PeripheryPools* periphery = nullptr;
    unsigned workers = 1;
};

namespace detail {

/// Runs `fn(task_index)` for every task; results land by index, so the outcome
/// does not depend on scheduling.
template <class Result, class Fn>
std::vector<Result> run_tasks(std::size_t count, unsigned workers, Fn&& fn) {
    std::vector<Result> out(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto loop = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    if (workers <= 1) {
        loop();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < workers; ++t) {
            pool.emplace_back(loop);
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return out;
}

inline std::vector<Eigen::VectorXd> reconstructed_for(const EvalContext& ctx, const Episode& ep) {
    if (ctx.net == nullptr) {
        return {};
    }
    static const ClassSemanticVectors none;
    return reconstruct(*ctx.net, ep, *ctx.cache, ctx.semantics ? *ctx.semantics : none);
}

/// Accuracy of one task at each fusion factor in `ks`.
inline std::vector<double> task_accuracies(const EvalContext& ctx, const EpisodeSpec& spec, std::size_t task,
                                           std::span<const double> ks, ClassifierKind kind) {
    const Episode ep = sample_episode(*ctx.cache, spec, task, ctx.periphery);
    auto u = support_mean(ep, *ctx.cache);
    auto r = reconstructed_for(ctx, ep);

    std::vector<Eigen::VectorXd> queries;
    std::vector<std::size_t> labels;
    for (std::size_t t = 0; t < ep.query.size(); ++t) {
        for (std::size_t rec : ep.query[t]) {
            queries.push_back(ctx.cache->row(rec).cast<double>());
            labels.push_back(t);
        }
    }
    std::vector<double> acc;
    acc.reserve(ks.size());
    for (double k : ks) {
        const PrototypeSet protos = fuse_all(u, r, k);
        const EpisodeClassifier clf(kind, protos, ep, *ctx.cache);
        std::size_t correct = 0;
        for (std::size_t q = 0; q < queries.size(); ++q) {
            if (clf.classify(queries[q]).predicted == labels[q]) {
                ++correct;
            }
        }
        acc.push_back(static_cast<double>(correct) / static_cast<double>(queries.size()));
    }
    return acc;
}

inline nlohmann::json spec_to_json(const EpisodeSpec& spec) {
    return {{"n_way", spec.n_way},
            {"k_shot", spec.k_shot},
            {"m_query", spec.m_query},
            {"task_count", spec.task_count},
            {"split", spec.split},
            {"seed", spec.seed},
            {"periphery_bias", spec.periphery_bias}};
}

} // namespace detail

/// Mean task accuracy over `spec.task_count` episodes. Without a network the
/// fusion factor is forced to 0 (support-mean prototypes only).
inline EvalReport evaluate(const EvalContext& ctx, const EpisodeSpec& spec, double k, ClassifierKind kind) {
    if (ctx.cache == nullptr) {
        throw ArgumentError("evaluate needs a feature cache");
    }
    if (ctx.net == nullptr) {
        k = 0.0;
    }
    if (!(k >= 0.0 && k <= 1.0)) {
        throw ArgumentError("fusion factor must lie in [0, 1]");
    }
    validate_episode_spec(*ctx.cache, spec, ctx.periphery);
    const double ks[] = {k};
    auto per_task = detail::run_tasks<double>(spec.task_count, ctx.workers, [&](std::size_t t) {
        return detail::task_accuracies(ctx, spec, t, ks, kind).front();
    });
    nlohmann::json cfg = detail::spec_to_json(spec);
    cfg["k"] = k;
    cfg["classifier"] = to_string(kind);
    cfg["with_network"] = ctx.net != nullptr;
    if (ctx.net != nullptr) {
        cfg["alignment_source"] = to_string(ctx.net->source);
    }
    return EvalReport::from_tasks(std::move(per_task), std::move(cfg));
}

inline EvalReport evaluate(const AlignmentNetwork* net, const FeatureCache& cache,
                           const ClassSemanticVectors* semantics, const EpisodeSpec& spec, double k,
                           ClassifierKind kind, const PeripheryPools* periphery = nullptr) {
    return evaluate(EvalContext{&cache, net, semantics, periphery, 1}, spec, k, kind);
}

struct SweepPoint {
    double k = 0.0;
    EvalReport report;
};

/// k in {0, step, ..., 1}; every k sees exactly the same episodes.
inline std::vector<double> fusion_grid(double step) {
    if (!(step > 0.0 && step <= 1.0)) {
        throw ArgumentError("sweep step must lie in (0, 1]");
    }
    const double intervals = 1.0 / step;
    const auto n = static_cast<std::size_t>(std::llround(intervals));
    if (std::abs(intervals - static_cast<double>(n)) > 1e-9 * intervals) {
        throw ArgumentError("sweep step must divide 1");
    }
    std::vector<double> grid(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        grid[i] = static_cast<double>(i) / static_cast<double>(n);
    }
    return grid;
}

inline std::vector<SweepPoint> sweep_k(const EvalContext& ctx, const EpisodeSpec& spec, ClassifierKind kind,
                                       double step = 0.01) {
    if (ctx.cache == nullptr) {
        throw ArgumentError("sweep needs a feature cache");
    }
    const auto grid = fusion_grid(step);
    validate_episode_spec(*ctx.cache, spec, ctx.periphery);
    auto per_task = detail::run_tasks<std::vector<double>>(spec.task_count, ctx.workers, [&](std::size_t t) {
        return detail::task_accuracies(ctx, spec, t, grid, kind);
    });
    std::vector<SweepPoint> curve;
    curve.reserve(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> acc(per_task.size());
        for (std::size_t t = 0; t < per_task.size(); ++t) {
            acc[t] = per_task[t][g];
        }
        nlohmann::json cfg = detail::spec_to_json(spec);
        // without a network every k degenerates to the support-mean baseline
        cfg["k"] = ctx.net ? grid[g] : 0.0;
        cfg["classifier"] = to_string(kind);
        cfg["with_network"] = ctx.net != nullptr;
        if (ctx.net != nullptr) {
            cfg["alignment_source"] = to_string(ctx.net->source);
        }
        curve.push_back({grid[g], EvalReport::from_tasks(std::move(acc), std::move(cfg))});
    }
    return curve;
}

/// Index of the best point (first one on ties).
inline std::size_t best_point(const std::vector<SweepPoint>& curve) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].report.mean_accuracy > curve[best].report.mean_accuracy) {
            best = i;
        }
    }
    return best;
}

// ---- prototype proximity -------------------------------------------------------------

struct ProximityEpisode {
    std::size_t task_index = 0;
    std::vector<ClassId> class_ids;
    std::vector<double> reconstructed_distance; ///< |r_t - c_t|
    std::vector<double> support_distance;       ///< |u_t - c_t|
};

struct ProximityReport {
    double fraction_closer = 0.0; ///< share of (episode, class) pairs with |r - c| < |u - c|
    std::size_t pairs = 0;
    std::vector<ProximityEpisode> episodes;

    nlohmann::json to_json() const {
        nlohmann::json eps = nlohmann::json::array();
        for (const auto& e : episodes) {
            eps.push_back({{"task_index", e.task_index},
                           {"class_ids", e.class_ids},
                           {"reconstructed_distance", e.reconstructed_distance},
                           {"support_distance", e.support_distance}});
        }
        return {{"fraction_closer", fraction_closer}, {"pairs", pairs}, {"episodes", eps}};
    }
};

/// How often the reconstructed prototype lands closer to the class center than
/// the support mean does, over the episodes of `spec`.
inline ProximityReport prototype_proximity(const EvalContext& ctx, const EpisodeSpec& spec,
                                           const ClassCenterSet& centers) {
    if (ctx.cache == nullptr || ctx.net == nullptr) {
        throw ArgumentError("proximity check needs a cache and a network");
    }
    validate_episode_spec(*ctx.cache, spec, ctx.periphery);
    ProximityReport rep;
    rep.episodes = detail::run_tasks<ProximityEpisode>(spec.task_count, ctx.workers, [&](std::size_t t) {
        const Episode ep = sample_episode(*ctx.cache, spec, t, ctx.periphery);
        const auto u = support_mean(ep, *ctx.cache);
        const auto r = detail::reconstructed_for(ctx, ep);
        ProximityEpisode pe;
        pe.task_index = t;
        pe.class_ids = ep.class_ids;
        for (std::size_t c = 0; c < ep.class_ids.size(); ++c) {
            auto it = centers.find(ep.class_ids[c]);
            if (it == centers.end()) {
                throw ArgumentError("no reference center for class " + std::to_string(ep.class_ids[c]));
            }
            pe.reconstructed_distance.push_back((r[c] - it->second).norm());
            pe.support_distance.push_back((u[c] - it->second).norm());
        }
        return pe;
    });
    std::size_t closer = 0;
    for (const auto& e : rep.episodes) {
        for (std::size_t c = 0; c < e.class_ids.size(); ++c) {
            ++rep.pairs;
            if (e.reconstructed_distance[c] < e.support_distance[c]) {
                ++closer;
            }
        }
    }
    rep.fraction_closer = rep.pairs ? static_cast<double>(closer) / static_cast<double>(rep.pairs) : 0.0;
    return rep;
}

} // namespace semfew
