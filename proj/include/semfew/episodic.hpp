#pragma once

// N-way K-shot episodes, prototypes and per-query classification.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semfew/alignment_net.hpp"
#include "semfew/errors.hpp"
#include "semfew/feature_store.hpp"
#include "semfew/random.hpp"
#include "semfew/semantic_evolution.hpp"

namespace semfew {

struct EpisodeSpec {
    std::size_t n_way = 5;
    std::size_t k_shot = 1;
    std::size_t m_query = 15;
    std::size_t task_count = 600;
    std::string split = split::novel;
    std::uint64_t seed = 0;
    /// Probability that a class's support set is drawn from its periphery pool.
    double periphery_bias = 0.0;

    void validate() const {
        if (n_way < 2) {
            throw ArgumentError("n_way must be >= 2");
        }
        if (k_shot < 1 || m_query < 1) {
            throw ArgumentError("k_shot and m_query must be >= 1");
        }
        if (task_count < 1) {
            throw ArgumentError("task_count must be >= 1");
        }
        if (!(periphery_bias >= 0.0 && periphery_bias <= 1.0)) {
            throw ArgumentError("periphery_bias must lie in [0, 1]");
        }
    }
};

/// Per-class record indices eligible as "periphery" support samples.
using PeripheryPools = std::map<ClassId, std::vector<std::size_t>>;

/// The ceil(n/4) records of each class farthest from `centers[class]`
/// (ties broken by record index), in record order.
inline PeripheryPools periphery_pools(const FeatureCache& cache, const std::string& split_name,
                                      const ClassCenterSet& centers) {
    PeripheryPools pools;
    for (ClassId id : cache.classes_in(split_name)) {
        auto c = centers.find(id);
        if (c == centers.end()) {
            throw ArgumentError("no center for class " + std::to_string(id));
        }
        const auto& idx = cache.records_of(id);
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(idx.size());
        for (std::size_t i : idx) {
            dist.emplace_back((cache.row(i).cast<double>() - c->second).norm(), i);
        }
        std::sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        const std::size_t keep = (idx.size() + 3) / 4;
        std::vector<std::size_t> pool;
        for (std::size_t j = 0; j < keep; ++j) {
            pool.push_back(dist[j].second);
        }
        std::sort(pool.begin(), pool.end());
        pools.emplace(id, std::move(pool));
    }
    return pools;
}

struct Episode {
    std::vector<ClassId> class_ids;                  ///< N
    std::vector<std::vector<std::size_t>> support;   ///< N x K record indices
    std::vector<std::vector<std::size_t>> query;     ///< N x M record indices

    bool operator==(const Episode&) const = default;
};

namespace detail {

/// First `count` elements of a seeded partial Fisher-Yates shuffle.
template <class T>
std::vector<T> draw_without_replacement(std::vector<T> items, std::size_t count, Rng& rng) {
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
        std::swap(items[i], items[pick(rng)]);
    }
    items.resize(count);
    return items;
}

} // namespace detail

/// Checks the spec against the cache (split size, per-class record counts).
inline void validate_episode_spec(const FeatureCache& cache, const EpisodeSpec& spec,
                                  const PeripheryPools* periphery = nullptr) {
    spec.validate();
    const auto& classes = cache.classes_in(spec.split);
    if (classes.size() < spec.n_way) {
        throw SamplingError("split '" + spec.split + "' has " + std::to_string(classes.size()) +
                            " classes, need " + std::to_string(spec.n_way));
    }
    for (ClassId id : classes) {
        const std::size_t n = cache.records_of(id).size();
        if (n < spec.k_shot + spec.m_query) {
            throw SamplingError("class " + std::to_string(id) + " has " + std::to_string(n) + " records, need " +
                                std::to_string(spec.k_shot + spec.m_query));
        }
        if (spec.periphery_bias > 0.0) {
            if (periphery == nullptr || !periphery->contains(id)) {
                throw ArgumentError("periphery sampling requested without a pool for class " + std::to_string(id));
            }
            if (periphery->at(id).size() < spec.k_shot) {
                throw SamplingError("periphery pool of class " + std::to_string(id) + " is smaller than k_shot");
            }
        }
    }
}

/// Task `task_index` of the spec; depends only on (spec.seed, task_index).
inline Episode sample_episode(const FeatureCache& cache, const EpisodeSpec& spec, std::size_t task_index,
                              const PeripheryPools* periphery = nullptr) {
    validate_episode_spec(cache, spec, periphery);
    Rng rng = derive_rng(spec.seed, task_index, salt::episode);
    Episode ep;
    ep.class_ids = detail::draw_without_replacement(cache.classes_in(spec.split), spec.n_way, rng);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (ClassId id : ep.class_ids) {
        const auto& records = cache.records_of(id);
        const bool from_periphery = coin(rng) < spec.periphery_bias;
        if (from_periphery) {
            auto support = detail::draw_without_replacement(periphery->at(id), spec.k_shot, rng);
            std::vector<std::size_t> rest;
            rest.reserve(records.size());
            for (std::size_t r : records) {
                if (std::find(support.begin(), support.end(), r) == support.end()) {
                    rest.push_back(r);
                }
            }
            ep.query.push_back(detail::draw_without_replacement(std::move(rest), spec.m_query, rng));
            ep.support.push_back(std::move(support));
        } else {
            auto drawn = detail::draw_without_replacement(records, spec.k_shot + spec.m_query, rng);
            ep.support.emplace_back(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(spec.k_shot));
            ep.query.emplace_back(drawn.begin() + static_cast<std::ptrdiff_t>(spec.k_shot), drawn.end());
        }
    }
    return ep;
}

/// Support mean u_t per episode class.
inline std::vector<Eigen::VectorXd> support_mean(const Episode& episode, const FeatureCache& cache) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(episode.class_ids.size());
    for (const auto& s : episode.support) {
        out.push_back(mean_of(cache, s));
    }
    return out;
}

/// r_t: each support image goes through the network with its class-level
/// semantic, and the outputs are averaged.
inline std::vector<Eigen::VectorXd> reconstruct(const AlignmentNetwork& net, const Episode& episode,
                                                const FeatureCache& cache, const ClassSemanticVectors& semantics) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(episode.class_ids.size());
    for (std::size_t t = 0; t < episode.class_ids.size(); ++t) {
        const ClassId id = episode.class_ids[t];
        const auto& sup = episode.support[t];
        const auto rows = static_cast<Eigen::Index>(sup.size());
        Eigen::MatrixXd visual(rows, static_cast<Eigen::Index>(cache.dim()));
        for (Eigen::Index i = 0; i < rows; ++i) {
            visual.row(i) = cache.row(sup[static_cast<std::size_t>(i)]).cast<double>().transpose();
        }
        Eigen::MatrixXd semantic(rows, 0);
        if (uses_semantic(net.source)) {
            auto it = semantics.find(id);
            if (it == semantics.end()) {
                throw MissingSemanticsError("no semantic embedding for class " + std::to_string(id));
            }
            semantic = it->second.transpose().replicate(rows, 1);
        }
        const Eigen::MatrixXd outputs = forward_batch(net, visual, semantic);
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(outputs.cols());
        for (Eigen::Index i = 0; i < rows; ++i) {
            sum += outputs.row(i).transpose();
        }
        out.push_back(sum / static_cast<double>(rows));
    }
    return out;
}

/// p = k r + (1 - k) u.
inline Eigen::VectorXd fuse(const Eigen::VectorXd& reconstructed, const Eigen::VectorXd& support_mean, double k) {
    if (!(k >= 0.0 && k <= 1.0)) {
        throw ArgumentError("fusion factor must lie in [0, 1]");
    }
    if (reconstructed.size() != support_mean.size()) {
        throw DimensionError("fuse: dimension mismatch");
    }
    return k * reconstructed + (1.0 - k) * support_mean;
}

struct PrototypeSet {
    std::vector<Eigen::VectorXd> support_mean;  ///< u_t
    std::vector<Eigen::VectorXd> reconstructed; ///< r_t (empty without a network)
    std::vector<Eigen::VectorXd> fused;         ///< p_t
};

inline PrototypeSet fuse_all(std::vector<Eigen::VectorXd> u, std::vector<Eigen::VectorXd> r, double k) {
    PrototypeSet p;
    p.support_mean = std::move(u);
    p.reconstructed = std::move(r);
    if (p.reconstructed.empty()) {
        p.fused = p.support_mean;
        return p;
    }
    for (std::size_t t = 0; t < p.support_mean.size(); ++t) {
        p.fused.push_back(fuse(p.reconstructed[t], p.support_mean[t], k));
    }
    return p;
}

// ---- classification ------------------------------------------------------------------

enum class ClassifierKind { Cosine, Euclidean, LogisticRegression };

inline constexpr std::string_view to_string(ClassifierKind k) {
    switch (k) {
    case ClassifierKind::Cosine:
        return "cosine";
    case ClassifierKind::Euclidean:
        return "euclidean";
    case ClassifierKind::LogisticRegression:
        return "logistic";
    }
    return "?";
}

inline ClassifierKind parse_classifier(std::string_view text) {
    if (text == "cosine" || text == "co" || text == "CO") {
        return ClassifierKind::Cosine;
    }
    if (text == "euclidean" || text == "eu" || text == "EU") {
        return ClassifierKind::Euclidean;
    }
    if (text == "logistic" || text == "lr" || text == "LR") {
        return ClassifierKind::LogisticRegression;
    }
    throw ArgumentError("unknown classifier '" + std::string(text) + "'");
}

struct Classification {
    std::vector<double> probabilities;
    std::size_t predicted = 0;
};

namespace detail {

/// Softmax over scores; argmax ties go to the lowest index.
inline Classification softmax_decision(const std::vector<double>& scores) {
    Classification c;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > top) {
            top = scores[i];
            c.predicted = i;
        }
    }
    double total = 0.0;
    c.probabilities.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        c.probabilities[i] = std::exp(scores[i] - top);
        total += c.probabilities[i];
    }
    for (double& p : c.probabilities) {
        p /= total;
    }
    return c;
}

inline double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        throw NumericsError("cosine similarity of a zero vector");
    }
    return a.dot(b) / (na * nb);
}

} // namespace detail

/// Nearest-prototype decision. Scores are similarities (cosine, or negative
/// euclidean distance), so the closest prototype gets the largest probability.
inline Classification classify(const Eigen::VectorXd& query, std::span<const Eigen::VectorXd> prototypes,
                               ClassifierKind kind) {
    if (prototypes.empty()) {
        throw ArgumentError("no prototypes");
    }
    std::vector<double> scores;
    scores.reserve(prototypes.size());
    for (const auto& p : prototypes) {
        if (p.size() != query.size()) {
            throw DimensionError("query and prototype dimensions differ");
        }
        switch (kind) {
        case ClassifierKind::Cosine:
            scores.push_back(detail::cosine_similarity(query, p));
            break;
        case ClassifierKind::Euclidean:
            scores.push_back(-(query - p).norm());
            break;
        case ClassifierKind::LogisticRegression:
            throw ArgumentError("logistic regression needs a fitted LogisticRegressionHead");
        }
    }
    return detail::softmax_decision(scores);
}

struct LogisticRegressionOptions {
    int iterations = 100;
    double learning_rate = 1.0;
    double l2 = -1.0; ///< negative: use 1 / (N K)
};

/// Multinomial logistic regression on L2-normalized features, trained by
/// full-batch gradient descent from zero weights.
class LogisticRegressionHead {
  public:
    LogisticRegressionHead(const Eigen::MatrixXd& features, const std::vector<std::size_t>& labels,
                           std::size_t classes, double l2, const LogisticRegressionOptions& opts = {}) {
        const auto n = features.rows();
        if (n == 0 || static_cast<std::size_t>(n) != labels.size()) {
            throw ArgumentError("logistic regression needs one label per feature row");
        }
        const Eigen::MatrixXd x = normalize_rows(features);
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(classes));
        for (Eigen::Index i = 0; i < n; ++i) {
            y(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) = 1.0;
        }
        weights_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), x.cols());
        bias_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes));
        for (int it = 0; it < opts.iterations; ++it) {
            Eigen::MatrixXd logits = x * weights_.transpose();
            logits.rowwise() += bias_.transpose();
            Eigen::MatrixXd prob = softmax_rows(logits);
            const Eigen::MatrixXd err = (prob - y) / static_cast<double>(n);
            const Eigen::MatrixXd grad_w = err.transpose() * x + l2 * weights_;
            const Eigen::VectorXd grad_b = err.colwise().sum().transpose();
            weights_ -= opts.learning_rate * grad_w;
            bias_ -= opts.learning_rate * grad_b;
        }
    }

    Classification classify(const Eigen::VectorXd& query) const {
        const double norm = query.norm();
        if (norm == 0.0) {
            throw NumericsError("zero-norm query for logistic regression");
        }
        const Eigen::VectorXd logits = weights_ * (query / norm) + bias_;
        return detail::softmax_decision(std::vector<double>(logits.data(), logits.data() + logits.size()));
    }

  private:
    static Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) {
        Eigen::MatrixXd out = m;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double n = m.row(i).norm();
            if (n == 0.0) {
                throw NumericsError("zero-norm feature for logistic regression");
            }
            out.row(i) /= n;
        }
        return out;
    }

    static Eigen::MatrixXd softmax_rows(Eigen::MatrixXd logits) {
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            logits.row(i).array() -= logits.row(i).maxCoeff();
            logits.row(i) = logits.row(i).array().exp().matrix();
            logits.row(i) /= logits.row(i).sum();
        }
        return logits;
    }

    Eigen::MatrixXd weights_;
    Eigen::VectorXd bias_;
};

/// Classifier for one episode: nearest fused prototype, or a logistic-regression
/// head fitted on the support features plus one fused prototype per class.
class EpisodeClassifier {
  public:
    EpisodeClassifier(ClassifierKind kind, const PrototypeSet& prototypes, const Episode& episode,
                      const FeatureCache& cache, const LogisticRegressionOptions& lr = {})
        : kind_(kind), prototypes_(prototypes.fused) {
        if (kind != ClassifierKind::LogisticRegression) {
            return;
        }
        const std::size_t n = episode.class_ids.size();
        std::size_t rows = n;
        for (const auto& s : episode.support) {
            rows += s.size();
        }
        Eigen::MatrixXd features(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cache.dim()));
        std::vector<std::size_t> labels;
        Eigen::Index r = 0;
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t rec : episode.support[t]) {
                features.row(r++) = cache.row(rec).cast<double>().transpose();
                labels.push_back(t);
            }
        }
        for (std::size_t t = 0; t < n; ++t) {
            features.row(r++) = prototypes.fused[t].transpose();
            labels.push_back(t);
        }
        const double l2 = lr.l2 >= 0.0 ? lr.l2 : 1.0 / static_cast<double>(n * episode.support.front().size());
        head_.emplace(features, labels, n, l2, lr);
    }

    Classification classify(const Eigen::VectorXd& query) const {
        if (head_) {
            return head_->classify(query);
        }
        return semfew::classify(query, prototypes_, kind_);
    }

  private:
    ClassifierKind kind_;
    std::vector<Eigen::VectorXd> prototypes_;
    std::optional<LogisticRegressionHead> head_;
};

} // namespace semfew
