#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "semfew/alignment_net.hpp"
#include "semfew/errors.hpp"
#include "semfew/feature_store.hpp"
#include "semfew/random.hpp"
#include "semfew/semantic_evolution.hpp"

namespace semfew {

struct TrainConfig {
    int epochs = 50;
    int batch_size = 128;
    double learning_rate = 1e-4;
    std::size_t hidden_dim = 4096;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    AlignmentSource alignment_source = AlignmentSource::VisualSemantic;
    double leaky_slope = 0.01;
    bool use_bias = true;

    void validate() const {
        if (epochs < 1) {
            throw ArgumentError("epochs must be >= 1");
        }
        if (batch_size < 1) {
            throw ArgumentError("batch_size must be >= 1");
        }
        if (!(learning_rate > 0.0)) {
            throw ArgumentError("learning_rate must be > 0");
        }
        if (hidden_dim == 0) {
            throw ArgumentError("hidden_dim must be > 0");
        }
        auto open_unit = [](double b) { return b > 0.0 && b < 1.0; };
        if (!open_unit(adam_beta1) || !open_unit(adam_beta2)) {
            throw ArgumentError("Adam betas must lie in (0, 1)");
        }
    }

    AdamHyper adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

struct TrainResult {
    AlignmentNetwork network;
    std::vector<double> loss_curve; ///< mean per-sample loss of each epoch
};

/// Yields shuffled mini-batches over base-split records only.
class BaseBatchIterator {
  public:
    BaseBatchIterator(const FeatureCache& cache, const ClassSemanticVectors& semantics, const ClassCenterSet& centers,
                      const AlignmentNetwork& shape, std::size_t batch_size)
        : cache_(cache), semantics_(semantics), centers_(centers), shape_(shape), batch_size_(batch_size) {
        for (ClassId id : cache.classes_in(split::base)) {
            if (!centers.contains(id)) {
                throw ArgumentError("no center target for base class " + std::to_string(id));
            }
            if (uses_semantic(shape.source) && !semantics.contains(id)) {
                throw MissingSemanticsError("no semantic embedding for base class " + std::to_string(id));
            }
            const auto& idx = cache.records_of(id);
            records_.insert(records_.end(), idx.begin(), idx.end());
        }
        std::sort(records_.begin(), records_.end());
        if (records_.empty()) {
            throw ArgumentError("base split has no records");
        }
    }

    std::size_t sample_count() const noexcept { return records_.size(); }

    /// Record order for one epoch; depends only on (seed, epoch).
    std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch) const {
        std::vector<std::size_t> order = records_;
        Rng rng = derive_rng(seed, static_cast<std::uint64_t>(epoch), salt::shuffle);
        std::shuffle(order.begin(), order.end(), rng);
        return order;
    }

    TrainingBatch make_batch(std::span<const std::size_t> picks) const {
        const auto rows = static_cast<Eigen::Index>(picks.size());
        const bool with_sem = uses_semantic(shape_.source);
        TrainingBatch b;
        b.visual.resize(rows, static_cast<Eigen::Index>(shape_.visual_dim));
        b.semantic.resize(rows, with_sem ? static_cast<Eigen::Index>(shape_.text_dim) : 0);
        b.target_center.resize(rows, static_cast<Eigen::Index>(shape_.visual_dim));
        for (Eigen::Index r = 0; r < rows; ++r) {
            const std::size_t rec = picks[static_cast<std::size_t>(r)];
            const ClassId id = cache_.class_id(rec);
            if (cache_.split_of(id) != std::optional<std::string>(split::base)) {
                throw Error("training touched non-base record " + std::to_string(rec) + " (class " +
                            std::to_string(id) + ")");
            }
            b.visual.row(r) = cache_.row(rec).cast<double>().transpose();
            if (with_sem) {
                b.semantic.row(r) = semantics_.at(id).transpose();
            }
            b.target_center.row(r) = centers_.at(id).transpose();
        }
        return b;
    }

    std::size_t batch_size() const noexcept { return batch_size_; }

  private:
    const FeatureCache& cache_;
    const ClassSemanticVectors& semantics_;
    const ClassCenterSet& centers_;
    const AlignmentNetwork& shape_;
    std::size_t batch_size_;
    std::vector<std::size_t> records_;
};

/// Stage-two training: every base record is paired with its class-level semantic
/// and regressed onto its class center under L1 loss.
inline TrainResult train(const FeatureCache& cache, const ClassSemanticVectors& semantics,
                         const ClassCenterSet& centers, const TrainConfig& config) {
    config.validate();
    std::size_t text_dim = 0;
    if (uses_semantic(config.alignment_source)) {
        if (semantics.empty()) {
            throw MissingSemanticsError("alignment source uses semantics but none were provided");
        }
        text_dim = static_cast<std::size_t>(semantics.begin()->second.size());
    }
    TrainResult result{init_network(cache.dim(), text_dim, config.hidden_dim, config.seed, config.alignment_source,
                                    config.leaky_slope, config.use_bias),
                       {}};
    AlignmentNetwork& net = result.network;
    BaseBatchIterator batches(cache, semantics, centers, net, static_cast<std::size_t>(config.batch_size));
    AdamState state = AdamState::for_network(net);
    const AdamHyper hp = config.adam();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto order = batches.epoch_order(config.seed, epoch);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batches.batch_size()) {
            const std::size_t len = std::min(batches.batch_size(), order.size() - start);
            const TrainingBatch batch = batches.make_batch(std::span(order).subspan(start, len));
            const auto lg = loss_and_gradients(net, batch);
            total += lg.loss * static_cast<double>(len);
            adam_step(net, lg.grads, state, hp);
        }
        result.loss_curve.push_back(total / static_cast<double>(order.size()));
    }
    if (!net.all_finite()) {
        throw NumericsError("training produced non-finite parameters");
    }
    return result;
}

// ---- gradient checking ------------------------------------------------------------

struct GradCheckOptions {
    double step = 1e-5;
    std::size_t coordinates = 200; ///< sampled coordinates (all of them if the net is smaller)
    std::uint64_t seed = 0;
    double kink_margin = 1e-7;
    double denominator_floor = 1e-6; ///< lower bound of the relative-error denominator
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_near_kink = 0;
};

/// Flat coordinates (canonical W1, b1, W2, b2 order) that a grad check visits.
inline std::vector<std::size_t> grad_check_coordinates(const AlignmentNetwork& net, const GradCheckOptions& opts) {
    const std::size_t total = parameter_count(net);
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (!net.use_bias) {
        const auto w1 = static_cast<std::size_t>(net.w1.size());
        const auto b1 = static_cast<std::size_t>(net.b1.size());
        const auto w2 = static_cast<std::size_t>(net.w2.size());
        std::erase_if(all, [&](std::size_t i) { return (i >= w1 && i < w1 + b1) || i >= w1 + b1 + w2; });
    }
    if (all.size() <= opts.coordinates) {
        return all;
    }
    Rng rng = derive_rng(opts.seed, 0, salt::grad_check);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(opts.coordinates);
    std::sort(all.begin(), all.end());
    return all;
}

namespace detail {

inline double& flat_parameter(std::array<std::span<double>, 4>& blocks, std::size_t i) {
    for (auto& b : blocks) {
        if (i < b.size()) {
            return b[i];
        }
        i -= b.size();
    }
    throw ArgumentError("parameter index out of range");
}

inline double flat_value(const std::array<std::span<const double>, 4>& blocks, std::size_t i) {
    for (const auto& b : blocks) {
        if (i < b.size()) {
            return b[i];
        }
        i -= b.size();
    }
    throw ArgumentError("parameter index out of range");
}

struct Trace {
    Eigen::MatrixXd preact;
    Eigen::MatrixXd residual;
};

inline Trace trace(const AlignmentNetwork& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) {
    Trace t;
    t.preact = x * net.w1;
    t.preact.rowwise() += net.b1.transpose();
    t.residual = leaky_relu(t.preact, net.leaky_slope) * net.w2;
    t.residual.rowwise() += net.b2.transpose();
    t.residual -= target;
    return t;
}

inline bool same_sign_pattern(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double margin) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double u = a.data()[i];
        const double v = b.data()[i];
        if ((u > 0.0) != (v > 0.0) || (u != v && std::min(std::abs(u), std::abs(v)) < margin)) {
            return false;
        }
    }
    return true;
}

} // namespace detail

/// Compares `analytic` against central differences of the batch loss,
/// accumulated per output element. Coordinates whose perturbation moves any
/// pre-activation or residual across (or within `kink_margin` of) zero are
/// skipped.
inline GradCheckResult compare_gradients(const AlignmentNetwork& net, const TrainingBatch& batch,
                                         const Gradients& analytic, const GradCheckOptions& opts = {}) {
    if (!(opts.step > 0.0)) {
        throw ArgumentError("finite-difference step must be positive");
    }
    const Eigen::MatrixXd x = assemble_input(net, batch.visual, batch.semantic);
    const auto base = detail::trace(net, x, batch.target_center);
    const double inv_rows = 1.0 / static_cast<double>(x.rows());
    const auto grad_blocks = parameter_blocks(analytic);

    AlignmentNetwork probe = net;
    auto blocks = parameter_blocks(probe);
    GradCheckResult res;
    for (std::size_t coord : grad_check_coordinates(net, opts)) {
        double& p = detail::flat_parameter(blocks, coord);
        const double saved = p;
        p = saved + opts.step;
        const auto plus = detail::trace(probe, x, batch.target_center);
        p = saved - opts.step;
        const auto minus = detail::trace(probe, x, batch.target_center);
        p = saved;

        if (!detail::same_sign_pattern(base.preact, plus.preact, opts.kink_margin) ||
            !detail::same_sign_pattern(base.preact, minus.preact, opts.kink_margin) ||
            !detail::same_sign_pattern(base.residual, plus.residual, opts.kink_margin) ||
            !detail::same_sign_pattern(base.residual, minus.residual, opts.kink_margin)) {
            ++res.skipped_near_kink;
            continue;
        }
        const double diff = (plus.residual.cwiseAbs() - minus.residual.cwiseAbs()).sum() * inv_rows;
        const double numeric = diff / (2.0 * opts.step);
        const double exact = detail::flat_value(grad_blocks, coord);
        const double denom = std::max({std::abs(exact), std::abs(numeric), opts.denominator_floor});
        const double rel = std::abs(exact - numeric) / denom;
        if (!std::isfinite(rel)) {
            throw NumericsError("non-finite gradient comparison");
        }
        res.max_relative_error = std::max(res.max_relative_error, rel);
        ++res.checked;
    }
    return res;
}

inline GradCheckResult grad_check(const AlignmentNetwork& net, const TrainingBatch& batch, double step,
                                  GradCheckOptions opts = {}) {
    opts.step = step;
    return compare_gradients(net, batch, backward(net, batch), opts);
}

} // namespace semfew
