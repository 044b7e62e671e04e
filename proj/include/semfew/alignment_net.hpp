#pragma once

// Two-layer alignment network mapping (visual feature, class semantic) to a
// prototype in visual space:
//
//   r = leaky([visual | semantic] * W1 + b1) * W2 + b2
//
// trained with an L1 loss against class centers. Gradients are derived by hand.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "semfew/errors.hpp"
#include "semfew/random.hpp"

namespace semfew {

/// Which modalities feed the network (V+S=>C, V=>C, S=>C).
enum class AlignmentSource { VisualSemantic, Visual, Semantic };

inline constexpr std::string_view to_string(AlignmentSource s) {
    switch (s) {
    case AlignmentSource::VisualSemantic:
        return "vs";
    case AlignmentSource::Visual:
        return "v";
    case AlignmentSource::Semantic:
        return "s";
    }
    return "?";
}

inline AlignmentSource parse_alignment_source(std::string_view text) {
    if (text == "vs" || text == "v+s" || text == "VS") {
        return AlignmentSource::VisualSemantic;
    }
    if (text == "v" || text == "V") {
        return AlignmentSource::Visual;
    }
    if (text == "s" || text == "S") {
        return AlignmentSource::Semantic;
    }
    throw ArgumentError("unknown alignment source '" + std::string(text) + "' (expected vs, v or s)");
}

inline constexpr bool uses_visual(AlignmentSource s) { return s != AlignmentSource::Semantic; }
inline constexpr bool uses_semantic(AlignmentSource s) { return s != AlignmentSource::Visual; }

struct AlignmentNetwork {
    std::size_t visual_dim = 0;
    std::size_t text_dim = 0;
    std::size_t hidden_dim = 0;
    AlignmentSource source = AlignmentSource::VisualSemantic;
    double leaky_slope = 0.01;
    bool use_bias = true;

    Eigen::MatrixXd w1; ///< input_dim x hidden_dim
    Eigen::VectorXd b1; ///< hidden_dim
    Eigen::MatrixXd w2; ///< hidden_dim x visual_dim
    Eigen::VectorXd b2; ///< visual_dim

    std::size_t input_dim() const noexcept {
        return (uses_visual(source) ? visual_dim : 0) + (uses_semantic(source) ? text_dim : 0);
    }

    bool all_finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }

    bool operator==(const AlignmentNetwork& o) const {
        return visual_dim == o.visual_dim && text_dim == o.text_dim && hidden_dim == o.hidden_dim &&
               source == o.source && leaky_slope == o.leaky_slope && use_bias == o.use_bias && w1 == o.w1 &&
               b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
    }
};

/// Fan-in scaled uniform weights, zero biases.
inline AlignmentNetwork init_network(std::size_t visual_dim, std::size_t text_dim, std::size_t hidden_dim,
                                     std::uint64_t seed, AlignmentSource source, double leaky_slope = 0.01,
                                     bool use_bias = true) {
    if (visual_dim == 0 || hidden_dim == 0) {
        throw ArgumentError("visual_dim and hidden_dim must be positive");
    }
    if (uses_semantic(source) && text_dim == 0) {
        throw ArgumentError("text_dim must be positive when semantics are used");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
        throw ArgumentError("leaky_slope must lie in (0, 1)");
    }
    AlignmentNetwork net;
    net.visual_dim = visual_dim;
    net.text_dim = text_dim;
    net.hidden_dim = hidden_dim;
    net.source = source;
    net.leaky_slope = leaky_slope;
    net.use_bias = use_bias;

    const auto in = static_cast<Eigen::Index>(net.input_dim());
    const auto hid = static_cast<Eigen::Index>(hidden_dim);
    const auto out = static_cast<Eigen::Index>(visual_dim);
    Rng rng = derive_rng(seed, 0, salt::init);
    auto fill = [&rng](Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows));
        std::uniform_real_distribution<double> dist(-bound, bound);
        m.resize(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            for (Eigen::Index r = 0; r < rows; ++r) {
                m(r, c) = dist(rng);
            }
        }
    };
    fill(net.w1, in, hid);
    fill(net.w2, hid, out);
    net.b1 = Eigen::VectorXd::Zero(hid);
    net.b2 = Eigen::VectorXd::Zero(out);
    return net;
}

/// Row-wise network input; the modality the source does not use is omitted.
inline Eigen::MatrixXd assemble_input(const AlignmentNetwork& net, const Eigen::Ref<const Eigen::MatrixXd>& visual,
                                      const Eigen::Ref<const Eigen::MatrixXd>& semantic) {
    const bool v = uses_visual(net.source);
    const bool s = uses_semantic(net.source);
    if (v && static_cast<std::size_t>(visual.cols()) != net.visual_dim) {
        throw DimensionError("visual input has " + std::to_string(visual.cols()) + " columns, expected " +
                             std::to_string(net.visual_dim));
    }
    if (s && static_cast<std::size_t>(semantic.cols()) != net.text_dim) {
        throw DimensionError("semantic input has " + std::to_string(semantic.cols()) + " columns, expected " +
                             std::to_string(net.text_dim));
    }
    if (v && s && visual.rows() != semantic.rows()) {
        throw DimensionError("visual and semantic row counts differ");
    }
    if (v && !s) {
        return visual;
    }
    if (s && !v) {
        return semantic;
    }
    Eigen::MatrixXd x(visual.rows(), visual.cols() + semantic.cols());
    x << visual, semantic;
    return x;
}

inline Eigen::MatrixXd leaky_relu(const Eigen::MatrixXd& z, double slope) {
    return z.unaryExpr([slope](double a) { return a > 0.0 ? a : slope * a; });
}

/// Forward pass over a batch (one sample per row).
inline Eigen::MatrixXd forward_batch(const AlignmentNetwork& net, const Eigen::Ref<const Eigen::MatrixXd>& visual,
                                     const Eigen::Ref<const Eigen::MatrixXd>& semantic) {
    const Eigen::MatrixXd x = assemble_input(net, visual, semantic);
    Eigen::MatrixXd z = x * net.w1;
    z.rowwise() += net.b1.transpose();
    Eigen::MatrixXd out = leaky_relu(z, net.leaky_slope) * net.w2;
    out.rowwise() += net.b2.transpose();
    return out;
}

/// Reconstructed prototype for a single (visual, semantic) pair.
inline Eigen::VectorXd forward(const AlignmentNetwork& net, const Eigen::Ref<const Eigen::VectorXd>& visual,
                               const Eigen::Ref<const Eigen::VectorXd>& semantic) {
    return forward_batch(net, visual.transpose(), semantic.transpose()).row(0).transpose();
}

/// Sum over dimensions of |predicted - target|, averaged over rows.
inline double l1_loss(const Eigen::Ref<const Eigen::MatrixXd>& predicted, const Eigen::Ref<const Eigen::MatrixXd>& target) {
    if (predicted.rows() != target.rows() || predicted.cols() != target.cols()) {
        throw DimensionError("l1_loss shape mismatch");
    }
    if (predicted.rows() == 0) {
        throw DimensionError("l1_loss on an empty batch");
    }
    return (predicted - target).cwiseAbs().sum() / static_cast<double>(predicted.rows());
}

struct TrainingBatch {
    Eigen::MatrixXd visual;        ///< batch x visual_dim
    Eigen::MatrixXd semantic;      ///< batch x text_dim (may have 0 columns for V=>C)
    Eigen::MatrixXd target_center; ///< batch x visual_dim
};

/// Same shapes as the network parameters.
struct Gradients {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;

    static Gradients zeros_like(const AlignmentNetwork& net) {
        return {Eigen::MatrixXd::Zero(net.w1.rows(), net.w1.cols()), Eigen::VectorXd::Zero(net.b1.size()),
                Eigen::MatrixXd::Zero(net.w2.rows(), net.w2.cols()), Eigen::VectorXd::Zero(net.b2.size())};
    }

    bool all_finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }
};

struct LossAndGradients {
    double loss = 0.0;
    Gradients grads;
};

/// Analytic gradients of l1_loss(forward(batch), target).
/// Conventions at kinks: d|r|/dr = 0 at r == 0, leaky'(0) = slope.
inline LossAndGradients loss_and_gradients(const AlignmentNetwork& net, const TrainingBatch& batch) {
    const Eigen::MatrixXd x = assemble_input(net, batch.visual, batch.semantic);
    const auto rows = x.rows();
    if (batch.target_center.rows() != rows || static_cast<std::size_t>(batch.target_center.cols()) != net.visual_dim) {
        throw DimensionError("target_center shape does not match batch");
    }
    if (rows == 0) {
        throw DimensionError("empty batch");
    }

    Eigen::MatrixXd z = x * net.w1;
    z.rowwise() += net.b1.transpose();
    const Eigen::MatrixXd a = leaky_relu(z, net.leaky_slope);
    Eigen::MatrixXd out = a * net.w2;
    out.rowwise() += net.b2.transpose();
    const Eigen::MatrixXd residual = out - batch.target_center;

    const double inv_rows = 1.0 / static_cast<double>(rows);
    const Eigen::MatrixXd g_out =
        residual.unaryExpr([inv_rows](double r) { return r > 0.0 ? inv_rows : (r < 0.0 ? -inv_rows : 0.0); });
    const double slope = net.leaky_slope;
    const Eigen::MatrixXd g_z =
        (g_out * net.w2.transpose()).cwiseProduct(z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));

    LossAndGradients res;
    res.loss = residual.cwiseAbs().sum() * inv_rows;
    res.grads.w2 = a.transpose() * g_out;
    res.grads.w1 = x.transpose() * g_z;
    if (net.use_bias) {
        res.grads.b2 = g_out.colwise().sum().transpose();
        res.grads.b1 = g_z.colwise().sum().transpose();
    } else {
        res.grads.b2 = Eigen::VectorXd::Zero(net.b2.size());
        res.grads.b1 = Eigen::VectorXd::Zero(net.b1.size());
    }
    if (!std::isfinite(res.loss) || !res.grads.all_finite()) {
        throw NumericsError("non-finite loss or gradient");
    }
    return res;
}

inline Gradients backward(const AlignmentNetwork& net, const TrainingBatch& batch) {
    return loss_and_gradients(net, batch).grads;
}

// ---- Adam ----------------------------------------------------------------------

struct AdamHyper {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::int64_t step_count = 0;
    Gradients first_moment;
    Gradients second_moment;

    static AdamState for_network(const AlignmentNetwork& net) {
        return {0, Gradients::zeros_like(net), Gradients::zeros_like(net)};
    }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AlignmentNetwork& net, const Gradients& grads, AdamState& state, const AdamHyper& hp) {
    if (state.first_moment.w1.size() == 0) {
        state = AdamState::for_network(net);
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(hp.beta1, t);
    const double c2 = 1.0 - std::pow(hp.beta2, t);

    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        if (param.size() != g.size()) {
            throw DimensionError("gradient shape does not match parameter");
        }
        m = hp.beta1 * m + (1.0 - hp.beta1) * g;
        v = hp.beta2 * v + (1.0 - hp.beta2) * g.cwiseProduct(g);
        param.array() -= hp.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + hp.eps);
    };
    update(net.w1, grads.w1, state.first_moment.w1, state.second_moment.w1);
    update(net.w2, grads.w2, state.first_moment.w2, state.second_moment.w2);
    if (net.use_bias) {
        update(net.b1, grads.b1, state.first_moment.b1, state.second_moment.b1);
        update(net.b2, grads.b2, state.first_moment.b2, state.second_moment.b2);
    }
}

// ---- flat parameter access (gradient checking, serialization) ---------------------

/// Parameter blocks in canonical order W1, b1, W2, b2 (column-major within a block).
template <class Net>
auto parameter_blocks(Net& net) {
    using Ptr = std::conditional_t<std::is_const_v<Net>, const double*, double*>;
    return std::array<std::span<std::remove_pointer_t<Ptr>>, 4>{
        std::span<std::remove_pointer_t<Ptr>>{static_cast<Ptr>(net.w1.data()), static_cast<std::size_t>(net.w1.size())},
        std::span<std::remove_pointer_t<Ptr>>{static_cast<Ptr>(net.b1.data()), static_cast<std::size_t>(net.b1.size())},
        std::span<std::remove_pointer_t<Ptr>>{static_cast<Ptr>(net.w2.data()), static_cast<std::size_t>(net.w2.size())},
        std::span<std::remove_pointer_t<Ptr>>{static_cast<Ptr>(net.b2.data()), static_cast<std::size_t>(net.b2.size())}};
}

inline std::size_t parameter_count(const AlignmentNetwork& net) {
    return static_cast<std::size_t>(net.w1.size() + net.b1.size() + net.w2.size() + net.b2.size());
}

} // namespace semfew
