#pragma once

// Network checkpoint: "SFCK", u32 version, u32 JSON length, JSON header
// {dims, slope, source, seed, config}, then the f32 parameter blob
// (W1, b1, W2, b2; column-major; little-endian).

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "semfew/alignment_net.hpp"
#include "semfew/binary_io.hpp"
#include "semfew/errors.hpp"
#include "semfew/training.hpp"

namespace semfew {

inline constexpr char checkpoint_magic[4] = {'S', 'F', 'C', 'K'};
inline constexpr std::uint32_t checkpoint_version = 1;

struct Checkpoint {
    AlignmentNetwork network;
    nlohmann::json header;
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"hidden_dim", c.hidden_dim},
            {"seed", c.seed},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"alignment_source", to_string(c.alignment_source)},
            {"leaky_slope", c.leaky_slope},
            {"use_bias", c.use_bias}};
}

inline std::string encode_checkpoint(const AlignmentNetwork& net, const TrainConfig& config,
                                     const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json header{{"dims",
                           {{"visual_dim", net.visual_dim},
                            {"text_dim", net.text_dim},
                            {"hidden_dim", net.hidden_dim},
                            {"input_dim", net.input_dim()}}},
                          {"slope", net.leaky_slope},
                          {"use_bias", net.use_bias},
                          {"source", to_string(net.source)},
                          {"seed", config.seed},
                          {"config", train_config_to_json(config)},
                          {"parameter_count", parameter_count(net)},
                          {"extra", extra}};
    const std::string json = header.dump();
    std::string out(checkpoint_magic, 4);
    detail::put_u32(out, checkpoint_version);
    detail::put_u32(out, static_cast<std::uint32_t>(json.size()));
    out += json;
    for (const auto& block : parameter_blocks(net)) {
        for (double v : block) {
            detail::put_f32(out, static_cast<float>(v));
        }
    }
    return out;
}

inline void save_checkpoint(const AlignmentNetwork& net, const TrainConfig& config, const std::filesystem::path& path,
                            const nlohmann::json& extra = nlohmann::json::object()) {
    detail::write_file_atomic(path, encode_checkpoint(net, config, extra));
}

inline Checkpoint decode_checkpoint(std::span<const char> bytes) {
    if (bytes.size() < 12 || !std::equal(checkpoint_magic, checkpoint_magic + 4, bytes.begin())) {
        throw FormatError("not a checkpoint file");
    }
    if (detail::get_u32(bytes, 4) != checkpoint_version) {
        throw FormatError("unsupported checkpoint version");
    }
    const std::size_t json_len = detail::get_u32(bytes, 8);
    if (bytes.size() < 12 + json_len) {
        throw FormatError("truncated checkpoint header");
    }
    Checkpoint ck;
    AlignmentNetwork& net = ck.network;
    try {
        ck.header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + json_len);
        const auto& dims = ck.header.at("dims");
        net = init_network(dims.at("visual_dim").get<std::size_t>(), dims.at("text_dim").get<std::size_t>(),
                           dims.at("hidden_dim").get<std::size_t>(), 0,
                           parse_alignment_source(ck.header.at("source").get<std::string>()),
                           ck.header.at("slope").get<double>(), ck.header.value("use_bias", true));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("invalid checkpoint header: ") + e.what());
    }
    const std::size_t count = parameter_count(net);
    if (bytes.size() - 12 - json_len != 4 * count) {
        throw FormatError("checkpoint parameter blob has the wrong size");
    }
    std::size_t offset = 12 + json_len;
    for (auto& block : parameter_blocks(net)) {
        for (double& v : block) {
            v = static_cast<double>(detail::get_f32(bytes, offset));
            offset += 4;
        }
    }
    if (!net.all_finite()) {
        throw DataError("checkpoint contains non-finite parameters");
    }
    return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    return decode_checkpoint(bytes);
}

} // namespace semfew
