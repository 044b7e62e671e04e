#pragma once

// Embedding cache (.sfew) format, loading/validation and class-center targets.
//
// Layout, all integers little-endian:
//   bytes 0..3   "SFEW"
//   u32          format version (1)
//   u32          length L of the JSON header block
//   L bytes      JSON: {visual_dim, record_count, dtype, dataset_name, split_table}
//   records      record_count x (u32 class_id, visual_dim x f32)

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semfew/binary_io.hpp"
#include "semfew/errors.hpp"

namespace semfew {

using ClassId = std::uint32_t;
using SplitTable = std::map<std::string, std::vector<ClassId>>;

namespace split {
inline constexpr const char* base = "base";
inline constexpr const char* val = "val";
inline constexpr const char* novel = "novel";
} // namespace split

struct FeatureCacheHeader {
    static constexpr std::array<char, 4> magic{'S', 'F', 'E', 'W'};
    static constexpr std::uint32_t version = 1;

    std::uint32_t visual_dim = 0;
    std::uint64_t record_count = 0;
    std::string dtype = "f32";
    std::string dataset_name;
    SplitTable split_table;

    bool operator==(const FeatureCacheHeader&) const = default;
};

struct FeatureRecord {
    ClassId class_id = 0;
    std::vector<float> vector;

    bool operator==(const FeatureRecord&) const = default;
};

/// Center vector per class, in visual space.
using ClassCenterSet = std::map<ClassId, Eigen::VectorXd>;

namespace detail {

inline void check_split_disjoint(const SplitTable& splits) {
    std::map<ClassId, std::string> owner;
    for (const auto& [name, ids] : splits) {
        std::set<ClassId> seen;
        for (ClassId id : ids) {
            if (!seen.insert(id).second) {
                throw FormatError("class " + std::to_string(id) + " listed twice in split '" + name + "'");
            }
            auto [it, fresh] = owner.emplace(id, name);
            if (!fresh) {
                throw FormatError("class " + std::to_string(id) + " appears in splits '" + it->second + "' and '" +
                                  name + "'");
            }
        }
    }
}

inline nlohmann::json header_to_json(const FeatureCacheHeader& h) {
    nlohmann::json splits = nlohmann::json::object();
    for (const auto& [name, ids] : h.split_table) {
        splits[name] = ids;
    }
    return {{"visual_dim", h.visual_dim},
            {"record_count", h.record_count},
            {"dtype", h.dtype},
            {"dataset_name", h.dataset_name},
            {"split_table", splits}};
}

} // namespace detail

/// Immutable in-memory view of a loaded cache. Vectors are stored row-major in
/// file order; record order defines summation order everywhere downstream.
class FeatureCache {
  public:
    FeatureCache() = default;

    FeatureCache(FeatureCacheHeader header, std::vector<ClassId> labels, std::vector<float> values)
        : header_(std::move(header)), labels_(std::move(labels)), values_(std::move(values)) {
        if (header_.visual_dim == 0) {
            throw DimensionError("visual_dim must be positive");
        }
        if (values_.size() != labels_.size() * header_.visual_dim) {
            throw DimensionError("value count does not match labels x visual_dim");
        }
        header_.record_count = labels_.size();
        detail::check_split_disjoint(header_.split_table);
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            by_class_[labels_[i]].push_back(i);
        }
        for (const auto& [name, ids] : header_.split_table) {
            for (ClassId id : ids) {
                split_of_[id] = name;
            }
        }
    }

    static FeatureCache from_records(FeatureCacheHeader header, std::span<const FeatureRecord> records) {
        std::vector<ClassId> labels;
        std::vector<float> values;
        labels.reserve(records.size());
        values.reserve(records.size() * header.visual_dim);
        for (const auto& r : records) {
            if (r.vector.size() != header.visual_dim) {
                throw DimensionError("record vector length " + std::to_string(r.vector.size()) +
                                     " != visual_dim " + std::to_string(header.visual_dim));
            }
            labels.push_back(r.class_id);
            values.insert(values.end(), r.vector.begin(), r.vector.end());
        }
        return FeatureCache(std::move(header), std::move(labels), std::move(values));
    }

    const FeatureCacheHeader& header() const noexcept { return header_; }
    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return header_.visual_dim; }
    ClassId class_id(std::size_t i) const { return labels_.at(i); }

    std::span<const float> vector(std::size_t i) const {
        return {values_.data() + i * header_.visual_dim, header_.visual_dim};
    }

    Eigen::Map<const Eigen::VectorXf> row(std::size_t i) const {
        return {values_.data() + i * header_.visual_dim, static_cast<Eigen::Index>(header_.visual_dim)};
    }

    /// Record indices of a class in file order (empty if the class has none).
    const std::vector<std::size_t>& records_of(ClassId id) const {
        static const std::vector<std::size_t> none;
        auto it = by_class_.find(id);
        return it == by_class_.end() ? none : it->second;
    }

    bool has_split(const std::string& name) const { return header_.split_table.contains(name); }

    const std::vector<ClassId>& classes_in(const std::string& split_name) const {
        auto it = header_.split_table.find(split_name);
        if (it == header_.split_table.end()) {
            throw ArgumentError("unknown split '" + split_name + "'");
        }
        return it->second;
    }

    std::optional<std::string> split_of(ClassId id) const {
        auto it = split_of_.find(id);
        if (it == split_of_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    std::vector<FeatureRecord> records() const {
        std::vector<FeatureRecord> out;
        out.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) {
            auto v = vector(i);
            out.push_back({labels_[i], {v.begin(), v.end()}});
        }
        return out;
    }

    const std::vector<float>& raw_values() const noexcept { return values_; }
    const std::vector<ClassId>& labels() const noexcept { return labels_; }

  private:
    FeatureCacheHeader header_;
    std::vector<ClassId> labels_;
    std::vector<float> values_;
    std::unordered_map<ClassId, std::vector<std::size_t>> by_class_;
    std::unordered_map<ClassId, std::string> split_of_;
};

/// Serializes header and records into the .sfew byte layout.
inline std::string encode_cache(const FeatureCacheHeader& header, std::span<const FeatureRecord> records) {
    if (header.visual_dim == 0) {
        throw DimensionError("visual_dim must be positive");
    }
    if (header.record_count != records.size()) {
        throw ArgumentError("header.record_count " + std::to_string(header.record_count) + " != " +
                            std::to_string(records.size()) + " records");
    }
    if (header.dtype != "f32") {
        throw ArgumentError("unsupported dtype '" + header.dtype + "'");
    }
    try {
        detail::check_split_disjoint(header.split_table);
    } catch (const FormatError& e) {
        throw ArgumentError(e.what());
    }
    for (const auto& r : records) {
        if (r.vector.size() != header.visual_dim) {
            throw DimensionError("record of class " + std::to_string(r.class_id) + " has length " +
                                 std::to_string(r.vector.size()) + ", expected " +
                                 std::to_string(header.visual_dim));
        }
        for (float v : r.vector) {
            if (!std::isfinite(v)) {
                throw DataError("non-finite value in record of class " + std::to_string(r.class_id));
            }
        }
    }

    const std::string json = detail::header_to_json(header).dump();
    std::string out;
    out.reserve(12 + json.size() + records.size() * (4 + 4 * header.visual_dim));
    out.append(FeatureCacheHeader::magic.data(), 4);
    detail::put_u32(out, FeatureCacheHeader::version);
    detail::put_u32(out, static_cast<std::uint32_t>(json.size()));
    out += json;
    for (const auto& r : records) {
        detail::put_u32(out, r.class_id);
        for (float v : r.vector) {
            detail::put_f32(out, v);
        }
    }
    return out;
}

inline void write_cache(const FeatureCacheHeader& header, std::span<const FeatureRecord> records,
                        const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_cache(header, records));
}

inline void write_cache(const FeatureCache& cache, const std::filesystem::path& path) {
    auto records = cache.records();
    write_cache(cache.header(), records, path);
}

inline FeatureCache decode_cache(std::span<const char> bytes) {
    if (bytes.size() < 12) {
        throw FormatError("file too short for a cache header");
    }
    if (!std::equal(FeatureCacheHeader::magic.begin(), FeatureCacheHeader::magic.end(), bytes.begin())) {
        throw FormatError("bad magic, expected SFEW");
    }
    if (auto v = detail::get_u32(bytes, 4); v != FeatureCacheHeader::version) {
        throw FormatError("unsupported cache version " + std::to_string(v));
    }
    const std::size_t json_len = detail::get_u32(bytes, 8);
    if (bytes.size() < 12 + json_len) {
        throw FormatError("truncated header block");
    }

    FeatureCacheHeader header;
    try {
        auto j = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + json_len);
        header.visual_dim = j.at("visual_dim").get<std::uint32_t>();
        header.record_count = j.at("record_count").get<std::uint64_t>();
        header.dtype = j.at("dtype").get<std::string>();
        header.dataset_name = j.value("dataset_name", std::string{});
        for (const auto& [name, ids] : j.at("split_table").items()) {
            header.split_table[name] = ids.get<std::vector<ClassId>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed header block: ") + e.what());
    }
    if (header.dtype != "f32") {
        throw FormatError("unsupported dtype '" + header.dtype + "'");
    }
    if (header.visual_dim == 0) {
        throw FormatError("visual_dim must be positive");
    }
    detail::check_split_disjoint(header.split_table);

    const std::size_t stride = 4 + 4 * static_cast<std::size_t>(header.visual_dim);
    const std::size_t payload = bytes.size() - 12 - json_len;
    if (payload != header.record_count * stride) {
        throw FormatError("record payload is " + std::to_string(payload) + " bytes, expected " +
                          std::to_string(header.record_count * stride) + " (truncated or trailing data)");
    }

    std::vector<ClassId> labels(header.record_count);
    std::vector<float> values(header.record_count * header.visual_dim);
    std::size_t offset = 12 + json_len;
    for (std::size_t i = 0; i < header.record_count; ++i) {
        labels[i] = detail::get_u32(bytes, offset);
        offset += 4;
        for (std::size_t d = 0; d < header.visual_dim; ++d, offset += 4) {
            float v = detail::get_f32(bytes, offset);
            if (!std::isfinite(v)) {
                throw DataError("non-finite entry in record " + std::to_string(i));
            }
            values[i * header.visual_dim + d] = v;
        }
    }
    return FeatureCache(std::move(header), std::move(labels), std::move(values));
}

inline FeatureCache read_cache(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    return decode_cache(bytes);
}

/// Arithmetic mean of the given records, accumulated in double in index order.
inline Eigen::VectorXd mean_of(const FeatureCache& cache, std::span<const std::size_t> indices) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cache.dim()));
    for (std::size_t i : indices) {
        sum += cache.row(i).cast<double>();
    }
    return sum / static_cast<double>(indices.size());
}

inline ClassCenterSet class_centers(const FeatureCache& cache, const std::string& split_name) {
    ClassCenterSet centers;
    for (ClassId id : cache.classes_in(split_name)) {
        const auto& idx = cache.records_of(id);
        if (idx.empty()) {
            throw EmptyClassError("class " + std::to_string(id) + " has no records");
        }
        centers.emplace(id, mean_of(cache, idx));
    }
    return centers;
}

// ---- class table -----------------------------------------------------------

struct ClassEntry {
    ClassId class_id = 0;
    std::string class_name;
    std::optional<std::string> wordnet_key;

    bool operator==(const ClassEntry&) const = default;
};

using ClassTable = std::vector<ClassEntry>;

/// `{"<id>": {"name": ..., "wordnet_key": ...}}`, sorted by id.
inline ClassTable parse_class_table(const nlohmann::json& j) {
    ClassTable table;
    try {
        for (const auto& [key, value] : j.items()) {
            ClassEntry e;
            e.class_id = static_cast<ClassId>(std::stoul(key));
            e.class_name = value.at("name").get<std::string>();
            if (value.contains("wordnet_key") && !value.at("wordnet_key").is_null()) {
                e.wordnet_key = value.at("wordnet_key").get<std::string>();
            }
            if (e.class_name.empty()) {
                throw FormatError("class " + key + " has an empty name");
            }
            table.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed class table: ") + e.what());
    } catch (const std::logic_error&) {
        throw FormatError("class table keys must be integer class ids");
    }
    std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return a.class_id < b.class_id; });
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (table[i].class_id == table[i - 1].class_id) {
            throw FormatError("duplicate class id " + std::to_string(table[i].class_id));
        }
    }
    return table;
}

inline nlohmann::json class_table_to_json(const ClassTable& table) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& e : table) {
        nlohmann::json v{{"name", e.class_name}};
        v["wordnet_key"] = e.wordnet_key ? nlohmann::json(*e.wordnet_key) : nlohmann::json(nullptr);
        j[std::to_string(e.class_id)] = std::move(v);
    }
    return j;
}

inline ClassTable load_class_table(const std::filesystem::path& path) {
    try {
        return parse_class_table(nlohmann::json::parse(detail::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void save_class_table(const ClassTable& table, const std::filesystem::path& path) {
    detail::write_file_atomic(path, class_table_to_json(table).dump(2));
}

// ---- center sets on disk ----------------------------------------------------

inline nlohmann::json centers_to_json(const ClassCenterSet& centers) {
    nlohmann::json list = nlohmann::json::array();
    std::size_t dim = 0;
    for (const auto& [id, c] : centers) {
        dim = static_cast<std::size_t>(c.size());
        list.push_back({{"class_id", id}, {"vector", std::vector<double>(c.data(), c.data() + c.size())}});
    }
    return {{"visual_dim", dim}, {"centers", list}};
}

inline ClassCenterSet centers_from_json(const nlohmann::json& j) {
    ClassCenterSet out;
    try {
        const auto dim = j.at("visual_dim").get<std::size_t>();
        for (const auto& e : j.at("centers")) {
            const auto& vec = e.at("vector");
            if (vec.size() != dim) {
                throw DimensionError("center length " + std::to_string(vec.size()) + " != " + std::to_string(dim));
            }
            Eigen::VectorXd c(static_cast<Eigen::Index>(dim));
            for (std::size_t d = 0; d < dim; ++d) {
                if (!vec[d].is_number()) {
                    throw DataError("non-numeric center entry");
                }
                c[static_cast<Eigen::Index>(d)] = vec[d].get<double>();
                if (!std::isfinite(c[static_cast<Eigen::Index>(d)])) {
                    throw DataError("non-finite center entry");
                }
            }
            out.emplace(e.at("class_id").get<ClassId>(), std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed center set: ") + e.what());
    }
    return out;
}

inline void save_centers(const ClassCenterSet& centers, const std::filesystem::path& path) {
    detail::write_file_atomic(path, centers_to_json(centers).dump());
}

inline ClassCenterSet load_centers(const std::filesystem::path& path) {
    try {
        return centers_from_json(nlohmann::json::parse(detail::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace semfew
