#pragma once

// Class name -> curated definition -> LLM paraphrase, plus the text-embedding
// container produced by an external text encoder.

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semfew/binary_io.hpp"
#include "semfew/errors.hpp"
#include "semfew/feature_store.hpp"

namespace semfew {

enum class SemanticSource { NameTemplate, Definition, Paraphrase };

inline constexpr std::string_view to_string(SemanticSource s) {
    switch (s) {
    case SemanticSource::NameTemplate:
        return "name_template";
    case SemanticSource::Definition:
        return "definition";
    case SemanticSource::Paraphrase:
        return "paraphrase";
    }
    return "?";
}

inline SemanticSource parse_semantic_source(std::string_view text) {
    if (text == "name_template" || text == "name") {
        return SemanticSource::NameTemplate;
    }
    if (text == "definition") {
        return SemanticSource::Definition;
    }
    if (text == "paraphrase") {
        return SemanticSource::Paraphrase;
    }
    throw ArgumentError("unknown semantic source '" + std::string(text) + "'");
}

inline constexpr std::string_view default_name_template = "A photo of a {class_name}.";
inline constexpr std::string_view cub_name_template = "The Photo of a bird called {class_name}";

struct ClassSemantics {
    ClassId class_id = 0;
    std::string class_name;
    std::string definition;
    std::optional<std::string> paraphrase;
    std::string name_template_text{default_name_template};

    bool operator==(const ClassSemantics&) const = default;
};

/// Paraphrase request for one class. Substitution is verbatim.
inline std::string build_prompt(std::string_view class_name, std::string_view definition) {
    if (class_name.empty() || definition.empty()) {
        throw ArgumentError("build_prompt needs a class name and a definition");
    }
    std::string out;
    out.reserve(definition.size() + class_name.size() + 200);
    out.append(definition);
    out.append(" is the definition of the ");
    out.append(class_name);
    out.append(". Please rewrite and expand this definition to make it more detailed and consistent with "
               "scientific fact. Briefness is required, using only one paragraph.");
    return out;
}

/// Replaces every `{class_name}` placeholder.
inline std::string apply_name_template(std::string_view tmpl, std::string_view class_name) {
    static constexpr std::string_view placeholder = "{class_name}";
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto hit = tmpl.find(placeholder, pos);
        out.append(tmpl.substr(pos, hit - pos));
        if (hit == std::string_view::npos) {
            break;
        }
        out.append(class_name);
        pos = hit + placeholder.size();
    }
    return out;
}

inline std::string semantic_text(const ClassSemantics& entry, SemanticSource source) {
    switch (source) {
    case SemanticSource::NameTemplate:
        return apply_name_template(entry.name_template_text, entry.class_name);
    case SemanticSource::Definition:
        if (entry.definition.empty()) {
            throw MissingSemanticsError("class " + std::to_string(entry.class_id) + " has no definition");
        }
        return entry.definition;
    case SemanticSource::Paraphrase:
        if (!entry.paraphrase) {
            throw MissingSemanticsError("class " + std::to_string(entry.class_id) + " has no paraphrase");
        }
        return *entry.paraphrase;
    }
    throw ArgumentError("bad semantic source");
}

/// Collapses an LLM answer into one trimmed paragraph (line breaks become single spaces).
inline std::string single_paragraph(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        if (c == '\n' || c == '\r' || c == ' ' || c == '\t') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

// ---- corpus / definitions on disk ---------------------------------------------

using SemanticCorpus = std::vector<ClassSemantics>;

/// `definitions.json`: `{"<class_id>": "definition text"}`.
inline std::map<ClassId, std::string> load_definitions(const std::filesystem::path& path) {
    std::map<ClassId, std::string> out;
    try {
        auto j = nlohmann::json::parse(detail::read_file(path));
        for (const auto& [key, value] : j.items()) {
            out.emplace(static_cast<ClassId>(std::stoul(key)), value.get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const std::logic_error&) {
        throw FormatError(path.string() + ": keys must be integer class ids");
    }
    return out;
}

inline nlohmann::json corpus_to_json(const SemanticCorpus& corpus) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : corpus) {
        list.push_back({{"class_id", e.class_id},
                        {"class_name", e.class_name},
                        {"definition", e.definition},
                        {"paraphrase", e.paraphrase ? nlohmann::json(*e.paraphrase) : nlohmann::json(nullptr)},
                        {"name_template_text", e.name_template_text}});
    }
    return {{"classes", list}};
}

inline SemanticCorpus corpus_from_json(const nlohmann::json& j) {
    SemanticCorpus out;
    try {
        for (const auto& e : j.at("classes")) {
            ClassSemantics s;
            s.class_id = e.at("class_id").get<ClassId>();
            s.class_name = e.at("class_name").get<std::string>();
            s.definition = e.value("definition", std::string{});
            if (e.contains("paraphrase") && !e.at("paraphrase").is_null()) {
                s.paraphrase = e.at("paraphrase").get<std::string>();
            }
            s.name_template_text = e.value("name_template_text", std::string(default_name_template));
            out.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed corpus: ") + e.what());
    }
    return out;
}

inline void save_corpus(const SemanticCorpus& corpus, const std::filesystem::path& path) {
    detail::write_file_atomic(path, corpus_to_json(corpus).dump(2));
}

inline SemanticCorpus load_corpus(const std::filesystem::path& path) {
    try {
        return corpus_from_json(nlohmann::json::parse(detail::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

// ---- text embeddings ------------------------------------------------------------

/// Class-level text vectors from one encoder, keyed by (class, source).
class SemanticEmbeddingSet {
  public:
    SemanticEmbeddingSet() = default;
    SemanticEmbeddingSet(std::string encoder_name, std::size_t text_dim)
        : encoder_name_(std::move(encoder_name)), text_dim_(text_dim) {
        if (text_dim_ == 0) {
            throw DimensionError("text_dim must be positive");
        }
    }

    const std::string& encoder_name() const noexcept { return encoder_name_; }
    std::size_t text_dim() const noexcept { return text_dim_; }
    std::size_t size() const noexcept { return vectors_.size(); }
    bool empty() const noexcept { return vectors_.empty(); }

    void set(ClassId id, SemanticSource source, Eigen::VectorXd v) {
        if (static_cast<std::size_t>(v.size()) != text_dim_) {
            throw DimensionError("semantic vector length " + std::to_string(v.size()) + " != text_dim " +
                                 std::to_string(text_dim_));
        }
        if (!v.allFinite()) {
            throw DataError("non-finite semantic vector for class " + std::to_string(id));
        }
        vectors_[{id, source}] = std::move(v);
    }

    bool contains(ClassId id, SemanticSource source) const { return vectors_.contains({id, source}); }

    const Eigen::VectorXd& get(ClassId id, SemanticSource source) const {
        auto it = vectors_.find({id, source});
        if (it == vectors_.end()) {
            throw MissingSemanticsError("no " + std::string(to_string(source)) + " embedding for class " +
                                        std::to_string(id));
        }
        return it->second;
    }

    /// class_id -> vector for one source.
    std::map<ClassId, Eigen::VectorXd> for_source(SemanticSource source) const {
        std::map<ClassId, Eigen::VectorXd> out;
        for (const auto& [key, v] : vectors_) {
            if (key.second == source) {
                out.emplace(key.first, v);
            }
        }
        return out;
    }

    const std::map<std::pair<ClassId, SemanticSource>, Eigen::VectorXd>& entries() const noexcept {
        return vectors_;
    }

    bool operator==(const SemanticEmbeddingSet&) const = default;

  private:
    std::string encoder_name_;
    std::size_t text_dim_ = 0;
    std::map<std::pair<ClassId, SemanticSource>, Eigen::VectorXd> vectors_;
};

/// Class-level semantic vector per class, for a single (encoder, source) choice.
using ClassSemanticVectors = std::map<ClassId, Eigen::VectorXd>;

inline nlohmann::json semantic_embeddings_to_json(const SemanticEmbeddingSet& set) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [key, v] : set.entries()) {
        entries.push_back({{"class_id", key.first},
                           {"source", to_string(key.second)},
                           {"vector", std::vector<double>(v.data(), v.data() + v.size())}});
    }
    return {{"encoder_name", set.encoder_name()}, {"text_dim", set.text_dim()}, {"entries", entries}};
}

inline SemanticEmbeddingSet semantic_embeddings_from_json(const nlohmann::json& j) {
    std::string encoder;
    std::size_t dim = 0;
    try {
        encoder = j.at("encoder_name").get<std::string>();
        dim = j.at("text_dim").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed embedding set: ") + e.what());
    }
    SemanticEmbeddingSet set(encoder, dim);
    try {
        for (const auto& e : j.at("entries")) {
            const auto& vec = e.at("vector");
            if (vec.size() != dim) {
                throw DimensionError("embedding of class " + e.at("class_id").dump() + " has length " +
                                     std::to_string(vec.size()) + ", expected " + std::to_string(dim));
            }
            Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
            for (std::size_t d = 0; d < dim; ++d) {
                // NaN/Inf serialize as null in JSON
                if (!vec[d].is_number()) {
                    throw DataError("non-finite or non-numeric embedding entry for class " +
                                    e.at("class_id").dump());
                }
                v[static_cast<Eigen::Index>(d)] = vec[d].get<double>();
            }
            set.set(e.at("class_id").get<ClassId>(), parse_semantic_source(e.at("source").get<std::string>()),
                    std::move(v));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed embedding entry: ") + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError(e.what());
    }
    return set;
}

inline void store_semantic_embeddings(const SemanticEmbeddingSet& set, const std::filesystem::path& path) {
    detail::write_file_atomic(path, semantic_embeddings_to_json(set).dump());
}

inline SemanticEmbeddingSet load_semantic_embeddings(const std::filesystem::path& path) {
    try {
        return semantic_embeddings_from_json(nlohmann::json::parse(detail::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace semfew
