#pragma once

// Chat-completion client with exponential-backoff retries and a
// content-addressed on-disk paraphrase cache.

#include <Eigen/Core>
#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "semfew/binary_io.hpp"
#include "semfew/errors.hpp"
#include "semfew/semantic_evolution.hpp"

namespace semfew {

struct LlmConfig {
    std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
    std::string model_name = "gpt-3.5-turbo";
    std::string api_key_env_var = "OPENAI_API_KEY";
    int max_retries = 3;
    double timeout_seconds = 60.0;
    double temperature = 0.0;
    double backoff_base_seconds = 1.0;
    double backoff_factor = 2.0;

    void validate() const {
        if (max_retries < 0) {
            throw ConfigError("max_retries must be >= 0");
        }
        if (!(timeout_seconds > 0.0)) {
            throw ConfigError("timeout_seconds must be > 0");
        }
        if (backoff_base_seconds < 0.0 || backoff_factor < 1.0) {
            throw ConfigError("backoff must be non-negative and non-shrinking");
        }
    }
};

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

/// Depends on the prompt and model only; transport settings never change it.
inline std::string paraphrase_cache_key(std::string_view prompt, std::string_view model_name) {
    std::string material(prompt);
    material.append(model_name);
    return sha256_hex(material);
}

/// One UTF-8 text file per key under a directory.
class ParaphraseCache {
  public:
    explicit ParaphraseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".txt"); }

    std::optional<std::string> get(const std::string& key) const {
        auto p = path_for(key);
        std::error_code ec;
        if (!std::filesystem::is_regular_file(p, ec)) {
            return std::nullopt;
        }
        return detail::read_file(p);
    }

    void put(const std::string& key, std::string_view text) const { detail::write_file_atomic(path_for(key), text); }

    const std::filesystem::path& dir() const noexcept { return dir_; }

  private:
    std::filesystem::path dir_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;
};

inline ParsedUrl parse_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint url needs a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// Posts `{model, messages:[{role:user, content}], temperature}` and returns
/// `choices[0].message.content`.
class LlmClient {
  public:
    explicit LlmClient(LlmConfig config, Sleeper sleeper = real_sleep)
        : config_(std::move(config)), sleeper_(std::move(sleeper)) {
        config_.validate();
    }

    const LlmConfig& config() const noexcept { return config_; }

    /// Number of HTTP requests attempted so far (including failed ones).
    int request_count() const noexcept { return requests_.load(); }

    std::string complete(const std::string& prompt) {
        const char* key = std::getenv(config_.api_key_env_var.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigError("environment variable " + config_.api_key_env_var + " is not set");
        }
        const auto url = parse_endpoint(config_.endpoint_url);
        const nlohmann::json body{{"model", config_.model_name},
                                  {"messages", {{{"role", "user"}, {"content", prompt}}}},
                                  {"temperature", config_.temperature}};
        const std::string payload = body.dump();

        std::string last_failure;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                const double delay = config_.backoff_base_seconds * std::pow(config_.backoff_factor, attempt - 1);
                sleeper_(std::chrono::milliseconds(static_cast<long long>(std::llround(delay * 1000.0))));
            }
            ++requests_;
            httplib::Client cli(url.scheme_host_port);
            const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
            cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
            cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
            cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
            httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

            auto res = cli.Post(url.path, headers, payload, "application/json");
            if (!res) {
                last_failure = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 408 || res->status == 429 || res->status >= 500) {
                last_failure = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw LlmUnavailableError("LLM endpoint rejected the request: HTTP " + std::to_string(res->status));
            }
            std::string content;
            try {
                content = nlohmann::json::parse(res->body)
                              .at("choices")
                              .at(0)
                              .at("message")
                              .at("content")
                              .get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                throw LlmResponseError(std::string("unexpected LLM response: ") + e.what());
            }
            content = single_paragraph(content);
            if (content.empty()) {
                throw LlmResponseError("LLM returned an empty completion");
            }
            return content;
        }
        throw LlmUnavailableError("LLM unavailable after " + std::to_string(config_.max_retries + 1) +
                                  " attempts (" + last_failure + ")");
    }

  private:
    LlmConfig config_;
    Sleeper sleeper_;
    std::atomic<int> requests_{0};
};

struct ParaphraseOptions {
    bool offline = false; ///< never touch the network; a cache miss is an error
};

/// Fills `entry.paraphrase`, from the cache when possible.
inline ClassSemantics paraphrase_class(ClassSemantics entry, LlmClient& client, const ParaphraseCache& cache,
                                       const ParaphraseOptions& opts = {}) {
    if (entry.definition.empty()) {
        throw ArgumentError("class " + std::to_string(entry.class_id) + " has no definition to paraphrase");
    }
    const std::string prompt = build_prompt(entry.class_name, entry.definition);
    const std::string key = paraphrase_cache_key(prompt, client.config().model_name);
    if (auto hit = cache.get(key)) {
        entry.paraphrase = std::move(*hit);
        return entry;
    }
    if (opts.offline) {
        throw LlmUnavailableError("offline mode: no cached paraphrase for class " + std::to_string(entry.class_id) +
                                  " (key " + key + ")");
    }
    std::string text = client.complete(prompt);
    cache.put(key, text);
    entry.paraphrase = std::move(text);
    return entry;
}

struct CorpusBuildOptions {
    std::string name_template{default_name_template};
    bool offline = false;
    unsigned workers = 1;
};

/// Builds one ClassSemantics per class. Each class is processed from its own
/// name and definition only.
inline SemanticCorpus build_corpus(const ClassTable& classes, const std::map<ClassId, std::string>& definitions,
                                   LlmClient& client, const ParaphraseCache& cache,
                                   const CorpusBuildOptions& opts = {}) {
    SemanticCorpus corpus(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) {
        corpus[i].class_id = classes[i].class_id;
        corpus[i].class_name = classes[i].class_name;
        corpus[i].name_template_text = opts.name_template;
        if (auto it = definitions.find(classes[i].class_id); it != definitions.end()) {
            corpus[i].definition = it->second;
        }
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (std::size_t i = next++; i < corpus.size(); i = next++) {
            if (corpus[i].definition.empty()) {
                continue;
            }
            try {
                corpus[i] = paraphrase_class(corpus[i], client, cache, {opts.offline});
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        }
    };
    const unsigned n = std::max(1u, opts.workers);
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n; ++t) {
            pool.emplace_back(worker);
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
    return corpus;
}

} // namespace semfew
