#pragma once

#include <Eigen/Core>

#include <deque>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace semfew::testing {

/// Local chat-completions endpoint that replays a script of (status, content)
/// replies and records every request body. When the script runs out it echoes
/// "paraphrase: <prompt>".
class MockLlmServer {
  public:
    MockLlmServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mutex_);
            bodies_.push_back(req.body);
            auth_.push_back(req.get_header_value("Authorization"));
            int status = 200;
            std::string content;
            if (!script_.empty()) {
                std::tie(status, content) = script_.front();
                script_.pop_front();
            } else {
                content = "paraphrase: " +
                          nlohmann::json::parse(req.body).at("messages").at(0).at("content").get<std::string>();
            }
            res.status = status;
            if (status == 200) {
                const nlohmann::json body{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
                res.set_content(body.dump(), "application/json");
            } else {
                res.set_content(content, "text/plain");
            }
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockLlmServer() {
        server_.stop();
        thread_.join();
    }

    MockLlmServer(const MockLlmServer&) = delete;
    MockLlmServer& operator=(const MockLlmServer&) = delete;

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

    void script(std::vector<std::pair<int, std::string>> replies) {
        std::lock_guard lock(mutex_);
        script_.assign(replies.begin(), replies.end());
    }

    std::vector<std::string> bodies() const {
        std::lock_guard lock(mutex_);
        return bodies_;
    }

    std::vector<std::string> auth_headers() const {
        std::lock_guard lock(mutex_);
        return auth_;
    }

    std::size_t hits() const {
        std::lock_guard lock(mutex_);
        return bodies_.size();
    }

  private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    mutable std::mutex mutex_;
    std::deque<std::pair<int, std::string>> script_;
    std::vector<std::string> bodies_;
    std::vector<std::string> auth_;
};

} // namespace semfew::testing
