#pragma once

// In-process chat-completions stub for wire-client tests.

#include <atomic>
#include <chrono>
#include <functional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace fclsim::testing {

class StubChatServer {
public:
    // reply(request_index, prompt) -> assistant message content
    explicit StubChatServer(std::function<std::string(int, const std::string&)> reply,
                            int sleep_ms = 0)
        : reply_(std::move(reply)), sleep_ms_(sleep_ms) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int index = requests_.fetch_add(1);
            if (sleep_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms_));
            std::string prompt;
            const auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (!body.is_discarded() && body.contains("messages") && !body["messages"].empty())
                prompt = body["messages"][0].value("content", "");
            last_body_ = req.body;
            const nlohmann::json payload = {
                {"choices", {{{"message", {{"role", "assistant"}, {"content", reply_(index, prompt)}}}}}}};
            res.set_content(payload.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~StubChatServer() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }
    int request_count() const { return requests_.load(); }
    std::string last_body() const { return last_body_; }

private:
    httplib::Server server_;
    std::function<std::string(int, const std::string&)> reply_;
    int sleep_ms_ = 0;
    int port_ = 0;
    std::atomic<int> requests_{0};
    std::string last_body_;
    std::thread thread_;
};

inline std::string buy_reply() {
    return R"({"0": {"order_price": "295.0", "is_buy": "True", "order_volume": "100", "reason": "dip"}})";
}

inline std::string sell_reply() {
    return R"({"0": {"order_price": "310.0", "is_buy": "False", "order_volume": "100", "reason": "peak"}})";
}

}  // namespace fclsim::testing
