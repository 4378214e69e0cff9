#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "fclsim/decision.hpp"

namespace fclsim {

namespace detail {

struct UrlParts {
    std::string base;  // scheme://host[:port]
    std::string path;
};

inline UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

/// Chat-completions client: sends the rendered prompt as a single user
/// message and hands the first choice's content to the reply parser. Parse
/// failures are retried with the parse error appended to the prompt;
/// transport failures and exhausted retries report the provider unavailable.
class RemoteProvider final : public DecisionProvider {
public:
    explicit RemoteProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint.empty()) throw std::invalid_argument("remote provider requires an endpoint");
    }

    std::optional<Intention> decide(const DecisionContext& ctx) override {
        const std::string prompt = build_prompt(ctx);
        std::string retry_note;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            const auto content = post_chat(prompt + retry_note);
            if (!content) return std::nullopt;
            std::string error;
            if (const auto decision = parse_response(*content, &error))
                return decision->is_buy ? Intention::Buy : Intention::Sell;
            retry_note = "\nYour previous response could not be used: " + error +
                       "\nAnswer again using exactly the answer format.";
        }
        return std::nullopt;
    }

    std::string name() const override { return "remote:" + cfg_.model_name; }

private:
    std::optional<std::string> post_chat(const std::string& prompt) {
        const auto url = detail::split_url(cfg_.endpoint);
        httplib::Client client(url.base);
        client.set_connection_timeout(0, cfg_.timeout_ms * 1000LL);
        client.set_read_timeout(0, cfg_.timeout_ms * 1000LL);
        client.set_write_timeout(0, cfg_.timeout_ms * 1000LL);

        httplib::Headers headers;
        if (!cfg_.api_key_env.empty()) {
            if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
                headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        const nlohmann::json body = {
            {"model", cfg_.model_name},
            {"messages", {{{"role", "user"}, {"content", prompt}}}},
            {"temperature", cfg_.temperature},
        };
        const auto res = client.Post(url.path, headers, body.dump(), "application/json");
        if (!res || res->status != 200) return std::nullopt;
        const auto reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) return std::nullopt;
        if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty())
            return std::nullopt;
        const auto& message = reply["choices"][0];
        if (!message.contains("message") || !message["message"].contains("content") ||
            !message["message"]["content"].is_string())
            return std::nullopt;
        return message["message"]["content"].get<std::string>();
    }

    ProviderConfig cfg_;
};

inline std::unique_ptr<DecisionProvider> make_provider(const ProviderConfig& cfg, std::uint64_t seed) {
    switch (cfg.kind) {
        case ProviderKind::ScriptedAlwaysBuy: return std::make_unique<AlwaysBuyProvider>();
        case ProviderKind::ScriptedAlwaysSell: return std::make_unique<AlwaysSellProvider>();
        case ProviderKind::ScriptedLossAverse:
            return std::make_unique<LossAverseProvider>(
                LossAverseParams{cfg.sell_bias_at_ath, cfg.buy_bias_at_loss}, seed);
        case ProviderKind::Remote: return std::make_unique<RemoteProvider>(cfg);
    }
    throw std::invalid_argument("unknown provider kind");
}

}  // namespace fclsim
