#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fclsim/core.hpp"

namespace fclsim {

// Everything a decision provider observes for one buy/sell intention.
struct DecisionContext {
    double cash = 0.0;
    std::int64_t position = 0;
    double unrealized_gain = 0.0;
    double market_price = 0.0;
    double all_time_high = 0.0;
    double all_time_low = 0.0;
    Step remaining_time = 0;
    Step total_time = 0;
    std::vector<HistoryEntry> history;
    double ofi = 0.0;
    int market_id = 0;
};

// Parsed provider reply. Only is_buy drives the agent; price and volume are
// advisory fields kept for completeness of the reply format.
struct Decision {
    bool is_buy = false;
    double order_price = 0.0;
    std::int64_t order_volume = 0;
    std::string reason;
};

enum class ProviderKind { ScriptedAlwaysBuy, ScriptedAlwaysSell, ScriptedLossAverse, Remote };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::ScriptedLossAverse;
    std::string endpoint;  // remote only, full URL
    std::string model_name = "local-model";
    int max_retries = 2;
    int timeout_ms = 30000;
    double temperature = 1.0;
    std::string api_key_env = "FCLSIM_API_KEY";
    double sell_bias_at_ath = 0.9;  // scripted-loss-averse parameters
    double buy_bias_at_loss = 0.8;
};

/// Shortest fixed-point decimal that round-trips, always with at least one
/// fractional digit (300 -> "300.0", 0.01 -> "0.01").
inline std::string format_real(double value) {
    if (value == 0.0) value = 0.0;  // normalize -0
    char buf[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
        if (std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

/// Integral amounts print without a decimal point (cash fields).
inline std::string format_amount(double value) {
    if (std::floor(value) == value && std::abs(value) < 9.0e15)
        return std::to_string(static_cast<long long>(value));
    return format_real(value);
}

namespace detail {

inline constexpr std::string_view kPromptHeader =
    "(Premise) You are a participant of the simulation of stock markets. Behave\n"
    "as an investor. Answer your order decision after analysing the given\n"
    "information.\n"
    "(Instruction) Your current portfolio is provided as a following format.\n"
    "Unrealized gain refers to the increase in value of the investment that has\n"
    "not yet been sold. It represents the potential profit on your stock\n"
    "position. Negative unrealized gain means  that the investment has decreased\n"
    "in value.\n"
    "[Your portfolio]cash: {}\n"
    "[Your portfolio]market id: {}, volume: {}, unrealized gain: {}, ...\n"
    "Each market condition is provided as a following format.\n"
    "[Market condition]market id: {}, current market price: {},\n"
    "all time high price: {}, all time low price: {}, ...\n"
    "[Market condition]market id: {}, remaining time: {}, total time: {}\n"
    "Your trading history is provided as a following format. Negative volume\n"
    "means that you sold the stock.\n"
    "[Your trading history]market id: {}, price: {}, volume: {}, ...\n"
    "Order flow imbalance is provided as a following format. Order flow imbalance\n"
    "means the difference between the number of buy and sell orders submitted to\n"
    "the stock market. Order flow imbalance is calculated as the difference between\n"
    "the number of buy and sell orders. Order flow imbalance can range from -1 to 1.\n"
    "Negative order flow imbalance indicates that the number of sell orders exceed\n"
    "that of buy orders. If the order flow is positive (negative), the fundamental\n"
    "value tends to be high (low). Higher absolute value of order flow imbalance\n"
    "indicates that orders are imbalance to one side, and suggests stronger evidence\n"
    "about the fundamentals value of the stock.\n"
    "[Order flow imbalance]market id: {}, order flow imbalance: {}, ...\n"
    "(Information) Here's the information.\n";

inline constexpr std::string_view kPromptAnswerFormat =
    "(Answer format) Decide your investment in the following JSON format. Do not\n"
    "deviate from the format, and do not add any additional words to your response\n"
    "outside of the format. Make sure to enclose each property in double quotes.\n"
    "Order volume means the number of units you want to trade the stock. Possible\n"
    "is_buy means whether to buy or sell the stock. is_buy must be True or False.\n"
    "Short selling is not allowed. If your holding stock volume in the portfolio is\n"
    "negative, buy them back immediately.  Cash shortage is not allowed. If your\n"
    "cash amount in the portfolio is negative, sell your holding stocks immediately.\n"
    "Try to keep your order volume as non-zero and not-extreme as possible. Try to\n"
    "keep your portfolio balanced. If you feel you are holding a lot of stocks or\n"
    "your cash amount is insufficient, you should sell them. Order price means the\n"
    "limit price at which you want to buy or sell the stock. By adjusting order\n"
    "price, you can trade at a more favorable price or adjust the time it takes to\n"
    "execute a trade. Here are the answer format.\n"
    "{\"<market id>\": {\"order_price\": \"<order price>\", \"is_buy\": \"<True or False>\",\n"
    "\"order_volume\": \"<order volume>\", \"reason\": \"<reason>\"} ...}\n"
    "Now, decide your order. Please explain the reason and your emotion in\n"
    "as much detail as possible.\n";

inline constexpr std::string_view kCashWarning =
    " (Caution! Your cash amount is negative!\n"
    "To avoid this situation, you have to sell the stocks.)";

inline constexpr std::string_view kPositionWarning =
    "\n(Caution! Your holding stock volume is negative! To avoid this\n"
    "situation, you have to buy this stock.)";

}  // namespace detail

/// Renders the full decision prompt for one context. The output is
/// deterministic; the information block lists portfolio, market condition,
/// trading history (executed fills only), and order flow imbalance, with
/// warnings attached when cash or the stock position is negative.
inline std::string build_prompt(const DecisionContext& ctx) {
    const std::string id = std::to_string(ctx.market_id);
    std::string out{detail::kPromptHeader};
    out += "[Your portfolio]cash: " + format_amount(ctx.cash);
    if (ctx.cash < 0.0) out += detail::kCashWarning;
    out += "\n";
    out += "[Your portfolio]market id: " + id + ", volume: " + std::to_string(ctx.position) +
           ", unrealized gain: " + format_real(ctx.unrealized_gain);
    if (ctx.position < 0) out += detail::kPositionWarning;
    out += "\n";
    out += "[Market condition]market id: " + id +
           ", current market price: " + format_real(ctx.market_price) + ",\n" +
           "all time high price: " + format_real(ctx.all_time_high) +
           ", all time low price: " + format_real(ctx.all_time_low) + "\n";
    out += "[Market condition]market id: " + id + ", remaining time: " + std::to_string(ctx.remaining_time) +
           ", total time: " + std::to_string(ctx.total_time) + "\n";
    for (const auto& h : ctx.history) {
        out += "[Your trading history]market id: " + id + ", price: " + format_real(h.price) +
               ", volume: " + std::to_string(h.signed_volume) + "\n";
    }
    out += "[Order flow imbalance]market id: " + id +
           ", order flow imbalance: " + format_real(ctx.ofi) + "\n";
    out += detail::kPromptAnswerFormat;
    return out;
}

namespace detail {

// Extent of the brace-balanced block starting at `start`, respecting string
// literals; npos when unbalanced.
inline std::size_t balanced_block_end(const std::string& text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i;
    }
    return std::string::npos;
}

inline std::optional<bool> parse_is_buy(const nlohmann::json& value) {
    if (value.is_boolean()) return value.get<bool>();
    if (value.is_string()) {
        const std::string& s = value.get_ref<const std::string&>();
        if (s == "True" || s == "true") return true;
        if (s == "False" || s == "false") return false;
    }
    return std::nullopt;
}

inline double json_to_double(const nlohmann::json& value) {
    if (value.is_number()) return value.get<double>();
    if (value.is_string()) return std::strtod(value.get_ref<const std::string&>().c_str(), nullptr);
    return 0.0;
}

inline std::int64_t json_to_int(const nlohmann::json& value) {
    if (value.is_number()) return value.get<std::int64_t>();
    if (value.is_string()) return std::strtoll(value.get_ref<const std::string&>().c_str(), nullptr, 10);
    return 0;
}

}  // namespace detail

/// Extracts the first well-formed reply object from free-form text. Scans for
/// balanced braces so prose around the JSON is tolerated. Fails when no object
/// with a parsable is_buy field is present.
inline std::optional<Decision> parse_response(const std::string& text, std::string* error = nullptr) {
    for (std::size_t pos = text.find('{'); pos != std::string::npos; pos = text.find('{', pos + 1)) {
        const std::size_t end = detail::balanced_block_end(text, pos);
        if (end == std::string::npos) continue;
        const auto parsed = nlohmann::json::parse(text.substr(pos, end - pos + 1), nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) continue;
        for (const auto& [key, entry] : parsed.items()) {
            if (!entry.is_object() || !entry.contains("is_buy")) continue;
            const auto is_buy = detail::parse_is_buy(entry["is_buy"]);
            if (!is_buy) {
                if (error) *error = "is_buy must be True or False";
                return std::nullopt;
            }
            Decision decision;
            decision.is_buy = *is_buy;
            if (entry.contains("order_price")) decision.order_price = detail::json_to_double(entry["order_price"]);
            if (entry.contains("order_volume")) decision.order_volume = detail::json_to_int(entry["order_volume"]);
            if (entry.contains("reason") && entry["reason"].is_string())
                decision.reason = entry["reason"].get<std::string>();
            return decision;
        }
    }
    if (error) *error = "no JSON object with an is_buy field found";
    return std::nullopt;
}

/// Buy/sell intention source. Implementations must return an intention or
/// nothing (provider unavailable); no partial state leaks to the caller.
class DecisionProvider {
public:
    virtual ~DecisionProvider() = default;
    virtual std::optional<Intention> decide(const DecisionContext& ctx) = 0;
    virtual void reseed(std::uint64_t) {}
    virtual std::string name() const = 0;
};

class AlwaysBuyProvider final : public DecisionProvider {
public:
    std::optional<Intention> decide(const DecisionContext&) override { return Intention::Buy; }
    std::string name() const override { return "scripted-always-buy"; }
};

class AlwaysSellProvider final : public DecisionProvider {
public:
    std::optional<Intention> decide(const DecisionContext&) override { return Intention::Sell; }
    std::string name() const override { return "scripted-always-sell"; }
};

struct LossAverseParams {
    double sell_bias_at_ath = 0.9;
    double buy_bias_at_loss = 0.8;
};

/// Scripted stand-in for a loss-averse decision maker. It first obeys the
/// hard portfolio rules the prompt states (a negative position is bought
/// back, a negative cash balance is sold down); otherwise, in the gain region
/// the sell probability rises linearly with nearness to the all-time high,
/// and in the loss region it buys with a fixed probability.
inline Intention decide_scripted_loss_averse(const DecisionContext& ctx, Rng& rng,
                                             const LossAverseParams& params) {
    if (ctx.position < 0) return Intention::Buy;
    if (ctx.cash < 0.0) return Intention::Sell;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    if (ctx.unrealized_gain >= 0.0) {
        const double nearness = ctx.all_time_high > 0.0 ? ctx.market_price / ctx.all_time_high : 1.0;
        const double p_sell = 0.5 + (params.sell_bias_at_ath - 0.5) * nearness;
        return uniform(rng) < p_sell ? Intention::Sell : Intention::Buy;
    }
    return uniform(rng) < params.buy_bias_at_loss ? Intention::Buy : Intention::Sell;
}

class LossAverseProvider final : public DecisionProvider {
public:
    explicit LossAverseProvider(LossAverseParams params = {}, std::uint64_t seed = 0)
        : params_(params), rng_(seed) {}

    std::optional<Intention> decide(const DecisionContext& ctx) override {
        return decide_scripted_loss_averse(ctx, rng_, params_);
    }
    void reseed(std::uint64_t seed) override { rng_.seed(seed); }
    std::string name() const override { return "scripted-loss-averse"; }

private:
    LossAverseParams params_;
    Rng rng_;
};

inline std::string provider_kind_name(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::ScriptedAlwaysBuy: return "scripted-always-buy";
        case ProviderKind::ScriptedAlwaysSell: return "scripted-always-sell";
        case ProviderKind::ScriptedLossAverse: return "scripted-loss-averse";
        case ProviderKind::Remote: return "remote";
    }
    return "unknown";
}

inline std::optional<ProviderKind> provider_kind_from_name(std::string_view name) {
    if (name == "scripted-always-buy") return ProviderKind::ScriptedAlwaysBuy;
    if (name == "scripted-always-sell") return ProviderKind::ScriptedAlwaysSell;
    if (name == "scripted-loss-averse") return ProviderKind::ScriptedLossAverse;
    if (name == "remote") return ProviderKind::Remote;
    return std::nullopt;
}

}  // namespace fclsim
