#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fclsim/agents.hpp"
#include "fclsim/decision.hpp"
#include "fclsim/order_book.hpp"

namespace fclsim {

// Step counts of one trading day: two order-collection phases, each followed
// by a continuous session.
struct DayStructure {
    Step collect1 = 100;
    Step continuous1 = 750;
    Step collect2 = 10;
    Step continuous2 = 750;

    Step day_length() const { return collect1 + continuous1 + collect2 + continuous2; }
    Step continuous_steps() const { return continuous1 + continuous2; }

    // day_step is 1-based within the day.
    bool is_collecting(Step day_step) const {
        return day_step <= collect1 ||
               (day_step > collect1 + continuous1 && day_step <= collect1 + continuous1 + collect2);
    }
    bool is_auction_step(Step day_step) const {
        return day_step == collect1 || day_step == collect1 + continuous1 + collect2;
    }
    // Index of a continuous step within the day's continuous session, or -1.
    Step continuous_index(Step day_step) const {
        if (day_step > collect1 && day_step <= collect1 + continuous1) return day_step - collect1 - 1;
        const Step second_start = collect1 + continuous1 + collect2;
        if (day_step > second_start) return continuous1 + (day_step - second_start - 1);
        return -1;
    }

    friend bool operator==(const DayStructure&, const DayStructure&) = default;
};

struct SimConfig {
    int n_agents = 1000;
    int n_fcl = 0;
    int days = 500;
    DayStructure day_structure{};
    double initial_price = 300.0;
    double tick_size = 0.01;
    double fundamental_volatility = 1.0e-4;
    PopulationConfig population{};
    PopulationConfig fcl_population{
        .cash_max = 1.0e5,
        .position_max = 300.0,
    };
    std::int64_t fcl_fixed_volume = 100;
    ProviderConfig provider{};
    std::uint64_t seed = 42;

    Step total_steps() const { return day_structure.day_length() * days; }
};

/// Reduced-scale preset for fast experiments; same market mechanics and
/// population parameters, fewer agents and days.
inline SimConfig desk_preset() {
    SimConfig cfg;
    cfg.n_agents = 200;
    cfg.days = 50;
    return cfg;
}

inline SimConfig full_preset() { return SimConfig{}; }

enum class TickEvent { Order, Trade, Snapshot, Skip };

inline std::string tick_event_name(TickEvent e) {
    switch (e) {
        case TickEvent::Order: return "order";
        case TickEvent::Trade: return "trade";
        case TickEvent::Snapshot: return "snapshot";
        case TickEvent::Skip: return "skip";
    }
    return "unknown";
}

inline std::optional<TickEvent> tick_event_from_name(std::string_view name) {
    if (name == "order") return TickEvent::Order;
    if (name == "trade") return TickEvent::Trade;
    if (name == "snapshot") return TickEvent::Snapshot;
    if (name == "skip") return TickEvent::Skip;
    return std::nullopt;
}

struct TickRecord {
    Step step = 0;
    int day = 0;
    TickEvent event = TickEvent::Snapshot;
    int agent_id = -1;  // -1 = none
    double price = 0.0;
    std::int64_t signed_volume = 0;
    double market_price = 0.0;
    double mid_price = 0.0;
    double ofi = 0.0;

    friend bool operator==(const TickRecord&, const TickRecord&) = default;
};

struct FundamentalPath {
    std::vector<double> values;  // one per step, values[0] = initial price
};

inline FundamentalPath generate_fundamental(const SimConfig& cfg, Rng& rng) {
    FundamentalPath path;
    const Step n = cfg.total_steps();
    path.values.reserve(static_cast<std::size_t>(n));
    path.values.push_back(cfg.initial_price);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Step t = 1; t < n; ++t)
        path.values.push_back(path.values.back() * std::exp(cfg.fundamental_volatility * normal(rng)));
    return path;
}

struct RunResult {
    std::vector<TickRecord> ticks;
    std::vector<AgentState> initial_states;
    std::vector<AgentState> final_states;
    std::vector<FcnParams> agent_params;
    int n_fcl = 0;
    double initial_price = 0.0;
    OrderBook final_book{0.01};
    std::vector<double> fcl_asset_proportions;  // sampled at each FCL decision
};

inline void validate(const SimConfig& cfg) {
    if (cfg.n_agents <= 0) throw std::invalid_argument("config: n_agents must be positive");
    if (cfg.n_fcl < 0 || cfg.n_fcl > cfg.n_agents)
        throw std::invalid_argument("config: n_fcl must lie in [0, n_agents]");
    if (cfg.days <= 0) throw std::invalid_argument("config: days must be positive");
    const auto& d = cfg.day_structure;
    if (d.collect1 <= 0 || d.continuous1 <= 0 || d.collect2 <= 0 || d.continuous2 <= 0)
        throw std::invalid_argument("config: day_structure counts must be positive");
    if (cfg.initial_price <= 0.0) throw std::invalid_argument("config: initial_price must be positive");
    if (cfg.tick_size <= 0.0) throw std::invalid_argument("config: tick_size must be positive");
    if (cfg.fundamental_volatility < 0.0)
        throw std::invalid_argument("config: fundamental_volatility must be nonnegative");
    if (cfg.fcl_fixed_volume <= 0) throw std::invalid_argument("config: fcl_fixed_volume must be positive");
}

namespace detail {

struct PriceStats {
    double last_trade;
    double all_time_high;
    double all_time_low;
    Ticks last_trade_ticks;

    void record_trade(double price, Ticks ticks) {
        last_trade = price;
        last_trade_ticks = ticks;
        if (price > all_time_high) all_time_high = price;
        if (price < all_time_low) all_time_low = price;
    }
};

inline double mid_price(const OrderBook& book, double fallback) {
    const auto bid = book.best_bid();
    const auto ask = book.best_ask();
    if (bid && ask) return 0.5 * (to_price(*bid, book.tick_size()) + to_price(*ask, book.tick_size()));
    return fallback;
}

}  // namespace detail

inline MarketSnapshot make_snapshot(const OrderBook& book, double fundamental_price, Step step,
                                    Step total_steps, const detail::PriceStats& stats,
                                    std::span<const double> price_history, double initial_price) {
    MarketSnapshot snap;
    snap.step = step;
    snap.total_steps = total_steps;
    snap.market_price = stats.last_trade;
    snap.fundamental_price = fundamental_price;
    snap.initial_price = initial_price;
    snap.best_bid = book.best_bid();
    snap.best_ask = book.best_ask();
    snap.tick_size = book.tick_size();
    snap.ofi = book.order_flow_imbalance();
    snap.all_time_high = stats.all_time_high;
    snap.all_time_low = stats.all_time_low;
    snap.price_history = price_history;
    return snap;
}

inline DecisionContext make_decision_context(const AgentState& state, const MarketSnapshot& snap) {
    DecisionContext ctx;
    ctx.cash = state.cash;
    ctx.position = state.position;
    ctx.unrealized_gain = unrealized_gain(state, snap.market_price);
    ctx.market_price = snap.market_price;
    ctx.all_time_high = snap.all_time_high;
    ctx.all_time_low = snap.all_time_low;
    ctx.remaining_time = snap.total_steps - snap.step;
    ctx.total_time = snap.total_steps;
    ctx.history = state.history;
    ctx.ofi = snap.ofi;
    ctx.market_id = 0;
    return ctx;
}

/// Runs one simulation: per step a uniformly selected agent observes the
/// market and may place a single limit order; collection phases accumulate
/// orders and clear by call auction at the phase end; orders expire after the
/// submitting agent's horizon and at the end of the day. The run is
/// deterministic given the seed and a deterministic provider.
inline RunResult run(const SimConfig& cfg, DecisionProvider* provider = nullptr) {
    validate(cfg);
    if (cfg.n_fcl > 0 && provider == nullptr)
        throw std::invalid_argument("run: n_fcl > 0 requires a decision provider");

    Rng rng(cfg.seed);
    const FundamentalPath fundamental = generate_fundamental(cfg, rng);

    RunResult result;
    result.n_fcl = cfg.n_fcl;
    result.initial_price = cfg.initial_price;
    result.agent_params.reserve(cfg.n_agents);
    result.initial_states.reserve(cfg.n_agents);
    for (int j = 0; j < cfg.n_agents; ++j) {
        const bool fcl = j < cfg.n_fcl;
        const PopulationConfig& pop = fcl ? cfg.fcl_population : cfg.population;
        result.agent_params.push_back(sample_params(pop, rng));
        result.initial_states.push_back(sample_state(pop, rng, fcl ? cfg.fcl_fixed_volume : 0));
    }
    std::vector<AgentState> states = result.initial_states;

    OrderBook book(cfg.tick_size);
    const Step total = cfg.total_steps();
    const Step day_len = cfg.day_structure.day_length();
    std::vector<double> price_history;
    price_history.reserve(static_cast<std::size_t>(total));
    detail::PriceStats stats{cfg.initial_price, cfg.initial_price, cfg.initial_price,
                             to_ticks_floor(cfg.initial_price, cfg.tick_size)};
    std::unordered_map<std::int64_t, int> order_owner;
    std::int64_t next_order_id = 1;
    std::uniform_int_distribution<int> pick_agent(0, cfg.n_agents - 1);

    const auto record = [&](Step step, int day, TickEvent event, int agent, double price,
                            std::int64_t signed_volume) {
        result.ticks.push_back({step, day, event, agent, price, signed_volume, stats.last_trade,
                                detail::mid_price(book, stats.last_trade), book.order_flow_imbalance()});
    };
    const auto apply_trades = [&](const std::vector<Trade>& trades, Step step, int day) {
        for (const Trade& tr : trades) {
            const double price = to_price(tr.price, cfg.tick_size);
            apply_fill(states[order_owner.at(tr.buy_order_id)], step, price, tr.volume);
            apply_fill(states[order_owner.at(tr.sell_order_id)], step, price, -tr.volume);
            stats.record_trade(price, tr.price);
            record(step, day, TickEvent::Trade, order_owner.at(tr.buy_order_id), price, tr.volume);
        }
    };

    for (Step t = 1; t <= total; ++t) {
        const int day = static_cast<int>((t - 1) / day_len);
        const Step day_step = (t - 1) % day_len + 1;
        const bool collecting = cfg.day_structure.is_collecting(day_step);
        book.expire(t);

        const int j = pick_agent(rng);
        const MarketSnapshot snap = make_snapshot(book, fundamental.values[static_cast<std::size_t>(t - 1)],
                                                  t, total, stats, price_history, cfg.initial_price);
        const bool is_fcl = j < cfg.n_fcl;
        const PopulationConfig& pop = is_fcl ? cfg.fcl_population : cfg.population;

        std::optional<OrderDraft> draft;
        bool skipped = false;
        if (is_fcl) {
            if (snap.market_price * static_cast<double>(states[j].position) + states[j].cash != 0.0)
                result.fcl_asset_proportions.push_back(
                    snap.market_price * static_cast<double>(states[j].position) /
                    (states[j].cash + snap.market_price * static_cast<double>(states[j].position)));
            const auto intention = provider->decide(make_decision_context(states[j], snap));
            if (!intention) {
                skipped = true;
            } else {
                std::normal_distribution<double> normal(0.0, 1.0);
                const Prediction pred =
                    fcn_predict(result.agent_params[j], snap.market_price, snap.fundamental_price,
                                snap.lagged_price(result.agent_params[j].tau_j), normal(rng), pop);
                draft = fcl_decide_order(result.agent_params[j], states[j], snap, *intention, pred);
            }
        } else {
            draft = fcn_decide_order(result.agent_params[j], states[j], snap, rng, pop);
        }

        if (skipped) {
            record(t, day, TickEvent::Skip, j, stats.last_trade, 0);
        } else if (draft) {
            Order order;
            order.order_id = next_order_id++;
            order.agent_id = j;
            order.time = t;
            order.price = draft->price;
            order.signed_volume = draft->signed_volume;
            order.expiry = std::min<Step>(t + result.agent_params[j].tau_j,
                                          static_cast<Step>(day + 1) * day_len);
            order_owner.emplace(order.order_id, j);
            record(t, day, TickEvent::Order, j, to_price(order.price, cfg.tick_size), order.signed_volume);
            apply_trades(book.submit(order, collecting ? MatchingMode::Collecting : MatchingMode::Continuous),
                         t, day);
        }

        if (cfg.day_structure.is_auction_step(day_step))
            apply_trades(book.call_auction(stats.last_trade_ticks, t).trades, t, day);

        record(t, day, TickEvent::Snapshot, -1, stats.last_trade, 0);
        price_history.push_back(stats.last_trade);
    }

    result.final_states = std::move(states);
    result.final_book = std::move(book);
    return result;
}

}  // namespace fclsim
