#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fclsim/sim.hpp"

using namespace fclsim;

namespace {

// Small mixed-population config that runs in milliseconds.
SimConfig tiny_config() {
    SimConfig cfg;
    cfg.n_agents = 20;
    cfg.n_fcl = 4;
    cfg.days = 3;
    cfg.day_structure = {5, 20, 3, 20};
    cfg.seed = 17;
    return cfg;
}

class NeverAvailableProvider final : public DecisionProvider {
public:
    std::optional<Intention> decide(const DecisionContext&) override { return std::nullopt; }
    std::string name() const override { return "never-available"; }
};

class AlternatingProvider final : public DecisionProvider {
public:
    std::optional<Intention> decide(const DecisionContext&) override {
        flip_ = !flip_;
        return flip_ ? Intention::Buy : Intention::Sell;
    }
    std::string name() const override { return "alternating"; }

private:
    bool flip_ = false;
};

// Replays recorded order events through a fresh book, re-deriving matching
// modes, expiries, and auction points from the config; returns the final
// resting orders.
std::vector<Order> replay_book(const SimConfig& cfg, const RunResult& result) {
    std::map<Step, std::vector<const TickRecord*>> orders_by_step;
    for (const auto& record : result.ticks)
        if (record.event == TickEvent::Order) orders_by_step[record.step].push_back(&record);

    OrderBook book(cfg.tick_size);
    Ticks last_ticks = to_ticks_floor(cfg.initial_price, cfg.tick_size);
    std::int64_t next_id = 1;
    const Step day_len = cfg.day_structure.day_length();
    for (Step t = 1; t <= cfg.total_steps(); ++t) {
        book.expire(t);
        const int day = static_cast<int>((t - 1) / day_len);
        const Step day_step = (t - 1) % day_len + 1;
        const bool collecting = cfg.day_structure.is_collecting(day_step);
        if (const auto it = orders_by_step.find(t); it != orders_by_step.end()) {
            for (const TickRecord* record : it->second) {
                Order order;
                order.order_id = next_id++;
                order.agent_id = record->agent_id;
                order.time = t;
                order.price = to_ticks_floor(record->price, cfg.tick_size);
                order.signed_volume = record->signed_volume;
                order.expiry = std::min<Step>(t + result.agent_params[record->agent_id].tau_j,
                                              static_cast<Step>(day + 1) * day_len);
                const auto trades =
                    book.submit(order, collecting ? MatchingMode::Collecting : MatchingMode::Continuous);
                if (!trades.empty()) last_ticks = trades.back().price;
            }
        }
        if (cfg.day_structure.is_auction_step(day_step)) {
            const auto auction = book.call_auction(last_ticks, t);
            if (auction.clearing_price) last_ticks = *auction.clearing_price;
        }
    }
    return book.resting_orders();
}

}  // namespace

TEST_CASE("fundamental path: zero volatility stays at the initial price") {
    SimConfig cfg = tiny_config();
    cfg.fundamental_volatility = 0.0;
    Rng rng(1);
    const auto path = generate_fundamental(cfg, rng);
    REQUIRE(path.values.size() == static_cast<std::size_t>(cfg.total_steps()));
    CHECK(path.values.front() == cfg.initial_price);
    for (double v : path.values) CHECK(v == cfg.initial_price);
}

TEST_CASE("fundamental path: log-increment dispersion matches the volatility") {
    SimConfig cfg;
    cfg.days = 250000;
    cfg.day_structure = {1, 1, 1, 1};  // one million steps
    Rng rng(2);
    const auto path = generate_fundamental(cfg, rng);
    double sum = 0.0, sum_sq = 0.0;
    const std::size_t n = path.values.size() - 1;
    for (std::size_t i = 1; i < path.values.size(); ++i) {
        const double r = std::log(path.values[i] / path.values[i - 1]);
        sum += r;
        sum_sq += r * r;
    }
    const double variance = sum_sq / n - (sum / n) * (sum / n);
    CHECK(std::sqrt(variance) == doctest::Approx(1.0e-4).epsilon(0.02));
}

TEST_CASE("fundamental path: same seed, same path") {
    const SimConfig cfg = tiny_config();
    Rng a(9), b(9);
    CHECK(generate_fundamental(cfg, a).values == generate_fundamental(cfg, b).values);
}

TEST_CASE("run emits one snapshot per step and the expected step count") {
    SimConfig cfg = tiny_config();
    cfg.n_fcl = 0;
    cfg.days = 2;
    cfg.day_structure = {2, 3, 1, 3};
    const auto result = run(cfg);
    std::size_t snapshots = 0;
    Step last_step = 0;
    for (const auto& record : result.ticks) {
        CHECK(record.step >= last_step);  // nondecreasing
        last_step = record.step;
        if (record.event == TickEvent::Snapshot) ++snapshots;
    }
    CHECK(snapshots == 18);
    CHECK(result.ticks.back().step == 18);
}

TEST_CASE("trades never happen inside a collection phase except at auction steps") {
    SimConfig cfg = tiny_config();
    cfg.n_fcl = cfg.n_agents / 2;
    AlternatingProvider provider;
    const auto result = run(cfg, &provider);
    const Step day_len = cfg.day_structure.day_length();
    int auction_trades = 0;
    for (const auto& record : result.ticks) {
        if (record.event != TickEvent::Trade) continue;
        const Step day_step = (record.step - 1) % day_len + 1;
        if (cfg.day_structure.is_collecting(day_step)) {
            CHECK(cfg.day_structure.is_auction_step(day_step));
            ++auction_trades;
        }
    }
    CHECK(auction_trades > 0);  // the crossed collection book clears at the auction
}

TEST_CASE("a lone always-buy agent submits a buy order every step") {
    SimConfig cfg;
    cfg.n_agents = 1;
    cfg.n_fcl = 1;
    cfg.days = 1;
    cfg.day_structure = {2, 5, 1, 5};
    cfg.seed = 3;
    AlwaysBuyProvider provider;
    const auto result = run(cfg, &provider);
    std::size_t orders = 0;
    for (const auto& record : result.ticks) {
        if (record.event != TickEvent::Order) continue;
        ++orders;
        CHECK(record.agent_id == 0);
        CHECK(record.signed_volume == cfg.fcl_fixed_volume);
    }
    CHECK(orders == static_cast<std::size_t>(cfg.total_steps()));
}

TEST_CASE("identical config and seed reproduce the tick stream exactly") {
    SimConfig cfg = tiny_config();
    SUBCASE("without intention-driven agents") { cfg.n_fcl = 0; }
    SUBCASE("with a scripted provider") { cfg.n_fcl = 5; }
    LossAverseProvider p1({0.9, 0.8}, cfg.seed);
    LossAverseProvider p2({0.9, 0.8}, cfg.seed);
    const auto a = run(cfg, &p1);
    const auto b = run(cfg, &p2);
    CHECK(a.ticks == b.ticks);
    REQUIRE(a.final_states.size() == b.final_states.size());
    for (std::size_t j = 0; j < a.final_states.size(); ++j) {
        CHECK(a.final_states[j].cash == b.final_states[j].cash);
        CHECK(a.final_states[j].position == b.final_states[j].position);
        CHECK(a.final_states[j].history == b.final_states[j].history);
    }
}

TEST_CASE("agent selection is uniform within binomial bounds") {
    SimConfig cfg;
    cfg.n_agents = 10;
    cfg.n_fcl = 10;  // always-buy agents place an order on every selection
    cfg.days = 10;
    cfg.day_structure = {2, 96, 2, 100};  // 2000 steps
    cfg.seed = 23;
    AlwaysBuyProvider provider;
    const auto result = run(cfg, &provider);
    std::map<int, int> counts;
    for (const auto& record : result.ticks)
        if (record.event == TickEvent::Order) ++counts[record.agent_id];
    const double steps = static_cast<double>(cfg.total_steps());
    const double expected = steps / cfg.n_agents;
    const double sigma = std::sqrt(steps * 0.1 * 0.9);
    for (int j = 0; j < cfg.n_agents; ++j) {
        CHECK(counts[j] > expected - 3.0 * sigma);
        CHECK(counts[j] < expected + 3.0 * sigma);
    }
}

TEST_CASE("market-wide cash and share conservation") {
    SimConfig cfg = tiny_config();
    cfg.n_fcl = 6;
    LossAverseProvider provider({0.9, 0.8}, 5);
    const auto result = run(cfg, &provider);
    double initial_cash = 0.0, final_cash = 0.0;
    std::int64_t initial_shares = 0, final_shares = 0;
    for (const auto& s : result.initial_states) {
        initial_cash += s.cash;
        initial_shares += s.position;
    }
    for (const auto& s : result.final_states) {
        final_cash += s.cash;
        final_shares += s.position;
    }
    CHECK(final_cash == doctest::Approx(initial_cash).epsilon(1e-12));
    CHECK(final_shares == initial_shares);

    // Per-agent accounting: cash plus traded value returns the initial cash.
    for (std::size_t j = 0; j < result.final_states.size(); ++j) {
        double traded = 0.0;
        for (const auto& h : result.final_states[j].history)
            traded += h.price * static_cast<double>(h.signed_volume);
        CHECK(result.final_states[j].cash + traded ==
              doctest::Approx(result.initial_states[j].cash).epsilon(1e-9));
    }
}

TEST_CASE("replaying recorded orders reconstructs the final book") {
    SimConfig cfg = tiny_config();
    cfg.n_fcl = 5;
    LossAverseProvider provider({0.9, 0.8}, 11);
    const auto result = run(cfg, &provider);
    const auto replayed = replay_book(cfg, result);
    const auto original = result.final_book.resting_orders();
    REQUIRE(replayed.size() == original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        CHECK(replayed[i].order_id == original[i].order_id);
        CHECK(replayed[i].price == original[i].price);
        CHECK(replayed[i].signed_volume == original[i].signed_volume);
        CHECK(replayed[i].expiry == original[i].expiry);
    }
}

TEST_CASE("snapshot assembles last trade, extrema, and book state") {
    OrderBook book(0.01);
    detail::PriceStats stats{300.0, 300.0, 300.0, 30000};
    std::vector<double> history;

    SUBCASE("cold start") {
        const auto snap = make_snapshot(book, 300.0, 1, 100, stats, history, 300.0);
        CHECK(snap.market_price == 300.0);
        CHECK(snap.all_time_high == 300.0);
        CHECK(snap.all_time_low == 300.0);
        CHECK_FALSE(snap.best_bid.has_value());
        CHECK(snap.ofi == 0.0);
    }
    SUBCASE("running extrema follow executed prices") {
        stats.record_trade(300.0, 30000);
        stats.record_trade(310.0, 31000);
        stats.record_trade(295.0, 29500);
        const auto snap = make_snapshot(book, 300.0, 4, 100, stats, history, 300.0);
        CHECK(snap.market_price == 295.0);
        CHECK(snap.all_time_high == 310.0);
        CHECK(snap.all_time_low == 295.0);
    }
    SUBCASE("ofi delegates to the book") {
        Order o;
        o.order_id = 1;
        o.time = 1;
        o.price = 29900;
        o.signed_volume = 7;
        o.expiry = 50;
        book.submit(o, MatchingMode::Continuous);
        const auto snap = make_snapshot(book, 300.0, 2, 100, stats, history, 300.0);
        CHECK(snap.ofi == book.order_flow_imbalance());
        CHECK(snap.ofi == doctest::Approx(1.0));
    }
}

TEST_CASE("all-time extrema are monotone along the run") {
    SimConfig cfg = tiny_config();
    cfg.n_fcl = 0;
    const auto result = run(cfg);
    double ath = cfg.initial_price, atl = cfg.initial_price;
    for (const auto& record : result.ticks) {
        if (record.event != TickEvent::Trade) continue;
        const double prev_ath = ath, prev_atl = atl;
        ath = std::max(ath, record.price);
        atl = std::min(atl, record.price);
        CHECK(ath >= prev_ath);
        CHECK(atl <= prev_atl);
    }
}

TEST_CASE("a peak-averse provider sells at higher nearness than it buys") {
    // Deterministic stand-in: sell exactly when the price sits within 2% of
    // the running high, buy otherwise. Sell-side nearness must then dominate.
    class PeakAverseProvider final : public DecisionProvider {
    public:
        std::optional<Intention> decide(const DecisionContext& ctx) override {
            const double nearness = ctx.all_time_high > 0.0 ? ctx.market_price / ctx.all_time_high : 1.0;
            return nearness > 0.98 ? Intention::Sell : Intention::Buy;
        }
        std::string name() const override { return "peak-averse"; }
    };

    SimConfig cfg = desk_preset();
    cfg.days = 10;
    cfg.n_fcl = 5;
    cfg.seed = 4;
    PeakAverseProvider provider;
    const auto result = run(cfg, &provider);

    std::set<int> fcl_ids{0, 1, 2, 3, 4};
    double ath = cfg.initial_price;
    std::vector<double> buy_nearness, sell_nearness;
    for (const auto& record : result.ticks) {
        if (record.event == TickEvent::Trade) ath = std::max(ath, record.price);
        if (record.event != TickEvent::Order || !fcl_ids.contains(record.agent_id)) continue;
        (record.signed_volume > 0 ? buy_nearness : sell_nearness).push_back(record.market_price / ath);
    }
    REQUIRE(!buy_nearness.empty());
    REQUIRE(!sell_nearness.empty());
    const auto mean = [](const std::vector<double>& xs) {
        double sum = 0.0;
        for (double x : xs) sum += x;
        return sum / static_cast<double>(xs.size());
    };
    CHECK(mean(sell_nearness) > mean(buy_nearness));
}

TEST_CASE("unavailable provider turns selections into skip events") {
    SimConfig cfg = tiny_config();
    cfg.n_fcl = cfg.n_agents;  // every selection needs the provider
    NeverAvailableProvider provider;
    const auto result = run(cfg, &provider);
    std::size_t skips = 0;
    for (const auto& record : result.ticks) {
        CHECK(record.event != TickEvent::Order);
        CHECK(record.event != TickEvent::Trade);
        if (record.event == TickEvent::Skip) ++skips;
    }
    CHECK(skips == static_cast<std::size_t>(cfg.total_steps()));
}

TEST_CASE("decision context mirrors the snapshot and portfolio") {
    AgentState state;
    state.cash = 5000.0;
    state.position = 12;
    state.history = {{3, 310.0, 12}};

    OrderBook book(0.01);
    detail::PriceStats stats{293.7, 300.0, 287.5, 29370};
    std::vector<double> history;
    const auto snap = make_snapshot(book, 290.0, 30, 100, stats, history, 300.0);
    const auto ctx = make_decision_context(state, snap);
    CHECK(ctx.cash == 5000.0);
    CHECK(ctx.position == 12);
    CHECK(ctx.unrealized_gain == doctest::Approx(12 * 293.7 - 12 * 310.0));
    CHECK(ctx.market_price == 293.7);
    CHECK(ctx.all_time_high == 300.0);
    CHECK(ctx.all_time_low == 287.5);
    CHECK(ctx.remaining_time == 70);
    CHECK(ctx.total_time == 100);
    CHECK(ctx.history == state.history);
    CHECK(ctx.ofi == 0.0);
}

TEST_CASE("config validation rejects inconsistent settings") {
    SimConfig cfg = tiny_config();
    cfg.n_fcl = cfg.n_agents + 1;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg = tiny_config();
    cfg.n_fcl = 1;
    CHECK_THROWS_AS(run(cfg, nullptr), std::invalid_argument);
    cfg = tiny_config();
    cfg.day_structure.collect2 = 0;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg = tiny_config();
    cfg.tick_size = 0.0;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
}
