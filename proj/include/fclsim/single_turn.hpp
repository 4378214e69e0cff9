#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>

#include "fclsim/decision.hpp"

namespace fclsim {

// The four one-shot contexts: unrealized gain or loss, with the relevant
// price extremum either at the current price or beyond it.
enum class ScenarioKind { GainAtHigh, GainBelowHigh, LossAtLow, LossAboveLow };

inline std::string scenario_label(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::GainAtHigh: return "G+";
        case ScenarioKind::GainBelowHigh: return "G-";
        case ScenarioKind::LossAtLow: return "L-";
        case ScenarioKind::LossAboveLow: return "L+";
    }
    return "?";
}

inline constexpr std::array<ScenarioKind, 4> kAllScenarios = {
    ScenarioKind::GainAtHigh, ScenarioKind::GainBelowHigh, ScenarioKind::LossAtLow,
    ScenarioKind::LossAboveLow};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::GainAtHigh;
    double r_min = 0.0;
    double r_max = 0.5;
    double p1 = 300.0;        // purchase price
    std::int64_t v1 = 10;     // purchased volume
    double cash = 30000.0;
    Step t = 50;
    Step total_time = 100;
    int trials = 100;
    std::uint64_t seed = 42;
};

inline ScenarioConfig make_scenario(ScenarioKind kind, const ScenarioConfig& base = {}) {
    ScenarioConfig cfg = base;
    cfg.kind = kind;
    const bool gain = kind == ScenarioKind::GainAtHigh || kind == ScenarioKind::GainBelowHigh;
    cfg.r_min = gain ? 0.0 : -0.5;
    cfg.r_max = gain ? 0.5 : 0.0;
    return cfg;
}

/// Builds the one-shot decision context: the current price is the purchase
/// price moved by a uniformly drawn log return, the position is the initial
/// purchase, and the price extrema encode the scenario. The extremum not
/// pinned by the scenario is filled consistently from the two known prices.
inline DecisionContext setup_scenario(const ScenarioConfig& cfg, Rng& rng) {
    if (cfg.r_min > cfg.r_max) throw std::invalid_argument("setup_scenario: r_min > r_max");
    std::uniform_real_distribution<double> draw(cfg.r_min, cfg.r_max);
    const double r = draw(rng);
    const double p_t = cfg.p1 * std::exp(r);

    DecisionContext ctx;
    ctx.cash = cfg.cash;
    ctx.position = cfg.v1;
    ctx.unrealized_gain = static_cast<double>(cfg.v1) * (p_t - cfg.p1);
    ctx.market_price = p_t;
    switch (cfg.kind) {
        case ScenarioKind::GainAtHigh:
            ctx.all_time_high = p_t;
            ctx.all_time_low = std::min(cfg.p1, p_t);
            break;
        case ScenarioKind::GainBelowHigh:
            ctx.all_time_high = cfg.p1 * std::exp(2.0 * r);
            ctx.all_time_low = std::min(cfg.p1, p_t);
            break;
        case ScenarioKind::LossAtLow:
            ctx.all_time_low = p_t;
            ctx.all_time_high = std::max(cfg.p1, p_t);
            break;
        case ScenarioKind::LossAboveLow:
            ctx.all_time_low = cfg.p1 * std::exp(2.0 * r);
            ctx.all_time_high = std::max(cfg.p1, p_t);
            break;
    }
    ctx.remaining_time = cfg.total_time - cfg.t;
    ctx.total_time = cfg.total_time;
    ctx.history = {{1, cfg.p1, cfg.v1}};
    ctx.ofi = 0.0;
    ctx.market_id = 0;
    return ctx;
}

struct Tally {
    int buys = 0;
    int sells = 0;
    int failures = 0;

    int net() const { return buys - sells; }
    int trials() const { return buys + sells + failures; }

    friend bool operator==(const Tally&, const Tally&) = default;
};

/// Elicits one decision per trial; trial i uses seed + i for both the return
/// draw and the provider, so scripted runs are reproducible.
inline Tally run_scenarios(const ScenarioConfig& cfg, DecisionProvider& provider) {
    Tally tally;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        Rng rng(cfg.seed + static_cast<std::uint64_t>(trial));
        const DecisionContext ctx = setup_scenario(cfg, rng);
        provider.reseed(cfg.seed + static_cast<std::uint64_t>(trial));
        const auto intention = provider.decide(ctx);
        if (!intention)
            ++tally.failures;
        else if (*intention == Intention::Buy)
            ++tally.buys;
        else
            ++tally.sells;
    }
    return tally;
}

inline std::map<ScenarioKind, Tally> run_all_scenarios(const ScenarioConfig& base,
                                                       DecisionProvider& provider) {
    std::map<ScenarioKind, Tally> results;
    for (ScenarioKind kind : kAllScenarios)
        results[kind] = run_scenarios(make_scenario(kind, base), provider);
    return results;
}

}  // namespace fclsim
