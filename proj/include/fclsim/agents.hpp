#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fclsim/core.hpp"

namespace fclsim {

// Per-agent behavioral parameters, drawn once at population setup.
struct FcnParams {
    double w_f = 0.0;        // fundamentalist weight
    double w_c = 0.0;        // chartist weight
    double w_n = 0.0;        // noise weight
    int tau_j = 1;           // forecast horizon in steps
    double alpha_j = 0.1;    // risk aversion
    double margin_j = 0.0;   // order margin (intention-driven agents)
};

struct AgentState {
    double cash = 0.0;
    std::int64_t position = 0;
    std::vector<HistoryEntry> history;
    std::int64_t fixed_volume = 0;  // per-order size; 0 for demand-driven agents
};

struct Prediction {
    double r_hat = 0.0;  // expected log return over the horizon
    double p_hat = 0.0;  // implied expected price
};

struct PopulationConfig {
    double lambda_f = 10.0;  // exponential means of the component weights
    double lambda_c = 1.5;
    double lambda_n = 1.0;
    double sigma_n = 0.01;   // noise standard deviation
    double alpha_ref = 0.1;  // reference risk aversion
    double tau_ref = 100.0;  // reference horizon
    double alpha_diff = 20.0;
    double tau_diff = 30.0;
    int tau_fundamental = 200;  // mean-reversion horizon of the fundamentalist view
    double cash_min = 0.0, cash_max = 3.0e4;
    double position_min = 0.0, position_max = 100.0;
    double margin_min = 0.0, margin_max = 0.01;
    // Order-rule constants.
    double price_half_width = 0.01;  // half-width of the uniform order-price draw around p_hat
    std::int64_t q_max = 100;        // per-order volume cap
    double demand_scale = 3000.0;    // multiplier on the CARA demand
};

// Everything an agent observes when it is selected to act.
struct MarketSnapshot {
    Step step = 1;
    Step total_steps = 1;
    double market_price = 0.0;       // last executed price, else the initial price
    double fundamental_price = 0.0;
    double initial_price = 0.0;
    std::optional<Ticks> best_bid;
    std::optional<Ticks> best_ask;
    double tick_size = 0.01;
    double ofi = 0.0;
    double all_time_high = 0.0;
    double all_time_low = 0.0;
    std::span<const double> price_history;  // market price after steps 1..step-1

    // Market price tau steps ago; the initial price covers the cold start.
    double lagged_price(int tau) const {
        const Step k = step - tau;
        if (k < 1 || k > static_cast<Step>(price_history.size())) return initial_price;
        return price_history[static_cast<std::size_t>(k - 1)];
    }
};

// Order as decided by an agent, before the simulation assigns ids and expiry.
struct OrderDraft {
    Ticks price = 0;
    std::int64_t signed_volume = 0;
};

inline FcnParams make_fcn_params(const PopulationConfig& cfg, double w_f, double w_c, double w_n,
                                 double margin) {
    FcnParams p;
    p.w_f = w_f;
    p.w_c = w_c;
    p.w_n = w_n;
    p.alpha_j = cfg.alpha_ref * (cfg.alpha_diff + w_f) / (cfg.alpha_diff + w_c);
    p.tau_j = static_cast<int>(std::ceil(cfg.tau_ref * (cfg.tau_diff + w_f) / (cfg.tau_diff + w_c)));
    p.margin_j = margin;
    return p;
}

inline FcnParams sample_params(const PopulationConfig& cfg, Rng& rng) {
    // std::exponential_distribution takes the rate; the config stores means.
    std::exponential_distribution<double> exp_f(1.0 / cfg.lambda_f);
    std::exponential_distribution<double> exp_c(1.0 / cfg.lambda_c);
    std::exponential_distribution<double> exp_n(1.0 / cfg.lambda_n);
    std::uniform_real_distribution<double> margin(cfg.margin_min, cfg.margin_max);
    const double w_f = exp_f(rng);
    const double w_c = exp_c(rng);
    const double w_n = exp_n(rng);
    return make_fcn_params(cfg, w_f, w_c, w_n, margin(rng));
}

inline AgentState sample_state(const PopulationConfig& cfg, Rng& rng, std::int64_t fixed_volume = 0) {
    std::uniform_real_distribution<double> cash(cfg.cash_min, cfg.cash_max);
    std::uniform_real_distribution<double> position(cfg.position_min, cfg.position_max);
    AgentState state;
    state.cash = cash(rng);
    state.position = static_cast<std::int64_t>(std::ceil(position(rng)));
    state.fixed_volume = fixed_volume;
    return state;
}

/// Blended log-return forecast: fundamentalist reversion toward p_f, chartist
/// extrapolation of the trailing trend, and a noise term sigma_n * eps,
/// normalized by the total component weight.
inline Prediction fcn_predict(const FcnParams& params, double p_t, double p_f, double p_lag, double eps,
                              const PopulationConfig& cfg) {
    if (p_t <= 0.0 || p_f <= 0.0 || p_lag <= 0.0)
        throw std::invalid_argument("fcn_predict: prices must be positive");
    const double total = params.w_f + params.w_c + params.w_n;
    if (total <= 0.0) throw std::invalid_argument("fcn_predict: component weights sum to zero");
    const double fundamentalist = params.w_f / cfg.tau_fundamental * std::log(p_f / p_t);
    const double chartist = params.w_c / params.tau_j * std::log(p_t / p_lag);
    const double noise = params.w_n * cfg.sigma_n * eps;
    Prediction pred;
    pred.r_hat = (fundamentalist + chartist + noise) / total;
    pred.p_hat = p_t * std::exp(params.tau_j * pred.r_hat);
    return pred;
}

/// CARA demand: target position given the price forecast and an order price.
inline double cara_target_position(double p_hat, double order_price, double alpha_j, double horizon_var,
                                   double demand_scale) {
    return demand_scale * std::log(p_hat / order_price) / (alpha_j * horizon_var * order_price);
}

/// Demand-driven order choice: draw a candidate execution price around the
/// current market price and submit the CARA demand at that price, capped at
/// q_max per order. The candidate must straddle the spot price, not the
/// forecast: demand has to feel the forecast-vs-market gap for the
/// fundamentalist flow to anchor the price. Returns nothing when the rounded
/// volume is zero.
inline std::optional<OrderDraft> fcn_decide_order(const FcnParams& params,
                                                  [[maybe_unused]] const AgentState& state,
                                                  const MarketSnapshot& snap, Rng& rng,
                                                  const PopulationConfig& cfg) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double eps = normal(rng);
    const Prediction pred = fcn_predict(params, snap.market_price, snap.fundamental_price,
                                        snap.lagged_price(params.tau_j), eps, cfg);
    std::uniform_real_distribution<double> price_draw(snap.market_price * (1.0 - cfg.price_half_width),
                                                      snap.market_price * (1.0 + cfg.price_half_width));
    const double order_price = price_draw(rng);
    if (order_price <= 0.0) return std::nullopt;
    const double horizon_var = cfg.sigma_n * cfg.sigma_n * params.tau_j;
    const double demand = cara_target_position(pred.p_hat, order_price, params.alpha_j, horizon_var,
                                               cfg.demand_scale);
    const std::int64_t q =
        std::clamp(static_cast<std::int64_t>(std::llround(demand)), -cfg.q_max, cfg.q_max);
    if (q == 0) return std::nullopt;
    Ticks ticks = q > 0 ? to_ticks_floor(order_price, snap.tick_size) : to_ticks_ceil(order_price, snap.tick_size);
    ticks = std::max<Ticks>(1, ticks);
    return OrderDraft{ticks, q};
}

/// Value of the current position minus the net cost paid for it, over the
/// full trade history (sells enter with negative volume).
inline double unrealized_gain(const AgentState& state, double p_t) {
    std::int64_t total_volume = 0;
    double total_cost = 0.0;
    for (const auto& h : state.history) {
        total_volume += h.signed_volume;
        total_cost += static_cast<double>(h.signed_volume) * h.price;
    }
    return static_cast<double>(total_volume) * p_t - total_cost;
}

/// Intention-driven order: fixed volume signed by the intention, price from
/// the margin rule bounded by the touch, rounded toward the passive side.
inline OrderDraft fcl_decide_order(const FcnParams& params, const AgentState& state,
                                   const MarketSnapshot& snap, Intention intention, const Prediction& pred) {
    OrderDraft draft;
    if (intention == Intention::Buy) {
        draft.signed_volume = state.fixed_volume;
        double price = pred.p_hat * (1.0 - params.margin_j);
        if (snap.best_ask) price = std::min(price, to_price(*snap.best_ask, snap.tick_size));
        draft.price = std::max<Ticks>(1, to_ticks_floor(price, snap.tick_size));
    } else {
        draft.signed_volume = -state.fixed_volume;
        double price = pred.p_hat * (1.0 + params.margin_j);
        if (snap.best_bid) price = std::max(price, to_price(*snap.best_bid, snap.tick_size));
        draft.price = std::max<Ticks>(1, to_ticks_ceil(price, snap.tick_size));
    }
    return draft;
}

inline void apply_fill(AgentState& state, Step time, double price, std::int64_t signed_volume) {
    state.cash -= price * static_cast<double>(signed_volume);
    state.position += signed_volume;
    state.history.push_back({time, price, signed_volume});
}

}  // namespace fclsim
