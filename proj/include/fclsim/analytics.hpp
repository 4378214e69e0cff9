#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "fclsim/sim.hpp"

namespace fclsim {

struct Bar {
    double open = 0.0, high = 0.0, low = 0.0, close = 0.0;
    std::int64_t volume = 0;
};

struct BarSeries {
    std::vector<Bar> bars;
    int bars_per_day = 0;
};

struct RegressionResult {
    double beta_h = 0.0;
    double intercept = 0.0;
    int n_obs = 0;
    int horizon_days = 0;
};

struct StylizedFactsReport {
    double kurtosis = 0.0;             // excess
    std::map<int, double> acf_abs;     // lag -> autocorrelation of |return|
    double ret_vol_corr = 0.0;
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Aggregates continuous-session trades into fixed-width bars
/// (steps_per_minute steps per bar). Collection-phase steps are excluded;
/// bars without trades carry the previous close forward with zero volume.
inline BarSeries build_bars(const std::vector<TickRecord>& ticks, const DayStructure& day,
                            int steps_per_minute, double initial_price) {
    if (steps_per_minute <= 0) throw std::invalid_argument("build_bars: steps_per_minute must be positive");
    BarSeries series;
    series.bars_per_day =
        static_cast<int>((day.continuous_steps() + steps_per_minute - 1) / steps_per_minute);
    if (ticks.empty()) return series;

    int last_day = 0;
    for (const auto& record : ticks) last_day = std::max(last_day, record.day);
    const std::size_t n_bars = static_cast<std::size_t>(last_day + 1) * series.bars_per_day;

    struct Slot {
        bool has_trades = false;
        Bar bar;
    };
    std::vector<Slot> slots(n_bars);
    const Step day_len = day.day_length();
    for (const auto& record : ticks) {
        if (record.event != TickEvent::Trade) continue;
        const Step day_step = (record.step - 1) % day_len + 1;
        const Step cont = day.continuous_index(day_step);
        if (cont < 0) continue;
        auto& slot =
            slots[static_cast<std::size_t>(record.day) * series.bars_per_day + cont / steps_per_minute];
        if (!slot.has_trades) {
            slot.has_trades = true;
            slot.bar = {record.price, record.price, record.price, record.price, 0};
        }
        slot.bar.high = std::max(slot.bar.high, record.price);
        slot.bar.low = std::min(slot.bar.low, record.price);
        slot.bar.close = record.price;
        slot.bar.volume += record.signed_volume < 0 ? -record.signed_volume : record.signed_volume;
    }

    series.bars.reserve(n_bars);
    double prev_close = initial_price;
    for (const auto& slot : slots) {
        if (slot.has_trades) {
            series.bars.push_back(slot.bar);
            prev_close = slot.bar.close;
        } else {
            series.bars.push_back({prev_close, prev_close, prev_close, prev_close, 0});
        }
    }
    return series;
}

inline std::vector<double> log_returns(const BarSeries& series) {
    std::vector<double> returns;
    if (series.bars.size() < 2) return returns;
    returns.reserve(series.bars.size() - 1);
    for (std::size_t i = 1; i < series.bars.size(); ++i)
        returns.push_back(std::log(series.bars[i].close / series.bars[i - 1].close));
    return returns;
}

namespace detail {

inline double mean(std::span<const double> xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a);
    const double mb = mean(b);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) throw std::invalid_argument("pearson: zero variance");
    return cov / std::sqrt(va * vb);
}

}  // namespace detail

/// Fisher excess kurtosis m4 / m2^2 - 3 from central sample moments.
inline double excess_kurtosis(std::span<const double> returns) {
    if (returns.size() < 4) throw std::invalid_argument("excess_kurtosis: need at least 4 observations");
    const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
    if (*lo == *hi) throw std::invalid_argument("excess_kurtosis: zero variance");
    const double m = detail::mean(returns);
    double m2 = 0.0, m4 = 0.0;
    for (double r : returns) {
        const double d = r - m;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(returns.size());
    m4 /= static_cast<double>(returns.size());
    if (m2 == 0.0) throw std::invalid_argument("excess_kurtosis: zero variance");
    return m4 / (m2 * m2) - 3.0;
}

/// Pearson autocorrelation of the absolute return series at the given lag.
inline double acf_abs_returns(std::span<const double> returns, int lag) {
    if (lag <= 0) throw std::invalid_argument("acf_abs_returns: lag must be positive");
    if (returns.size() <= static_cast<std::size_t>(lag))
        throw std::invalid_argument("acf_abs_returns: series shorter than lag");
    std::vector<double> abs_returns(returns.size());
    std::transform(returns.begin(), returns.end(), abs_returns.begin(),
                   [](double r) { return std::abs(r); });
    const std::size_t n = abs_returns.size() - static_cast<std::size_t>(lag);
    return detail::pearson({abs_returns.data(), n}, {abs_returns.data() + lag, n});
}

/// Pearson correlation of |log(close_i / close_{i-1})| against bar volume.
inline double return_volume_correlation(const BarSeries& series) {
    if (series.bars.size() < 3)
        throw std::invalid_argument("return_volume_correlation: need at least 3 bars");
    std::vector<double> abs_ret, volume;
    for (std::size_t i = 1; i < series.bars.size(); ++i) {
        abs_ret.push_back(std::abs(std::log(series.bars[i].close / series.bars[i - 1].close)));
        volume.push_back(static_cast<double>(series.bars[i].volume));
    }
    return detail::pearson(abs_ret, volume);
}

inline StylizedFactsReport compute_stylized_facts(const BarSeries& series,
                                                  const std::vector<int>& lags = {1, 5, 10}) {
    const auto returns = log_returns(series);
    StylizedFactsReport report;
    report.kurtosis = excess_kurtosis(returns);
    for (int lag : lags) report.acf_abs[lag] = acf_abs_returns(returns, lag);
    report.ret_vol_corr = return_volume_correlation(series);
    return report;
}

/// Closed-form ordinary least squares of y on x.
inline OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_fit: bad input sizes");
    const double mx = detail::mean(x);
    const double my = detail::mean(y);
    double cov = 0.0, var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        var += (x[i] - mx) * (x[i] - mx);
    }
    if (var == 0.0) throw std::invalid_argument("ols_fit: degenerate regressor");
    OlsFit fit;
    fit.slope = cov / var;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

/// Regression of the forward T-day gross return on nearness to the running
/// maximum: y_t = p_{t+T} / p_t on x_t = p_t / max(p_1..p_t), using every day
/// t with t + T in range (overlapping windows).
inline RegressionResult ath_regression(std::span<const double> daily_closes, int horizon_days) {
    if (horizon_days <= 0) throw std::invalid_argument("ath_regression: horizon must be positive");
    if (daily_closes.size() < static_cast<std::size_t>(horizon_days) + 2)
        throw std::invalid_argument("ath_regression: need at least horizon + 2 daily closes");
    std::vector<double> nearness, forward_return;
    double running_max = 0.0;
    for (std::size_t t = 0; t + horizon_days < daily_closes.size(); ++t) {
        running_max = std::max(running_max, daily_closes[t]);
        nearness.push_back(daily_closes[t] / running_max);
        forward_return.push_back(daily_closes[t + horizon_days] / daily_closes[t]);
    }
    const OlsFit fit = ols_fit(nearness, forward_return);
    RegressionResult result;
    result.beta_h = fit.slope;
    result.intercept = fit.intercept;
    result.n_obs = static_cast<int>(nearness.size());
    result.horizon_days = horizon_days;
    return result;
}

/// Close of each day's continuous session (last trade; days without trades
/// carry the previous close, starting from the initial price).
inline std::vector<double> daily_closes(const std::vector<TickRecord>& ticks, const DayStructure& day,
                                        double initial_price) {
    int last_day = -1;
    for (const auto& record : ticks) last_day = std::max(last_day, record.day);
    std::vector<double> closes(static_cast<std::size_t>(last_day + 1), 0.0);
    std::vector<bool> seen(closes.size(), false);
    const Step day_len = day.day_length();
    for (const auto& record : ticks) {
        if (record.event != TickEvent::Trade) continue;
        if (day.continuous_index((record.step - 1) % day_len + 1) < 0) continue;
        closes[static_cast<std::size_t>(record.day)] = record.price;
        seen[static_cast<std::size_t>(record.day)] = true;
    }
    double prev = initial_price;
    for (std::size_t d = 0; d < closes.size(); ++d) {
        if (!seen[d]) closes[d] = prev;
        prev = closes[d];
    }
    return closes;
}

/// Share of wealth held in stock: p * w / (c + p * w).
inline double asset_proportion(double cash, std::int64_t position, double price) {
    const double holding = price * static_cast<double>(position);
    const double denom = cash + holding;
    if (denom == 0.0) throw std::invalid_argument("asset_proportion: zero portfolio value");
    return holding / denom;
}

/// Linear-interpolation percentile, q in [0, 1].
inline double percentile(std::vector<double> sample, double q) {
    if (sample.empty()) throw std::invalid_argument("percentile: empty sample");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile: q must lie in [0, 1]");
    std::sort(sample.begin(), sample.end());
    const double idx = q * static_cast<double>(sample.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    if (lo + 1 >= sample.size()) return sample.back();
    const double frac = idx - static_cast<double>(lo);
    return sample[lo] * (1.0 - frac) + sample[lo + 1] * frac;
}

struct NearnessSamples {
    std::vector<double> buys;
    std::vector<double> sells;
};

/// Nearness to the running all-time high at each order submitted by one of
/// the tracked agents, split by order side.
inline NearnessSamples nearness_at_actions(const std::vector<TickRecord>& ticks,
                                           const std::set<int>& agent_ids, double initial_price) {
    NearnessSamples samples;
    double ath = initial_price;
    for (const auto& record : ticks) {
        if (record.event == TickEvent::Trade) {
            ath = std::max(ath, record.price);
            continue;
        }
        if (record.event != TickEvent::Order || !agent_ids.contains(record.agent_id)) continue;
        const double nearness = record.market_price / ath;
        (record.signed_volume > 0 ? samples.buys : samples.sells).push_back(nearness);
    }
    return samples;
}

namespace detail {

// Asymptotic two-sided KS p-value.
inline double ks_p_value(double statistic, std::size_t n_a, std::size_t n_b) {
    const double n_eff = static_cast<double>(n_a) * static_cast<double>(n_b) /
                         static_cast<double>(n_a + n_b);
    const double lambda = (std::sqrt(n_eff) + 0.12 + 0.11 / std::sqrt(n_eff)) * statistic;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-12) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

/// Two-sample Kolmogorov-Smirnov test (asymptotic two-sided p-value).
inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double statistic = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        statistic = std::max(statistic, std::abs(static_cast<double>(i) / static_cast<double>(a.size()) -
                                                 static_cast<double>(j) / static_cast<double>(b.size())));
    }
    return {statistic, detail::ks_p_value(statistic, a.size(), b.size())};
}

/// Mann-Whitney U (midranks, tie-corrected normal approximation with
/// continuity correction, two-sided p-value). The statistic is U for the
/// first sample: the number of (a, b) pairs with a > b, ties counting half.
inline TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
    struct Tagged {
        double value;
        bool from_a;
    };
    std::vector<Tagged> all;
    all.reserve(a.size() + b.size());
    for (double v : a) all.push_back({v, true});
    for (double v : b) all.push_back({v, false});
    std::sort(all.begin(), all.end(), [](const Tagged& x, const Tagged& y) { return x.value < y.value; });

    const double n = static_cast<double>(all.size());
    double rank_sum_a = 0.0;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].value == all[i].value) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        const double ties = static_cast<double>(j - i);
        tie_term += ties * ties * ties - ties;
        for (std::size_t k = i; k < j; ++k)
            if (all[k].from_a) rank_sum_a += midrank;
        i = j;
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double u_a = rank_sum_a - na * (na + 1.0) / 2.0;
    const double mean_u = na * nb / 2.0;
    const double var_u = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var_u <= 0.0) return {u_a, 1.0};
    const double z = (std::abs(u_a - mean_u) - 0.5) / std::sqrt(var_u);
    const double p = 2.0 * (1.0 - detail::normal_cdf(std::max(z, 0.0)));
    return {u_a, std::clamp(p, 0.0, 1.0)};
}

}  // namespace fclsim
