#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "fclsim/core.hpp"

namespace fclsim {

struct Order {
    std::int64_t order_id = 0;
    int agent_id = -1;
    Step time = 0;
    Ticks price = 0;                 // integer multiples of tick_size
    std::int64_t signed_volume = 0;  // >0 buy, <0 sell
    Step expiry = 0;                 // last step the order is valid

    bool is_buy() const { return signed_volume > 0; }
    std::int64_t volume() const { return signed_volume < 0 ? -signed_volume : signed_volume; }
};

struct Trade {
    std::int64_t buy_order_id = 0;
    std::int64_t sell_order_id = 0;
    Ticks price = 0;
    std::int64_t volume = 0;
    Step time = 0;

    friend bool operator==(const Trade&, const Trade&) = default;
};

enum class MatchingMode { Continuous, Collecting };

struct AuctionResult {
    std::optional<Ticks> clearing_price;
    std::vector<Trade> trades;
};

/// Single-asset limit order book with price-time priority.
///
/// Continuous submissions match greedily against the opposite side at the
/// resting order's price. During collection phases orders rest unconditionally
/// and the accumulated (possibly crossed) book is cleared by a single-price
/// call auction: the clearing price maximizes executable volume, ties prefer
/// the price nearest the reference, then the lower price.
class OrderBook {
public:
    explicit OrderBook(double tick_size = 0.01) : tick_size_(tick_size) {}

    std::vector<Trade> submit(const Order& order, MatchingMode mode) {
        validate(order);
        if (mode == MatchingMode::Collecting) {
            rest(order);
            return {};
        }
        std::vector<Trade> trades;
        std::int64_t remaining = order.volume();
        if (order.is_buy()) {
            while (remaining > 0 && !asks_.empty() && asks_.begin()->first <= order.price) {
                remaining -= fill_front(asks_, order.order_id, remaining, order.time, trades, /*incoming_buy=*/true);
            }
        } else {
            while (remaining > 0 && !bids_.empty() && bids_.begin()->first >= order.price) {
                remaining -= fill_front(bids_, order.order_id, remaining, order.time, trades, /*incoming_buy=*/false);
            }
        }
        if (remaining > 0) {
            Order rest_order = order;
            rest_order.signed_volume = order.is_buy() ? remaining : -remaining;
            rest(rest_order);
        }
        return trades;
    }

    AuctionResult call_auction(Ticks reference_price, Step now) {
        std::vector<Ticks> candidates;
        for (const auto& [price, level] : bids_) candidates.push_back(price);
        for (const auto& [price, level] : asks_) candidates.push_back(price);

        std::int64_t best_volume = 0;
        Ticks best_price = 0;
        for (Ticks p : candidates) {
            const std::int64_t executable = std::min(buy_volume_at_or_above(p), sell_volume_at_or_below(p));
            if (executable > best_volume) {
                best_volume = executable;
                best_price = p;
            } else if (executable == best_volume && executable > 0) {
                const Ticks d_new = std::abs(p - reference_price);
                const Ticks d_best = std::abs(best_price - reference_price);
                if (d_new < d_best || (d_new == d_best && p < best_price)) best_price = p;
            }
        }
        if (best_volume == 0) return {std::nullopt, {}};

        AuctionResult result{best_price, {}};
        // Match eligible orders front to front; map iteration already walks
        // bids high-to-low and asks low-to-high, levels are time-ordered.
        while (!bids_.empty() && bids_.begin()->first >= best_price && !asks_.empty() &&
               asks_.begin()->first <= best_price) {
            auto bid_level = bids_.begin();
            auto ask_level = asks_.begin();
            Resting& bid = bid_level->second.front();
            Resting& ask = ask_level->second.front();
            const std::int64_t vol = std::min(bid.order.volume(), ask.order.volume());
            result.trades.push_back({bid.order.order_id, ask.order.order_id, best_price, vol, now});
            bid.order.signed_volume -= vol;
            ask.order.signed_volume += vol;
            if (bid.order.signed_volume == 0) {
                bid_level->second.pop_front();
                if (bid_level->second.empty()) bids_.erase(bid_level);
            }
            if (ask.order.signed_volume == 0) {
                ask_level->second.pop_front();
                if (ask_level->second.empty()) asks_.erase(ask_level);
            }
        }
        last_price_ = best_price;
        return result;
    }

    std::optional<Ticks> best_bid() const {
        if (bids_.empty()) return std::nullopt;
        return bids_.begin()->first;
    }

    std::optional<Ticks> best_ask() const {
        if (asks_.empty()) return std::nullopt;
        return asks_.begin()->first;
    }

    /// (buy volume - sell volume) / (buy volume + sell volume) over resting
    /// orders; 0 for an empty book.
    double order_flow_imbalance() const {
        const std::int64_t buys = buy_volume();
        const std::int64_t sells = sell_volume();
        if (buys + sells == 0) return 0.0;
        return static_cast<double>(buys - sells) / static_cast<double>(buys + sells);
    }

    /// Removes every resting order with expiry < now; returns the count.
    std::size_t expire(Step now) {
        return expire_side(bids_, now) + expire_side(asks_, now);
    }

    std::optional<Ticks> last_price() const { return last_price_; }
    double tick_size() const { return tick_size_; }

    std::int64_t buy_volume() const { return side_volume(bids_); }
    std::int64_t sell_volume() const { return side_volume(asks_); }

    std::size_t order_count() const {
        std::size_t n = 0;
        for (const auto& [price, level] : bids_) n += level.size();
        for (const auto& [price, level] : asks_) n += level.size();
        return n;
    }

    bool empty() const { return bids_.empty() && asks_.empty(); }

    /// Snapshot of all resting orders with their remaining volumes,
    /// bids first (price descending), then asks (price ascending).
    std::vector<Order> resting_orders() const {
        std::vector<Order> out;
        for (const auto& [price, level] : bids_)
            for (const auto& r : level) out.push_back(r.order);
        for (const auto& [price, level] : asks_)
            for (const auto& r : level) out.push_back(r.order);
        return out;
    }

private:
    struct Resting {
        Order order;  // signed_volume tracks the unfilled remainder
        std::uint64_t seq = 0;
    };
    using BidLevels = std::map<Ticks, std::deque<Resting>, std::greater<Ticks>>;
    using AskLevels = std::map<Ticks, std::deque<Resting>>;

    void validate(const Order& order) {
        if (order.signed_volume == 0) throw std::invalid_argument("order rejected: zero volume");
        if (order.price <= 0) throw std::invalid_argument("order rejected: nonpositive price");
        if (order.expiry < order.time) throw std::invalid_argument("order rejected: expiry before submission");
        if (!seen_ids_.insert(order.order_id).second)
            throw std::invalid_argument("order rejected: duplicate order id");
    }

    void rest(const Order& order) {
        Resting entry{order, next_seq_++};
        auto& level = order.is_buy() ? bids_[order.price] : asks_[order.price];
        // Keep levels time-ascending even if submissions arrive out of order;
        // seq breaks ties by arrival.
        auto pos = std::upper_bound(level.begin(), level.end(), entry,
                                    [](const Resting& a, const Resting& b) { return a.order.time < b.order.time; });
        level.insert(pos, std::move(entry));
    }

    template <typename Levels>
    std::int64_t fill_front(Levels& levels, std::int64_t incoming_id, std::int64_t remaining, Step now,
                            std::vector<Trade>& trades, bool incoming_buy) {
        auto level = levels.begin();
        Resting& head = level->second.front();
        const std::int64_t vol = std::min(remaining, head.order.volume());
        if (incoming_buy) {
            trades.push_back({incoming_id, head.order.order_id, level->first, vol, now});
            head.order.signed_volume += vol;  // resting sell moves toward zero
        } else {
            trades.push_back({head.order.order_id, incoming_id, level->first, vol, now});
            head.order.signed_volume -= vol;
        }
        last_price_ = level->first;
        if (head.order.signed_volume == 0) {
            level->second.pop_front();
            if (level->second.empty()) levels.erase(level);
        }
        return vol;
    }

    std::int64_t buy_volume_at_or_above(Ticks price) const {
        std::int64_t total = 0;
        for (const auto& [p, level] : bids_) {
            if (p < price) break;
            for (const auto& r : level) total += r.order.volume();
        }
        return total;
    }

    std::int64_t sell_volume_at_or_below(Ticks price) const {
        std::int64_t total = 0;
        for (const auto& [p, level] : asks_) {
            if (p > price) break;
            for (const auto& r : level) total += r.order.volume();
        }
        return total;
    }

    template <typename Levels>
    static std::int64_t side_volume(const Levels& levels) {
        std::int64_t total = 0;
        for (const auto& [price, level] : levels)
            for (const auto& r : level) total += r.order.volume();
        return total;
    }

    template <typename Levels>
    static std::size_t expire_side(Levels& levels, Step now) {
        std::size_t removed = 0;
        for (auto it = levels.begin(); it != levels.end();) {
            auto& level = it->second;
            const auto before = level.size();
            level.erase(std::remove_if(level.begin(), level.end(),
                                       [now](const Resting& r) { return r.order.expiry < now; }),
                        level.end());
            removed += before - level.size();
            it = level.empty() ? levels.erase(it) : std::next(it);
        }
        return removed;
    }

    double tick_size_;
    BidLevels bids_;
    AskLevels asks_;
    std::optional<Ticks> last_price_;
    std::unordered_set<std::int64_t> seen_ids_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace fclsim
