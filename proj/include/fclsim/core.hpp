#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fclsim {

using Step = std::int64_t;
using Ticks = std::int64_t;
using Rng = std::mt19937_64;

enum class Intention { Buy, Sell };

// One executed fill from a single agent's point of view.
struct HistoryEntry {
    Step time = 0;
    double price = 0.0;
    std::int64_t signed_volume = 0;  // >0 bought, <0 sold

    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

// Tick-grid conversion. The small guard absorbs representation error in
// price / tick_size so exact grid prices survive the round trip.
inline Ticks to_ticks_floor(double price, double tick_size) {
    return static_cast<Ticks>(std::floor(price / tick_size + 1e-6));
}

inline Ticks to_ticks_ceil(double price, double tick_size) {
    return static_cast<Ticks>(std::ceil(price / tick_size - 1e-6));
}

inline double to_price(Ticks ticks, double tick_size) {
    return static_cast<double>(ticks) * tick_size;
}

}  // namespace fclsim
