#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fclsim/decision.hpp"
#include "fclsim/sim.hpp"
#include "fclsim/single_turn.hpp"

namespace fclsim {

struct SingleTurnSettings {
    int trials = 100;
    std::uint64_t seed = 42;
    double p1 = 300.0;
    double cash = 30000.0;
    std::int64_t v1 = 10;
    Step t = 50;
    Step total_time = 100;
    std::vector<std::string> providers = {"scripted-always-buy", "scripted-always-sell",
                                          "scripted-loss-averse"};

    ScenarioConfig scenario_base() const {
        ScenarioConfig base;
        base.p1 = p1;
        base.cash = cash;
        base.v1 = v1;
        base.t = t;
        base.total_time = total_time;
        base.trials = trials;
        base.seed = seed;
        return base;
    }
};

struct ExperimentConfig {
    SimConfig sim;
    SingleTurnSettings single_turn;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
    std::size_t consumed = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &consumed);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad numeric value for key '" + key + "': " + value);
    }
    if (consumed != value.size())
        throw std::invalid_argument("config: bad numeric value for key '" + key + "': " + value);
    return out;
}

inline std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw std::invalid_argument("config: bad integer value for key '" + key + "': " + value);
    return out;
}

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct ConfigKey {
    std::string name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

inline std::vector<ConfigKey> config_keys() {
    std::vector<ConfigKey> keys;
    const auto add = [&keys](std::string name, auto setter, auto getter) {
        keys.push_back({std::move(name), std::move(setter), std::move(getter)});
    };

    const auto add_int = [&](const std::string& name, auto apply, auto read) {
        add(name,
            [apply, name](ExperimentConfig& c, const std::string& v) { apply(c, parse_int(name, v)); },
            [read](const ExperimentConfig& c) { return std::to_string(read(c)); });
    };
    const auto add_real = [&](const std::string& name, auto apply, auto read) {
        add(name,
            [apply, name](ExperimentConfig& c, const std::string& v) { apply(c, parse_double(name, v)); },
            [read](const ExperimentConfig& c) { return format_real(read(c)); });
    };
    add_int("n_agents", [](ExperimentConfig& c, std::int64_t v) { c.sim.n_agents = static_cast<int>(v); },
            [](const ExperimentConfig& c) { return c.sim.n_agents; });
    add_int("n_fcl", [](ExperimentConfig& c, std::int64_t v) { c.sim.n_fcl = static_cast<int>(v); },
            [](const ExperimentConfig& c) { return c.sim.n_fcl; });
    add_int("days", [](ExperimentConfig& c, std::int64_t v) { c.sim.days = static_cast<int>(v); },
            [](const ExperimentConfig& c) { return c.sim.days; });
    add("day_structure",
        [](ExperimentConfig& c, const std::string& v) {
            const auto parts = split_list(v);
            if (parts.size() != 4)
                throw std::invalid_argument("config: day_structure needs 4 comma-separated counts");
            c.sim.day_structure.collect1 = parse_int("day_structure", parts[0]);
            c.sim.day_structure.continuous1 = parse_int("day_structure", parts[1]);
            c.sim.day_structure.collect2 = parse_int("day_structure", parts[2]);
            c.sim.day_structure.continuous2 = parse_int("day_structure", parts[3]);
        },
        [](const ExperimentConfig& c) {
            const auto& d = c.sim.day_structure;
            return std::to_string(d.collect1) + "," + std::to_string(d.continuous1) + "," +
                   std::to_string(d.collect2) + "," + std::to_string(d.continuous2);
        });
    add_real("initial_price", [](ExperimentConfig& c, double v) { c.sim.initial_price = v; },
             [](const ExperimentConfig& c) { return c.sim.initial_price; });
    add_real("tick_size", [](ExperimentConfig& c, double v) { c.sim.tick_size = v; },
             [](const ExperimentConfig& c) { return c.sim.tick_size; });
    add_real("fundamental_volatility",
             [](ExperimentConfig& c, double v) { c.sim.fundamental_volatility = v; },
             [](const ExperimentConfig& c) { return c.sim.fundamental_volatility; });
    add_int("fcl_fixed_volume", [](ExperimentConfig& c, std::int64_t v) { c.sim.fcl_fixed_volume = v; },
            [](const ExperimentConfig& c) { return c.sim.fcl_fixed_volume; });
    add_int("seed",
            [](ExperimentConfig& c, std::int64_t v) { c.sim.seed = static_cast<std::uint64_t>(v); },
            [](const ExperimentConfig& c) { return static_cast<std::int64_t>(c.sim.seed); });

    const auto add_population = [&](const std::string& prefix, PopulationConfig SimConfig::*pop) {
        const auto add_pop_real = [&](const std::string& field, double PopulationConfig::*member) {
            add_real(
                prefix + "." + field,
                [pop, member](ExperimentConfig& c, double v) { c.sim.*pop.*member = v; },
                [pop, member](const ExperimentConfig& c) { return c.sim.*pop.*member; });
        };
        add_pop_real("lambda_f", &PopulationConfig::lambda_f);
        add_pop_real("lambda_c", &PopulationConfig::lambda_c);
        add_pop_real("lambda_n", &PopulationConfig::lambda_n);
        add_pop_real("sigma_n", &PopulationConfig::sigma_n);
        add_pop_real("alpha_ref", &PopulationConfig::alpha_ref);
        add_pop_real("tau_ref", &PopulationConfig::tau_ref);
        add_pop_real("alpha_diff", &PopulationConfig::alpha_diff);
        add_pop_real("tau_diff", &PopulationConfig::tau_diff);
        add_pop_real("cash_min", &PopulationConfig::cash_min);
        add_pop_real("cash_max", &PopulationConfig::cash_max);
        add_pop_real("position_min", &PopulationConfig::position_min);
        add_pop_real("position_max", &PopulationConfig::position_max);
        add_pop_real("margin_min", &PopulationConfig::margin_min);
        add_pop_real("margin_max", &PopulationConfig::margin_max);
        add_pop_real("price_half_width", &PopulationConfig::price_half_width);
        add_pop_real("demand_scale", &PopulationConfig::demand_scale);
        add_int(
            prefix + ".tau_fundamental",
            [pop](ExperimentConfig& c, std::int64_t v) { (c.sim.*pop).tau_fundamental = static_cast<int>(v); },
            [pop](const ExperimentConfig& c) { return (c.sim.*pop).tau_fundamental; });
        add_int(
            prefix + ".q_max", [pop](ExperimentConfig& c, std::int64_t v) { (c.sim.*pop).q_max = v; },
            [pop](const ExperimentConfig& c) { return (c.sim.*pop).q_max; });
    };
    add_population("population", &SimConfig::population);
    add_population("fcl_population", &SimConfig::fcl_population);

    add("provider.kind",
        [](ExperimentConfig& c, const std::string& v) {
            const auto kind = provider_kind_from_name(v);
            if (!kind) throw std::invalid_argument("config: unknown provider kind '" + v + "'");
            c.sim.provider.kind = *kind;
        },
        [](const ExperimentConfig& c) { return provider_kind_name(c.sim.provider.kind); });
    add("provider.endpoint",
        [](ExperimentConfig& c, const std::string& v) { c.sim.provider.endpoint = v; },
        [](const ExperimentConfig& c) { return c.sim.provider.endpoint; });
    add("provider.model_name",
        [](ExperimentConfig& c, const std::string& v) { c.sim.provider.model_name = v; },
        [](const ExperimentConfig& c) { return c.sim.provider.model_name; });
    add_int("provider.max_retries",
            [](ExperimentConfig& c, std::int64_t v) { c.sim.provider.max_retries = static_cast<int>(v); },
            [](const ExperimentConfig& c) { return c.sim.provider.max_retries; });
    add_int("provider.timeout_ms",
            [](ExperimentConfig& c, std::int64_t v) { c.sim.provider.timeout_ms = static_cast<int>(v); },
            [](const ExperimentConfig& c) { return c.sim.provider.timeout_ms; });
    add_real("provider.temperature", [](ExperimentConfig& c, double v) { c.sim.provider.temperature = v; },
             [](const ExperimentConfig& c) { return c.sim.provider.temperature; });
    add("provider.api_key_env",
        [](ExperimentConfig& c, const std::string& v) { c.sim.provider.api_key_env = v; },
        [](const ExperimentConfig& c) { return c.sim.provider.api_key_env; });
    add_real("provider.sell_bias_at_ath",
             [](ExperimentConfig& c, double v) { c.sim.provider.sell_bias_at_ath = v; },
             [](const ExperimentConfig& c) { return c.sim.provider.sell_bias_at_ath; });
    add_real("provider.buy_bias_at_loss",
             [](ExperimentConfig& c, double v) { c.sim.provider.buy_bias_at_loss = v; },
             [](const ExperimentConfig& c) { return c.sim.provider.buy_bias_at_loss; });

    add_int("single_turn.trials",
            [](ExperimentConfig& c, std::int64_t v) { c.single_turn.trials = static_cast<int>(v); },
            [](const ExperimentConfig& c) { return c.single_turn.trials; });
    add_int("single_turn.seed",
            [](ExperimentConfig& c, std::int64_t v) { c.single_turn.seed = static_cast<std::uint64_t>(v); },
            [](const ExperimentConfig& c) { return static_cast<std::int64_t>(c.single_turn.seed); });
    add_real("single_turn.p1", [](ExperimentConfig& c, double v) { c.single_turn.p1 = v; },
             [](const ExperimentConfig& c) { return c.single_turn.p1; });
    add_real("single_turn.cash", [](ExperimentConfig& c, double v) { c.single_turn.cash = v; },
             [](const ExperimentConfig& c) { return c.single_turn.cash; });
    add_int("single_turn.v1", [](ExperimentConfig& c, std::int64_t v) { c.single_turn.v1 = v; },
            [](const ExperimentConfig& c) { return c.single_turn.v1; });
    add_int("single_turn.t", [](ExperimentConfig& c, std::int64_t v) { c.single_turn.t = v; },
            [](const ExperimentConfig& c) { return c.single_turn.t; });
    add_int("single_turn.total_time",
            [](ExperimentConfig& c, std::int64_t v) { c.single_turn.total_time = v; },
            [](const ExperimentConfig& c) { return c.single_turn.total_time; });
    add("single_turn.providers",
        [](ExperimentConfig& c, const std::string& v) {
            c.single_turn.providers = split_list(v);
            for (const auto& name : c.single_turn.providers)
                if (!provider_kind_from_name(name))
                    throw std::invalid_argument("config: unknown provider kind '" + name + "'");
        },
        [](const ExperimentConfig& c) {
            std::string joined;
            for (const auto& name : c.single_turn.providers) {
                if (!joined.empty()) joined += ",";
                joined += name;
            }
            return joined;
        });
    return keys;
}

}  // namespace detail

/// Applies key = value overrides in order; unknown keys are an error naming
/// the offending key.
inline void apply_config_overrides(ExperimentConfig& cfg,
                                   const std::vector<std::pair<std::string, std::string>>& entries) {
    const auto keys = detail::config_keys();
    for (const auto& [key, value] : entries) {
        bool found = false;
        for (const auto& spec : keys) {
            if (spec.name == key) {
                spec.set(cfg, value);
                found = true;
                break;
            }
        }
        if (!found) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

/// Parses the flat key = value experiment configuration. A `preset` key
/// (desk | full) selects the baseline before any other key applies; `#`
/// starts a comment.
inline ExperimentConfig parse_config(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::string preset = "full";
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key = value at line " + std::to_string(line_no));
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "preset") {
            if (value != "desk" && value != "full")
                throw std::invalid_argument("config: unknown preset '" + value + "'");
            preset = value;
            continue;
        }
        entries.emplace_back(key, value);
    }

    ExperimentConfig cfg;
    if (preset == "desk") cfg.sim = desk_preset();
    apply_config_overrides(cfg, entries);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

/// Flat key -> value snapshot of every configuration key (manifest contents).
inline std::map<std::string, std::string> config_snapshot(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& spec : detail::config_keys()) out[spec.name] = spec.get(cfg);
    return out;
}

}  // namespace fclsim
