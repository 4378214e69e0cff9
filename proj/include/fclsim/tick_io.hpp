#pragma once

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fclsim/decision.hpp"
#include "fclsim/sim.hpp"

namespace fclsim {

inline constexpr std::string_view kTickCsvHeader =
    "step,day,event,agent_id,price,signed_volume,market_price,mid_price,ofi";

namespace detail {

inline std::string csv_double(double v) {
    // format_real is shortest-round-trip, so written streams re-read exactly.
    return format_real(v);
}

}  // namespace detail

inline void write_ticks_csv(std::ostream& out, const std::vector<TickRecord>& ticks) {
    out << kTickCsvHeader << "\n";
    for (const auto& t : ticks) {
        out << t.step << ',' << t.day << ',' << tick_event_name(t.event) << ',';
        if (t.agent_id >= 0) out << t.agent_id;
        out << ',' << detail::csv_double(t.price) << ',' << t.signed_volume << ','
            << detail::csv_double(t.market_price) << ',' << detail::csv_double(t.mid_price) << ','
            << detail::csv_double(t.ofi) << "\n";
    }
}

inline void write_ticks_csv(const std::string& path, const std::vector<TickRecord>& ticks) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_ticks_csv(out, ticks);
}

inline void write_ticks_jsonl(std::ostream& out, const std::vector<TickRecord>& ticks) {
    for (const auto& t : ticks) {
        nlohmann::json row = {
            {"step", t.step},
            {"day", t.day},
            {"event", tick_event_name(t.event)},
            {"price", t.price},
            {"signed_volume", t.signed_volume},
            {"market_price", t.market_price},
            {"mid_price", t.mid_price},
            {"ofi", t.ofi},
        };
        if (t.agent_id >= 0)
            row["agent_id"] = t.agent_id;
        else
            row["agent_id"] = nullptr;
        out << row.dump() << "\n";
    }
}

inline void write_ticks_jsonl(const std::string& path, const std::vector<TickRecord>& ticks) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_ticks_jsonl(out, ticks);
}

inline std::vector<TickRecord> read_ticks_csv(std::istream& in, const std::string& origin = "<stream>") {
    std::vector<TickRecord> ticks;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(origin + ": empty tick file");
    if (line != kTickCsvHeader) throw std::runtime_error(origin + ": bad tick header");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::array<std::string, 9> fields;
        std::size_t field = 0, start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (field >= fields.size())
                    throw std::runtime_error(origin + ": too many fields at line " + std::to_string(line_no));
                fields[field++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (field != fields.size())
            throw std::runtime_error(origin + ": wrong field count at line " + std::to_string(line_no));
        TickRecord t;
        try {
            t.step = std::stoll(fields[0]);
            t.day = std::stoi(fields[1]);
            const auto event = tick_event_from_name(fields[2]);
            if (!event) throw std::invalid_argument("bad event");
            t.event = *event;
            t.agent_id = fields[3].empty() ? -1 : std::stoi(fields[3]);
            t.price = std::stod(fields[4]);
            t.signed_volume = std::stoll(fields[5]);
            t.market_price = std::stod(fields[6]);
            t.mid_price = std::stod(fields[7]);
            t.ofi = std::stod(fields[8]);
        } catch (const std::exception&) {
            throw std::runtime_error(origin + ": corrupt record at line " + std::to_string(line_no));
        }
        ticks.push_back(t);
    }
    return ticks;
}

inline std::vector<TickRecord> read_ticks_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tick file: " + path);
    return read_ticks_csv(in, path);
}

inline std::vector<TickRecord> read_ticks_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tick file: " + path);
    std::vector<TickRecord> ticks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto row = nlohmann::json::parse(line, nullptr, false);
        if (row.is_discarded() || !row.is_object())
            throw std::runtime_error(path + ": corrupt record at line " + std::to_string(line_no));
        try {
            TickRecord t;
            t.step = row.at("step").get<Step>();
            t.day = row.at("day").get<int>();
            const auto event = tick_event_from_name(row.at("event").get<std::string>());
            if (!event) throw std::invalid_argument("bad event");
            t.event = *event;
            t.agent_id = row.at("agent_id").is_null() ? -1 : row.at("agent_id").get<int>();
            t.price = row.at("price").get<double>();
            t.signed_volume = row.at("signed_volume").get<std::int64_t>();
            t.market_price = row.at("market_price").get<double>();
            t.mid_price = row.at("mid_price").get<double>();
            t.ofi = row.at("ofi").get<double>();
            ticks.push_back(t);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": corrupt record at line " + std::to_string(line_no));
        }
    }
    return ticks;
}

}  // namespace fclsim
