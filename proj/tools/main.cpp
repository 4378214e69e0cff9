// fclsim: limit-order-book market simulator with rule-based and
// intention-driven agents, plus analytics over the recorded tick streams.
//
// Subcommands:
//   run          simulate N trials and write tick files + a manifest
//   analyze      compute stylized facts and the nearness regression per trial
//   single-turn  one-shot decision elicitation across the four scenarios

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fclsim/analytics.hpp"
#include "fclsim/config.hpp"
#include "fclsim/remote.hpp"
#include "fclsim/sim.hpp"
#include "fclsim/single_turn.hpp"
#include "fclsim/tick_io.hpp"

namespace fs = std::filesystem;
using namespace fclsim;

namespace {

ExperimentConfig load_experiment(const std::string& config_path, const std::string& preset,
                                 const std::vector<std::string>& overrides) {
    std::string text;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config file: " + config_path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        text = buffer.str();
    }
    if (!preset.empty()) text += "\npreset = " + preset + "\n";
    ExperimentConfig cfg = parse_config(text);

    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + item + "'");
        entries.emplace_back(detail::trim(item.substr(0, eq)), detail::trim(item.substr(eq + 1)));
    }
    apply_config_overrides(cfg, entries);
    return cfg;
}

std::string tick_file_name(std::uint64_t seed, const std::string& format) {
    return "ticks_seed" + std::to_string(seed) + (format == "jsonl" ? ".jsonl" : ".csv");
}

std::string pa_file_name(std::uint64_t seed) { return "pa_seed" + std::to_string(seed) + ".csv"; }

int cmd_run(const std::string& config_path, const std::string& preset,
            const std::vector<std::string>& overrides, int trials, std::optional<std::uint64_t> seed_opt,
            const std::string& out_dir, const std::string& format, int jobs, bool force) {
    const ExperimentConfig cfg = load_experiment(config_path, preset, overrides);
    validate(cfg.sim);
    if (trials < 1) throw std::invalid_argument("--trials must be at least 1");
    const std::uint64_t base_seed = seed_opt.value_or(cfg.sim.seed);

    fs::create_directories(out_dir);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < trials; ++i) seeds.push_back(base_seed + static_cast<std::uint64_t>(i));

    const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
    if (!force) {
        if (fs::exists(manifest_path))
            throw std::runtime_error(manifest_path.string() + " exists; pass --force to overwrite");
        for (std::uint64_t s : seeds) {
            const fs::path p = fs::path(out_dir) / tick_file_name(s, format);
            if (fs::exists(p)) throw std::runtime_error(p.string() + " exists; pass --force to overwrite");
        }
    }

    std::vector<std::string> artifacts(seeds.size());
    std::vector<long long> timings(seeds.size());
    std::vector<std::string> pa_artifacts(seeds.size());
    std::mutex log_mutex;
    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors;

    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) {
            try {
                SimConfig sim_cfg = cfg.sim;
                sim_cfg.seed = seeds[i];
                const auto provider = make_provider(sim_cfg.provider, seeds[i]);
                const auto start = std::chrono::steady_clock::now();
                const RunResult result = run(sim_cfg, provider.get());
                timings[i] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
                const std::string name = tick_file_name(seeds[i], format);
                const fs::path path = fs::path(out_dir) / name;
                if (format == "jsonl")
                    write_ticks_jsonl(path.string(), result.ticks);
                else
                    write_ticks_csv(path.string(), result.ticks);
                artifacts[i] = name;
                if (!result.fcl_asset_proportions.empty()) {
                    const std::string pa_name = pa_file_name(seeds[i]);
                    std::ofstream pa(fs::path(out_dir) / pa_name);
                    pa << "pa\n";
                    for (double v : result.fcl_asset_proportions) pa << format_real(v) << "\n";
                    pa_artifacts[i] = pa_name;
                }
                std::lock_guard<std::mutex> lock(log_mutex);
                std::cout << "trial seed " << seeds[i] << ": " << result.ticks.size() << " tick records, "
                          << timings[i] << " ms -> " << path.string() << "\n";
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(log_mutex);
                errors.push_back(e.what());
            }
        }
    };

    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(seeds.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (!errors.empty()) {
        for (const auto& e : errors) std::cerr << "fclsim: " << e << "\n";
        return 1;
    }

    nlohmann::json manifest;
    manifest["config"] = config_snapshot(cfg);
    manifest["trials"] = trials;
    manifest["seeds"] = seeds;
    manifest["format"] = format;
    manifest["artifacts"] = artifacts;
    nlohmann::json pa_list = nlohmann::json::array();
    for (const auto& name : pa_artifacts) {
        if (name.empty())
            pa_list.push_back(nullptr);
        else
            pa_list.push_back(name);
    }
    manifest["pa_artifacts"] = pa_list;
    manifest["timings_ms"] = timings;
    std::ofstream mf(manifest_path);
    mf << manifest.dump(2) << "\n";
    std::cout << "manifest -> " << manifest_path.string() << "\n";
    return 0;
}

struct TrialMetrics {
    std::uint64_t seed = 0;
    std::string source;
    std::optional<StylizedFactsReport> facts;
    std::vector<std::optional<RegressionResult>> regressions;  // per horizon
    std::string degenerate_note;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

struct MeanSd {
    double mean = 0.0;
    std::optional<double> sd;
    int n = 0;
};

MeanSd mean_sd(const std::vector<double>& xs) {
    MeanSd out;
    out.n = static_cast<int>(xs.size());
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return out;
}

int cmd_analyze(const std::string& dir, const std::string& horizons_arg, int steps_per_minute) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);

    std::vector<int> horizons;
    for (const auto& part : detail::split_list(horizons_arg))
        horizons.push_back(static_cast<int>(detail::parse_int("--horizons", part)));
    if (horizons.empty()) throw std::invalid_argument("--horizons must name at least one horizon");

    ExperimentConfig cfg;
    std::vector<fs::path> tick_files;
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        const auto manifest = nlohmann::json::parse(in, nullptr, false);
        if (manifest.is_discarded()) throw std::runtime_error("corrupt manifest: " + manifest_path.string());
        std::vector<std::pair<std::string, std::string>> entries;
        for (const auto& [key, value] : manifest.at("config").items())
            entries.emplace_back(key, value.get<std::string>());
        apply_config_overrides(cfg, entries);
        for (const auto& name : manifest.at("artifacts"))
            tick_files.push_back(fs::path(dir) / name.get<std::string>());
    } else {
        std::cerr << "fclsim: no manifest.json in " << dir << "; using default configuration\n";
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.starts_with("ticks_") && (name.ends_with(".csv") || name.ends_with(".jsonl")))
                tick_files.push_back(entry.path());
        }
        std::sort(tick_files.begin(), tick_files.end());
    }
    if (tick_files.empty()) throw std::runtime_error("no tick files found in " + dir);

    std::vector<TrialMetrics> trials;
    for (const auto& path : tick_files) {
        TrialMetrics metrics;
        metrics.source = path.filename().string();
        const std::string stem = path.stem().string();
        if (const auto pos = stem.rfind("seed"); pos != std::string::npos)
            metrics.seed = std::strtoull(stem.c_str() + pos + 4, nullptr, 10);
        const auto ticks = path.extension() == ".jsonl" ? read_ticks_jsonl(path.string())
                                                        : read_ticks_csv(path.string());
        const auto bars = build_bars(ticks, cfg.sim.day_structure, steps_per_minute, cfg.sim.initial_price);
        try {
            metrics.facts = compute_stylized_facts(bars);
        } catch (const std::exception& e) {
            metrics.degenerate_note = e.what();
        }
        const auto closes = daily_closes(ticks, cfg.sim.day_structure, cfg.sim.initial_price);
        for (int horizon : horizons) {
            try {
                metrics.regressions.emplace_back(ath_regression(closes, horizon));
            } catch (const std::exception&) {
                metrics.regressions.emplace_back(std::nullopt);
            }
        }

        // Nearness-at-action statistics when intention-driven agents traded.
        if (cfg.sim.n_fcl > 0) {
            std::set<int> fcl_ids;
            for (int j = 0; j < cfg.sim.n_fcl; ++j) fcl_ids.insert(j);
            const auto samples = nearness_at_actions(ticks, fcl_ids, cfg.sim.initial_price);
            if (!samples.buys.empty() && !samples.sells.empty()) {
                const auto ks = ks_two_sample(samples.buys, samples.sells);
                const auto mwu = mann_whitney_u(samples.buys, samples.sells);
                std::cout << metrics.source << ": fcl buys=" << samples.buys.size()
                          << " sells=" << samples.sells.size() << " KS=" << fmt(ks.statistic)
                          << " (p=" << fmt(ks.p_value) << ") MWU p=" << fmt(mwu.p_value) << "\n";
            }
        }
        const fs::path pa_path = fs::path(dir) / pa_file_name(metrics.seed);
        if (fs::exists(pa_path)) {
            std::ifstream pa(pa_path);
            std::string line;
            std::getline(pa, line);  // header
            std::vector<double> values;
            while (std::getline(pa, line))
                if (!line.empty()) values.push_back(std::strtod(line.c_str(), nullptr));
            if (!values.empty())
                std::cout << metrics.source << ": asset proportion percentiles 1/50/99 = "
                          << fmt(percentile(values, 0.01)) << " / " << fmt(percentile(values, 0.50))
                          << " / " << fmt(percentile(values, 0.99)) << "\n";
        }
        trials.push_back(std::move(metrics));
    }

    // Cross-trial aggregation.
    std::ostringstream report;
    report << "fclsim analysis of " << dir << " (" << trials.size() << " trial"
           << (trials.size() == 1 ? "" : "s") << ")\n\n";
    report << "stylized facts (per trial, then mean +- sample sd):\n";
    report << "  trial            kurtosis   acf|r|(1)  acf|r|(5)  acf|r|(10) ret-vol corr\n";
    std::vector<double> kurt, a1, a5, a10, rv;
    for (const auto& t : trials) {
        report << "  " << t.source;
        for (std::size_t pad = t.source.size(); pad < 15; ++pad) report << ' ';
        if (t.facts) {
            report << "  " << fmt(t.facts->kurtosis) << "     " << fmt(t.facts->acf_abs.at(1)) << "     "
                   << fmt(t.facts->acf_abs.at(5)) << "     " << fmt(t.facts->acf_abs.at(10)) << "     "
                   << fmt(t.facts->ret_vol_corr) << "\n";
            kurt.push_back(t.facts->kurtosis);
            a1.push_back(t.facts->acf_abs.at(1));
            a5.push_back(t.facts->acf_abs.at(5));
            a10.push_back(t.facts->acf_abs.at(10));
            rv.push_back(t.facts->ret_vol_corr);
        } else {
            report << "  n/a (" << t.degenerate_note << ")\n";
        }
    }
    const auto append_mean = [&report](const char* label, const MeanSd& m) {
        report << "  " << label << ": mean " << fmt(m.mean);
        if (m.sd)
            report << " +- " << fmt(*m.sd);
        else
            report << " (single trial, sd n/a)";
        report << "\n";
    };
    if (!kurt.empty()) {
        append_mean("kurtosis    ", mean_sd(kurt));
        append_mean("acf|r|(1)   ", mean_sd(a1));
        append_mean("acf|r|(5)   ", mean_sd(a5));
        append_mean("acf|r|(10)  ", mean_sd(a10));
        append_mean("ret-vol corr", mean_sd(rv));
    }

    report << "\nnearness regression beta_h by horizon:\n";
    std::ofstream beta_csv(fs::path(dir) / "beta_h.csv");
    beta_csv << "source,horizon_days,beta_h,intercept,n_obs\n";
    for (std::size_t h = 0; h < horizons.size(); ++h) {
        std::vector<double> betas;
        report << "  " << horizons[h] << "-day:";
        for (const auto& t : trials) {
            if (t.regressions[h]) {
                betas.push_back(t.regressions[h]->beta_h);
                report << "  " << fmt(t.regressions[h]->beta_h);
                beta_csv << t.source << ',' << horizons[h] << ',' << format_real(t.regressions[h]->beta_h)
                         << ',' << format_real(t.regressions[h]->intercept) << ','
                         << t.regressions[h]->n_obs << "\n";
            } else {
                report << "  n/a";
                beta_csv << t.source << ',' << horizons[h] << ",n/a,n/a,0\n";
            }
        }
        const auto m = mean_sd(betas);
        if (m.n == 0) {
            report << "   | mean n/a\n";
        } else {
            report << "   | mean " << fmt(m.mean);
            if (m.sd)
                report << " +- " << fmt(*m.sd);
            else
                report << " (sd n/a)";
            report << "\n";
        }
    }

    std::ofstream facts_csv(fs::path(dir) / "stylized_facts.csv");
    facts_csv << "source,kurtosis,acf_abs_1,acf_abs_5,acf_abs_10,ret_vol_corr\n";
    for (const auto& t : trials) {
        facts_csv << t.source << ',';
        if (t.facts)
            facts_csv << format_real(t.facts->kurtosis) << ',' << format_real(t.facts->acf_abs.at(1)) << ','
                      << format_real(t.facts->acf_abs.at(5)) << ',' << format_real(t.facts->acf_abs.at(10))
                      << ',' << format_real(t.facts->ret_vol_corr) << "\n";
        else
            facts_csv << "n/a,n/a,n/a,n/a,n/a\n";
    }

    std::ofstream report_file(fs::path(dir) / "report.txt");
    report_file << report.str();
    std::cout << report.str();
    std::cout << "report -> " << (fs::path(dir) / "report.txt").string() << "\n";
    return 0;
}

int cmd_single_turn(const std::string& config_path, const std::string& preset,
                    const std::vector<std::string>& overrides) {
    const ExperimentConfig cfg = load_experiment(config_path, preset, overrides);
    if (cfg.single_turn.providers.empty())
        throw std::invalid_argument("single_turn.providers names no providers");

    std::printf("%-28s %-16s %-16s %-16s %-16s\n", "provider", "G+", "G-", "L-", "L+");
    bool degraded = false;
    for (const auto& name : cfg.single_turn.providers) {
        ProviderConfig provider_cfg = cfg.sim.provider;
        provider_cfg.kind = *provider_kind_from_name(name);
        const auto provider = make_provider(provider_cfg, cfg.single_turn.seed);
        const auto results = run_all_scenarios(cfg.single_turn.scenario_base(), *provider);
        int failures = 0, total = 0;
        std::printf("%-28s", provider->name().c_str());
        for (ScenarioKind kind : kAllScenarios) {
            const Tally& tally = results.at(kind);
            char cell[32];
            std::snprintf(cell, sizeof(cell), "%+d (%d, %d)", tally.net(), tally.buys, tally.sells);
            std::printf(" %-16s", cell);
            failures += tally.failures;
            total += tally.trials();
        }
        std::printf("\n");
        if (failures > 0) std::printf("  %s: %d of %d trials failed\n", name.c_str(), failures, total);
        if (failures * 2 > total) {
            std::printf("WARNING: provider '%s' was unavailable for %d of %d trials\n", name.c_str(),
                        failures, total);
            degraded = true;
        }
    }
    return degraded ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"limit-order-book market simulator with intention-driven agents"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir = "out", format = "csv";
    std::vector<std::string> overrides;
    int trials = 1, jobs = 1;
    std::optional<std::uint64_t> seed;
    bool force = false;

    auto* run_cmd = app.add_subcommand("run", "simulate trials and write tick streams");
    run_cmd->add_option("config", config_path, "experiment configuration file");
    run_cmd->add_option("--preset", preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    run_cmd->add_option("--trials", trials, "number of trials (seeds seed..seed+N-1)");
    run_cmd->add_option("--seed", seed, "base seed (default: config seed)");
    run_cmd->add_option("--out", out_dir, "output directory");
    run_cmd->add_option("--format", format, "tick format")->check(CLI::IsMember({"csv", "jsonl"}));
    run_cmd->add_option("--jobs", jobs, "parallel trials");
    run_cmd->add_flag("--force", force, "overwrite existing outputs");
    run_cmd->add_option("--set", overrides, "override a config key (key=value)");

    std::string analyze_dir, horizons = "10,15,30";
    int steps_per_minute = 5;
    auto* analyze_cmd = app.add_subcommand("analyze", "compute metrics from recorded tick streams");
    analyze_cmd->add_option("dir", analyze_dir, "directory with tick files")->required();
    analyze_cmd->add_option("--horizons", horizons, "comma-separated day horizons");
    analyze_cmd->add_option("--steps-per-minute", steps_per_minute, "continuous steps per bar");

    std::string st_config, st_preset;
    std::vector<std::string> st_overrides;
    auto* st_cmd = app.add_subcommand("single-turn", "one-shot decisions across the four scenarios");
    st_cmd->add_option("config", st_config, "experiment configuration file");
    st_cmd->add_option("--preset", st_preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    st_cmd->add_option("--set", st_overrides, "override a config key (key=value)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed())
            return cmd_run(config_path, preset, overrides, trials, seed, out_dir, format, jobs, force);
        if (analyze_cmd->parsed()) return cmd_analyze(analyze_dir, horizons, steps_per_minute);
        if (st_cmd->parsed()) return cmd_single_turn(st_config, st_preset, st_overrides);
    } catch (const std::exception& e) {
        std::cerr << "fclsim: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
