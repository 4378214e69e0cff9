#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "support/stub_server.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef FCLSIM_CLI_PATH
#define FCLSIM_CLI_PATH "fclsim"
#endif

struct CommandResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
    const fs::path out_file = fs::temp_directory_path() / ("fclsim_cli_out_" + std::to_string(::getpid()));
    const std::string command =
        std::string(FCLSIM_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>&1";
    const int status = std::system(command.c_str());
    CommandResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::stringstream buffer;
    buffer << in.rdbuf();
    result.output = buffer.str();
    fs::remove(out_file);
    return result;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("fclsim_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

const std::string kTinyConfig =
    "preset = desk\n"
    "n_agents = 20\n"
    "n_fcl = 2\n"
    "days = 2\n"
    "day_structure = 5, 20, 3, 20\n"
    "seed = 11\n"
    "provider.kind = scripted-loss-averse\n";

}  // namespace

TEST_CASE("run writes one tick file per trial plus a manifest with the seed range") {
    TempDir dir("run");
    write_file(dir.path / "exp.conf", kTinyConfig);
    const auto result = run_cli("run " + (dir.path / "exp.conf").string() + " --trials 5 --seed 7 --out " +
                                (dir.path / "out").string());
    CHECK(result.exit_code == 0);
    const auto manifest = nlohmann::json::parse(read_file(dir.path / "out" / "manifest.json"));
    CHECK(manifest.at("seeds") == nlohmann::json({7, 8, 9, 10, 11}));
    CHECK(manifest.at("trials") == 5);
    for (int s = 7; s <= 11; ++s) CHECK(fs::exists(dir.path / "out" / ("ticks_seed" + std::to_string(s) + ".csv")));
    CHECK(manifest.at("config").at("n_agents") == "20");
}

TEST_CASE("existing outputs are protected unless --force is given") {
    TempDir dir("force");
    write_file(dir.path / "exp.conf", kTinyConfig);
    const std::string base =
        "run " + (dir.path / "exp.conf").string() + " --trials 1 --out " + (dir.path / "out").string();
    CHECK(run_cli(base).exit_code == 0);
    const std::string first = read_file(dir.path / "out" / "ticks_seed11.csv");

    const auto denied = run_cli(base);
    CHECK(denied.exit_code != 0);
    CHECK(denied.output.find("--force") != std::string::npos);

    CHECK(run_cli(base + " --force").exit_code == 0);
    CHECK(read_file(dir.path / "out" / "ticks_seed11.csv") == first);  // byte-identical rerun
}

TEST_CASE("manifests of identical reruns differ only in timings") {
    TempDir dir("manifest");
    write_file(dir.path / "exp.conf", kTinyConfig);
    const std::string base =
        "run " + (dir.path / "exp.conf").string() + " --trials 2 --out " + (dir.path / "out").string();
    CHECK(run_cli(base).exit_code == 0);
    auto m1 = nlohmann::json::parse(read_file(dir.path / "out" / "manifest.json"));
    CHECK(run_cli(base + " --force").exit_code == 0);
    auto m2 = nlohmann::json::parse(read_file(dir.path / "out" / "manifest.json"));
    m1.erase("timings_ms");
    m2.erase("timings_ms");
    CHECK(m1 == m2);
}

TEST_CASE("unknown config keys fail with the key named") {
    TempDir dir("badkey");
    write_file(dir.path / "exp.conf", "n_agnets = 100\n");
    const auto result = run_cli("run " + (dir.path / "exp.conf").string());
    CHECK(result.exit_code != 0);
    CHECK(result.output.find("n_agnets") != std::string::npos);
}

TEST_CASE("jsonl format and parallel trials") {
    TempDir dir("jsonl");
    write_file(dir.path / "exp.conf", kTinyConfig);
    const auto result = run_cli("run " + (dir.path / "exp.conf").string() +
                                " --trials 2 --jobs 2 --format jsonl --out " + (dir.path / "out").string());
    CHECK(result.exit_code == 0);
    CHECK(fs::exists(dir.path / "out" / "ticks_seed11.jsonl"));
    CHECK(fs::exists(dir.path / "out" / "ticks_seed12.jsonl"));
}

TEST_CASE("analyze emits the report and per-metric tables") {
    TempDir dir("analyze");
    write_file(dir.path / "exp.conf", kTinyConfig);
    const std::string out = (dir.path / "out").string();
    CHECK(run_cli("run " + (dir.path / "exp.conf").string() + " --trials 2 --out " + out).exit_code == 0);
    const auto result = run_cli("analyze " + out + " --horizons 3,5");
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("stylized facts") != std::string::npos);
    CHECK(result.output.find("3-day:") != std::string::npos);
    CHECK(fs::exists(dir.path / "out" / "report.txt"));
    CHECK(fs::exists(dir.path / "out" / "beta_h.csv"));
    CHECK(fs::exists(dir.path / "out" / "stylized_facts.csv"));
}

TEST_CASE("analyze reports the standard deviation as absent for a single trial") {
    TempDir dir("sd");
    write_file(dir.path / "exp.conf", kTinyConfig);
    const std::string out = (dir.path / "out").string();
    CHECK(run_cli("run " + (dir.path / "exp.conf").string() + " --trials 1 --out " + out).exit_code == 0);
    const auto result = run_cli("analyze " + out + " --horizons 3");
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("sd n/a") != std::string::npos);
}

TEST_CASE("analyze rejects empty directories and corrupt tick files") {
    TempDir dir("empty");
    CHECK(run_cli("analyze " + dir.path.string()).exit_code != 0);

    write_file(dir.path / "ticks_seed1.csv", "not,a,tick,file\n1,2\n");
    const auto result = run_cli("analyze " + dir.path.string());
    CHECK(result.exit_code != 0);
}

TEST_CASE("single-turn prints the scenario grid for scripted providers") {
    TempDir dir("st");
    write_file(dir.path / "exp.conf",
               kTinyConfig + "single_turn.trials = 20\nsingle_turn.providers = scripted-always-buy\n");
    const auto result = run_cli("single-turn " + (dir.path / "exp.conf").string());
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("G+") != std::string::npos);
    CHECK(result.output.find("L+") != std::string::npos);
    CHECK(result.output.find("+20 (20, 0)") != std::string::npos);
}

TEST_CASE("analyze output files are byte-identical across reruns") {
    TempDir dir("adet");
    write_file(dir.path / "exp.conf", kTinyConfig);
    const std::string out = (dir.path / "out").string();
    CHECK(run_cli("run " + (dir.path / "exp.conf").string() + " --trials 2 --out " + out).exit_code == 0);
    CHECK(run_cli("analyze " + out + " --horizons 3").exit_code == 0);
    const std::string report1 = read_file(dir.path / "out" / "report.txt");
    const std::string beta1 = read_file(dir.path / "out" / "beta_h.csv");
    CHECK(run_cli("analyze " + out + " --horizons 3").exit_code == 0);
    CHECK(read_file(dir.path / "out" / "report.txt") == report1);
    CHECK(read_file(dir.path / "out" / "beta_h.csv") == beta1);
}

TEST_CASE("single-turn populates the grid from a stub endpoint") {
    fclsim::testing::StubChatServer stub(
        [](int, const std::string&) { return fclsim::testing::sell_reply(); });
    TempDir dir("ststub");
    write_file(dir.path / "exp.conf",
               "single_turn.trials = 10\n"
               "single_turn.providers = remote\n"
               "provider.endpoint = " + stub.endpoint() + "\n");
    const auto result = run_cli("single-turn " + (dir.path / "exp.conf").string());
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("-10 (0, 10)") != std::string::npos);
    CHECK(stub.request_count() == 40);  // 10 trials x 4 scenarios
}

TEST_CASE("single-turn warns when a provider is mostly unavailable") {
    TempDir dir("stbad");
    write_file(dir.path / "exp.conf",
               "single_turn.trials = 3\n"
               "single_turn.providers = remote\n"
               "provider.endpoint = http://127.0.0.1:1/v1/chat/completions\n"
               "provider.timeout_ms = 300\n"
               "provider.max_retries = 0\n");
    const auto result = run_cli("single-turn " + (dir.path / "exp.conf").string());
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("WARNING") != std::string::npos);
    CHECK(result.output.find("12 of 12") != std::string::npos);  // 3 trials x 4 scenarios
}
