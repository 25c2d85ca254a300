// End-to-end checks of the ddlab binary: output formats, exit codes, config
// injection and the reproducibility contract. DDLAB_BIN is supplied by the
// build as the path to the freshly built executable.

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

using nlohmann::json;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

struct RunResult {
    int code = -1;
    std::string out, err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run_cli(const std::string& args) {
    static int serial = 0;
    const std::string base = "/tmp/ddlab_cli_" + std::to_string(++serial);
    const std::string cmd =
        std::string(DDLAB_BIN) + " " + args + " > " + base + ".out 2> " + base + ".err";
    const int rc = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(base + ".out");
    r.err = slurp(base + ".err");
    std::remove((base + ".out").c_str());
    std::remove((base + ".err").c_str());
    return r;
}

std::string strip_timing(std::string s) {
    static const std::regex ms("\"elapsed_ms\":[0-9eE+.-]+");
    return std::regex_replace(s, ms, "\"elapsed_ms\":0");
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

} // namespace

TEST_CASE("law emits versioned json with the closed-form value") {
    const RunResult r =
        run_cli("law dd-transform --model bm --mu 0 --sigma 1 --q 0.5 --a 1 --format json");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j.at("schema") == "drawdown-lab/1");
    REQUIRE(j.at("rows").size() == 1);
    const auto& row = j.at("rows").at(0);
    CHECK(row.at("status") == "ok");
    CHECK_THAT(row.at("value").get<double>(), WithinAbs(1.0 / std::cosh(1.0), 1e-12));
    CHECK(row.at("inputs").at("a").get<double>() == 1.0);
    CHECK(j.at("summary").at("status") == "ok");
}

TEST_CASE("csv and json carry identical doubles") {
    const std::string common = "law dd-transform --model bm --mu 0.2 --q 0.25:2:8 --a 0.8";
    const RunResult c = run_cli(common + " --format csv");
    const RunResult j = run_cli(common + " --format json");
    REQUIRE(c.code == 0);
    REQUIRE(j.code == 0);
    std::istringstream lines(c.out);
    std::string header;
    REQUIRE(std::getline(lines, header));
    const auto cols = split_csv(header);
    std::size_t vcol = cols.size();
    for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == "value") vcol = i;
    REQUIRE(vcol < cols.size());
    const json rows = json::parse(j.out).at("rows");
    std::string line;
    std::size_t i = 0;
    while (std::getline(lines, line) && !line.empty()) {
        REQUIRE(i < rows.size());
        const auto cells = split_csv(line);
        REQUIRE(cells.size() > vcol);
        // 17 significant digits means the decimal text round-trips exactly
        CHECK(std::strtod(cells[vcol].c_str(), nullptr) == rows.at(i).at("value").get<double>());
        ++i;
    }
    CHECK(i == rows.size());
}

TEST_CASE("row order follows the input grid and ignores the worker count") {
    const std::string common = "law dd-transform --model bm --q 0.5,1.5 --a 0.5:1:3 --format json";
    const RunResult one = run_cli(common);
    setenv("DDLAB_THREADS", "3", 1);
    const RunResult env = run_cli(common);
    unsetenv("DDLAB_THREADS");
    REQUIRE(one.code == 0);
    REQUIRE(env.code == 0);
    CHECK(strip_timing(one.out) == strip_timing(env.out));
    const json rows = json::parse(one.out).at("rows");
    REQUIRE(rows.size() == 6);
    // last axis (a) fastest
    CHECK(rows.at(0).at("inputs").at("q").get<double>() == 0.5);
    CHECK(rows.at(1).at("inputs").at("q").get<double>() == 0.5);
    CHECK(rows.at(0).at("inputs").at("a").get<double>() == 0.5);
    CHECK(rows.at(1).at("inputs").at("a").get<double>() == 0.75);
    CHECK(rows.at(5).at("inputs").at("q").get<double>() == 1.5);
}

TEST_CASE("validation problems exit 2 and name the precondition") {
    const RunResult neg = run_cli("law dd-transform --model bm --q 0.5 --a -1");
    CHECK(neg.code == 2);
    CHECK_THAT(neg.err, ContainsSubstring("positive"));

    const RunResult unknown = run_cli("law not-a-law --q 0.5 --a 1");
    CHECK(unknown.code == 2);

    const RunResult grid = run_cli("law dd-transform --q 0.5:1 --a 1");
    CHECK(grid.code == 2);

    const RunResult cap =
        run_cli("law dd-transform --q 0.1:1:600 --a 0.5:2:600 --grid-cap 1000");
    CHECK(cap.code == 2);
    CHECK_THAT(cap.err, ContainsSubstring("grid"));
}

TEST_CASE("numerical failures exit 3 and name the variant") {
    const RunResult r = run_cli(
        "simulate dd-transform --model bm --q 0.05 --a 3 --horizon 2 --n 400 --dt 1e-3"
        " --scheme exact-gaussian");
    CHECK(r.code == 3);
    CHECK_THAT(r.err, ContainsSubstring("horizon-too-short"));
}

TEST_CASE("verify suites pass and report per-case rows") {
    const RunResult id = run_cli("verify identity-in-law --format json");
    REQUIRE(id.code == 0);
    const json j = json::parse(id.out);
    CHECK(j.at("summary").at("overall") == "PASS");
    CHECK(j.at("rows").size() > 0);
    for (const auto& row : j.at("rows")) CHECK(row.at("status") == "pass");

    const RunResult kl = run_cli("verify kernel-laws --cases 200 --seed 7 --format json");
    REQUIRE(kl.code == 0);
    CHECK(json::parse(kl.out).at("summary").at("overall") == "PASS");
}

TEST_CASE("fixed-seed verify output is bit-identical modulo timing") {
    const std::string cmd = "verify kernel-laws --cases 150 --seed 42 --format json";
    const RunResult a = run_cli(cmd);
    const RunResult b = run_cli(cmd);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(strip_timing(a.out) == strip_timing(b.out));
}

TEST_CASE("config file supplies defaults and explicit flags win") {
    const std::string cfg_path = "/tmp/ddlab_cli_cfg.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({"model": "bm", "mu": 0.0, "q": "0.7", "a": "1.2", "format": "json"})";
    }
    const RunResult r = run_cli("law dd-transform --config " + cfg_path + " --a 0.9");
    REQUIRE(r.code == 0);
    const json row = json::parse(r.out).at("rows").at(0);
    CHECK(row.at("inputs").at("q").get<double>() == 0.7);
    CHECK(row.at("inputs").at("a").get<double>() == 0.9);
    std::remove(cfg_path.c_str());
}

TEST_CASE("price subcommand reproduces the library value") {
    const RunResult r = run_cli(
        "price parisian-digital --model bm --mu 0 --y 0.3 --T 1 --K 0.2 --r 0 --format json");
    REQUIRE(r.code == 0);
    const json row = json::parse(r.out).at("rows").at(0);
    CHECK_THAT(row.at("value").get<double>(), WithinAbs(0.9539876340278136, 1e-9));
}

TEST_CASE("output lands in the requested file") {
    const std::string path = "/tmp/ddlab_cli_outfile.json";
    const RunResult r = run_cli("law du-transform --model bm --q 1 --b 0.5 --format json --output " +
                                path);
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    const json j = json::parse(slurp(path));
    CHECK(j.at("rows").at(0).at("status") == "ok");
    std::remove(path.c_str());
}
