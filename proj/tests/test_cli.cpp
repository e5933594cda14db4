// End-to-end checks of the command-line tool: spawns the built binary.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pmq/run_config.hpp"

#ifndef PMQ_CLI_PATH
#define PMQ_CLI_PATH "pmq_cli"
#endif

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pmq_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int counter() {
        static int c = 0;
        return ++c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PMQ_CLI_PATH) + " " + args + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kHestonConfig = R"({
  "task": "quantize",
  "model": {"id": "heston", "params": {"s0": 100.0, "v0": 0.09, "kappa": 2.0,
             "theta": 0.09, "sigma": 0.6, "r": 0.05, "rho": -0.3}},
  "schedule": {"horizon": 1.0, "steps": 4, "codewords": [10, 6]},
  "schemes": ["euler", "wo2"]
})";

} // namespace

TEST_CASE("quantize writes a grid and a summary, deterministically") {
    TempDir dir;
    write_file(dir.file("cfg.json"), kHestonConfig);
    const std::string base = "quantize --config " + dir.file("cfg.json");
    REQUIRE(run_cli(base + " --out " + dir.file("a")) == 0);
    REQUIRE(run_cli(base + " --out " + dir.file("b")) == 0);
    const auto grid_a = read_file(dir.file("a") + "/grid.pmqg");
    const auto grid_b = read_file(dir.file("b") + "/grid.pmqg");
    REQUIRE(!grid_a.empty());
    CHECK(grid_a == grid_b); // byte-identical rerun

    const auto summary = read_file(dir.file("a") + "/quantize_summary.csv");
    CHECK(summary.find("step,dim,codewords,distortion") == 0);
    // 4 steps x 2 dims data rows
    int rows = 0;
    for (char c : summary)
        if (c == '\n') ++rows;
    CHECK(rows == 1 + 8);
}

TEST_CASE("config errors exit with code 2") {
    TempDir dir;
    SECTION("malformed json names the line") {
        write_file(dir.file("bad.json"), "{\n  \"task\": oops\n}");
        CHECK(run_cli("quantize --config " + dir.file("bad.json") + " --out " +
                      dir.file("o")) == 2);
    }
    SECTION("unknown keys are rejected") {
        std::string cfg = kHestonConfig;
        cfg.insert(cfg.rfind('}'), ", \"extra_key\": 1\n");
        write_file(dir.file("extra.json"), cfg);
        CHECK(run_cli("quantize --config " + dir.file("extra.json") + " --out " +
                      dir.file("o")) == 2);
    }
    SECTION("zero horizon is rejected at validation") {
        std::string cfg = kHestonConfig;
        auto pos = cfg.find("\"horizon\": 1.0");
        cfg.replace(pos, 14, "\"horizon\": 0.0");
        write_file(dir.file("zero.json"), cfg);
        CHECK(run_cli("quantize --config " + dir.file("zero.json") + " --out " +
                      dir.file("o")) == 2);
    }
}

TEST_CASE("price on a stored grid with provenance checking") {
    TempDir dir;
    std::string cfg = kHestonConfig;
    std::string price_cfg = cfg;
    auto pos = price_cfg.find("\"quantize\"");
    price_cfg.replace(pos, 10, "\"price\"");
    price_cfg.insert(price_cfg.rfind('}'),
                     R"(, "options": [
       {"id": "atm", "kind": "european-put", "strike": 100.0},
       {"id": "otm", "kind": "european-call", "strike": 120.0},
       {"id": "uo", "kind": "up-and-out-put", "strike": 100.0, "barrier": 130.0}
     ])");
    write_file(dir.file("q.json"), cfg);
    write_file(dir.file("p.json"), price_cfg);

    REQUIRE(run_cli("quantize --config " + dir.file("q.json") + " --out " +
                    dir.file("g")) == 0);
    REQUIRE(run_cli("price --config " + dir.file("p.json") + " --grid " +
                    dir.file("g") + "/grid.pmqg --out " + dir.file("o")) == 0);
    const auto table = read_file(dir.file("o") + "/prices.csv");
    CHECK(table.find("id,kind,strike,barrier,maturity_step,price") == 0);
    CHECK(table.find("atm,european-put") != std::string::npos);
    CHECK(table.find("uo,up-and-out-put") != std::string::npos);

    SECTION("mismatched model parameters are refused with exit 3") {
        std::string other = price_cfg;
        auto p2 = other.find("\"sigma\": 0.6");
        other.replace(p2, 12, "\"sigma\": 0.7");
        write_file(dir.file("p2.json"), other);
        CHECK(run_cli("price --config " + dir.file("p2.json") + " --grid " +
                      dir.file("g") + "/grid.pmqg --out " + dir.file("o2")) == 3);
    }
    SECTION("empty option list still succeeds with a header-only table") {
        std::string empty = price_cfg;
        auto p3 = empty.find("\"options\"");
        empty = cfg;
        empty.replace(empty.find("\"quantize\""), 10, "\"price\"");
        (void)p3;
        write_file(dir.file("p3.json"), empty);
        REQUIRE(run_cli("price --config " + dir.file("p3.json") + " --out " +
                        dir.file("o3")) == 0);
        const auto t = read_file(dir.file("o3") + "/prices.csv");
        CHECK(t == "id,kind,strike,barrier,maturity_step,price\n");
    }
}

TEST_CASE("compare-mc emits z-scores and respects the seed") {
    TempDir dir;
    std::string cfg = kHestonConfig;
    cfg.replace(cfg.find("\"quantize\""), 10, "\"compare-mc\"");
    cfg.insert(cfg.rfind('}'),
               R"(, "options": [{"id": "atm", "kind": "european-put", "strike": 100.0}],
                  "mc": {"paths": 4000, "steps_per_year": 48, "seed": 11})");
    write_file(dir.file("c.json"), cfg);
    REQUIRE(run_cli("compare-mc --config " + dir.file("c.json") + " --out " +
                    dir.file("a")) == 0);
    REQUIRE(run_cli("compare-mc --config " + dir.file("c.json") + " --out " +
                    dir.file("b")) == 0);
    const auto ta = read_file(dir.file("a") + "/compare_mc.csv");
    CHECK(ta == read_file(dir.file("b") + "/compare_mc.csv"));
    CHECK(ta.find("id,kind,strike,barrier,pmq_price,mc_mean,mc_stderr,z") == 0);

    REQUIRE(run_cli("compare-mc --config " + dir.file("c.json") + " --seed 77 --out " +
                    dir.file("s")) == 0);
    const auto ts = read_file(dir.file("s") + "/compare_mc.csv");
    CHECK(ts != ta); // different MC columns
    // the pmq column is unchanged
    auto pmq_col = [](const std::string& t) {
        const auto line = t.substr(t.find('\n') + 1);
        std::istringstream ls(line);
        std::string cell;
        for (int i = 0; i < 5; ++i) std::getline(ls, cell, ',');
        return cell;
    };
    CHECK(pmq_col(ta) == pmq_col(ts));
}

TEST_CASE("calibrate runs a tiny synthetic calibration") {
    TempDir dir;
    // Quotes generated from the library itself at the init parameters, so a
    // one-evaluation budget already reports a near-zero objective.
    pmq::QuoteSet qs;
    qs.spot = 100.0;
    qs.rate = 0.10;
    for (double k : {95.0, 105.0})
        qs.quotes.push_back({1.0, k, pmq::OptionKind::european_put, 0.2, 1.0});
    pmq::RsveSettings settings;
    settings.codewords = {8, 5};
    settings.steps_override = 4;
    auto bd = pmq::detail::rsve_eval({0.4, 0.9, 0.4, -0.3}, qs, settings, nullptr);
    std::ostringstream quotes;
    quotes << "maturity_years,strike,kind,market_implied_vol,volume\n";
    for (std::size_t i = 0; i < qs.quotes.size(); ++i)
        quotes << "1.0," << qs.quotes[i].strike << ",european-put," << bd.model_vols[i]
               << ",5\n";
    write_file(dir.file("quotes.csv"), quotes.str());

    std::ostringstream cfg;
    cfg << R"({"task": "calibrate", "calibration": {"quote_file": ")"
        << dir.file("quotes.csv")
        << R"(", "spot": 100.0, "rate": 0.10,
             "init": {"y0": 0.4, "beta": 0.9, "nu": 0.4, "rho": -0.3},
             "max_evals": 25, "codewords": [8, 5], "steps": 4}})";
    write_file(dir.file("cal.json"), cfg.str());
    REQUIRE(run_cli("calibrate --config " + dir.file("cal.json") + " --out " +
                    dir.file("o")) == 0);
    const auto report = read_file(dir.file("o") + "/calibration_report.csv");
    CHECK(report.find("key,value") == 0);
    CHECK(report.find("objective,") != std::string::npos);
    CHECK(report.find("beta,0.9") != std::string::npos);

    SECTION("malformed quote rows exit 2") {
        write_file(dir.file("quotes.csv"),
                   "h\n1.0,100,european-put,0.2\n"); // missing volume column
        CHECK(run_cli("calibrate --config " + dir.file("cal.json") + " --out " +
                      dir.file("o2")) == 2);
    }
}
