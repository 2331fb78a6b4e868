#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "cbo/cli.hpp"

using namespace cbo;
namespace fs = std::filesystem;

namespace {

struct CaptureStdout {
    std::ostringstream buffer;
    std::streambuf* old;
    CaptureStdout() : old(std::cout.rdbuf(buffer.rdbuf())) {}
    ~CaptureStdout() { std::cout.rdbuf(old); }
    std::string text() const { return buffer.str(); }
};

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("cbo_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kTinyToyConfig = R"([scenario]
name = toy
[cbo]
T = 2
N = 60
N_max = 80
P = 2
seed = 3
batch = 10
eval_samples = 500
[output]
dir = OUTDIR
)";

std::string write_config(const fs::path& dir, std::string body) {
    auto pos = body.find("OUTDIR");
    if (pos != std::string::npos) body.replace(pos, 6, (dir / "out").string());
    fs::path cfg = dir / "run.cfg";
    std::ofstream out(cfg);
    out << body;
    out.close();
    return cfg.string();
}

}  // namespace

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
    auto cfg = cli::parse_config_text("[scenario]\nname = toy\n");
    CHECK(cfg.config.steps == 30);
    CHECK(cfg.config.n_initial == 100);
    CHECK(cfg.scenario_name == "toy");
    CHECK(!cfg.config.fixed_epsilon);

    CHECK_THROWS_AS(cli::parse_config_text("[scenario]\nname = toy\n[cbo]\nbanana = 1\n"), CboError);
    CHECK_THROWS_AS(cli::parse_config_text("[weird]\nx = 1\n"), CboError);
    CHECK_THROWS_AS(cli::parse_config_text("[cbo]\nT = 5\n"), CboError);  // no scenario

    auto fixed = cli::parse_config_text("[scenario]\nname = toy\n[cbo]\nepsilon = 0.25\n");
    REQUIRE(fixed.config.fixed_epsilon.has_value());
    CHECK(*fixed.config.fixed_epsilon == doctest::Approx(0.25));

    auto cost = cli::parse_config_text(
        "[scenario]\nname = synthetic\n[cost]\npreset = fixed\nB.fixed = 2.5\nB.variable = true\n");
    CHECK(cost.config.cost_preset == "fixed");
    CHECK(cost.config.cost_overrides.at("B").fixed == doctest::Approx(2.5));
    CHECK(cost.config.cost_overrides.at("B").variable);

    auto dom = cli::parse_config_text("[scenario]\nname = toy\n[domains]\nZ = [-4, 12]\n");
    CHECK(dom.config.domain_overrides.at("Z") == std::pair<double, double>{-4.0, 12.0});
}

TEST_CASE("trace CSV round-trips exactly") {
    std::vector<TraceRow> rows(2);
    rows[0].t = 1;
    rows[0].action = "observe";
    rows[0].epsilon = 0.123456789012345;
    rows[0].cum_cost = 0.0;
    rows[1].t = 2;
    rows[1].action = "intervene";
    rows[1].epsilon = 0.05;
    rows[1].set = "{Z}";
    rows[1].values = {-3.2041592653589793};
    rows[1].step_cost = 1.0;
    rows[1].cum_cost = 1.0;
    rows[1].y_hat = -2.17;
    rows[1].best = -2.17;
    std::string csv = cli::trace_to_csv(rows, "deadbeef", 9);
    auto parsed = cli::parse_trace_csv(csv);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].action == "observe");
    CHECK(!parsed[0].y_hat);
    CHECK(parsed[1].values == rows[1].values);
    CHECK(parsed[1].epsilon == rows[1].epsilon);
    CHECK(*parsed[1].best == *rows[1].best);
    CHECK(cli::trace_to_csv(parsed, "deadbeef", 9) == csv);
}

TEST_CASE("run subcommand writes trace and summary") {
    fs::path dir = fresh_dir("run");
    std::string cfg = write_config(dir, kTinyToyConfig);
    CaptureStdout capture;
    int rc = cli::run_cli({"run", "--config", cfg});
    REQUIRE(rc == 0);
    CHECK(capture.text().find("result: set=") != std::string::npos);

    fs::path trace = dir / "out" / "trace.csv";
    fs::path summary = dir / "out" / "summary.json";
    REQUIRE(fs::exists(trace));
    REQUIRE(fs::exists(summary));

    auto j = nlohmann::json::parse(slurp(summary));
    CHECK(j["scenario"] == "toy");
    CHECK(j["seed"] == 3);
    CHECK(j["interventions"] == 2);
    CHECK(j["result"].contains("set"));

    std::string first = slurp(trace);
    CHECK(first.find("# config=") == 0);
    CHECK(first.find("t,action,epsilon,set,values,step_cost,cum_cost,y_hat,best,wall_ms") !=
          std::string::npos);

    // Re-running the same config reproduces the trace byte for byte.
    CaptureStdout capture2;
    REQUIRE(cli::run_cli({"run", "--config", cfg}) == 0);
    CHECK(slurp(trace) == first);
}

TEST_CASE("unknown scenarios exit with code 2") {
    fs::path dir = fresh_dir("unknown");
    std::string cfg = write_config(dir, "[scenario]\nname = nope\n[output]\ndir = OUTDIR\n");
    CHECK(cli::run_cli({"run", "--config", cfg}) == 2);
}

TEST_CASE("unwritable output directories exit with code 3") {
    fs::path dir = fresh_dir("readonly");
    std::string cfg = write_config(
        dir, "[scenario]\nname = toy\n[cbo]\nT = 1\nN = 50\nP = 1\neval_samples = 200\n[output]\ndir = /proc/cbo_cannot_write\n");
    CHECK(cli::run_cli({"run", "--config", cfg}) == 3);
}

TEST_CASE("enumerate-sets prints one set per line") {
    {
        CaptureStdout capture;
        REQUIRE(cli::run_cli({"enumerate-sets", "--scenario", "toy", "--kind", "mis"}) == 0);
        CHECK(capture.text() == "{}\n{X}\n{Z}\n");
    }
    {
        CaptureStdout capture;
        REQUIRE(cli::run_cli({"enumerate-sets", "--scenario", "synthetic", "--kind", "mis"}) == 0);
        CHECK(capture.text() == "{}\n{B}\n{D}\n{E}\n{B,D}\n{B,E}\n{D,E}\n");
    }
    {
        CaptureStdout capture;
        REQUIRE(cli::run_cli({"enumerate-sets", "--scenario", "synthetic", "--kind", "bo"}) == 0);
        CHECK(capture.text() == "{B,D,E}\n");
    }
    {
        CaptureStdout capture;
        REQUIRE(cli::run_cli({"enumerate-sets", "--scenario", "toy", "--kind", "pomis"}) == 0);
        CHECK(capture.text() == "{Z}\n");
    }
}

TEST_CASE("enumerate-sets parses graph files and reports bad lines") {
    fs::path dir = fresh_dir("graph");
    fs::path gpath = dir / "g.graph";
    {
        std::ofstream out(gpath);
        out << "node A treatment\nnode Y target\nedge A -> Y\n";
    }
    CaptureStdout capture;
    REQUIRE(cli::run_cli({"enumerate-sets", "--graph", gpath.string(), "--kind", "mis"}) == 0);
    CHECK(capture.text() == "{}\n{A}\n");

    {
        std::ofstream out(gpath);
        out << "node A treatment\nnoode Y target\n";
    }
    CHECK(cli::run_cli({"enumerate-sets", "--graph", gpath.string(), "--kind", "mis"}) != 0);
}

TEST_CASE("estimate prints the do-calculus value next to the oracle") {
    CaptureStdout capture;
    int rc = cli::run_cli({"estimate", "--scenario", "toy", "--set", "{Z}", "--values", "0",
                           "--n", "1500", "--seed", "5", "--oracle", "--oracle-n", "40000"});
    REQUIRE(rc == 0);
    std::string text = capture.text();
    CHECK(text.find("estimate:") != std::string::npos);
    CHECK(text.find("oracle:") != std::string::npos);
    // cos(0) - exp(0) = 0 for both columns.
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        auto eq = line.find("= ");
        if (eq == std::string::npos) continue;
        double value = std::stod(line.substr(eq + 2));
        CHECK(std::abs(value) < 0.15);
    }
}

TEST_CASE("estimate notes shared estimands and checks domains") {
    CaptureStdout capture;
    int rc = cli::run_cli({"estimate", "--scenario", "synthetic", "--set", "{B,D,E}", "--values",
                           "0,0,0", "--n", "400", "--seed", "2"});
    REQUIRE(rc == 0);
    CHECK(capture.text().find("estimand shared with {D,E}") != std::string::npos);

    CHECK(cli::run_cli({"estimate", "--scenario", "toy", "--set", "{Z}", "--values", "25"}) == 2);
}

TEST_CASE("oracle subcommand prints a mean with its standard error") {
    CaptureStdout capture;
    REQUIRE(cli::run_cli({"oracle", "--scenario", "toy", "--set", "{Z}", "--values", "3.14159",
                          "--n", "20000", "--seed", "4"}) == 0);
    CHECK(capture.text().find("+/-") != std::string::npos);
}

TEST_CASE("sweep writes per-seed traces and an aggregate") {
    fs::path dir = fresh_dir("sweep");
    std::string cfg = write_config(dir, kTinyToyConfig);
    CaptureStdout capture;
    int rc = cli::run_cli({"sweep", "--config", cfg, "--seeds", "1,2"});
    REQUIRE(rc == 0);
    CHECK(fs::exists(dir / "out" / "seed_1" / "trace.csv"));
    CHECK(fs::exists(dir / "out" / "seed_2" / "trace.csv"));
    CHECK(fs::exists(dir / "out" / "aggregate.csv"));
    CHECK(fs::exists(dir / "out" / "plot_aggregate.py"));

    std::string agg = slurp(dir / "out" / "aggregate.csv");
    CHECK(agg.find("cost,mean_best,se_best,n_runs") != std::string::npos);

    CHECK(cli::run_cli({"sweep", "--config", cfg, "--seeds", "1,1"}) == 2);
}

TEST_CASE("single-seed sweeps aggregate to that seed's trace") {
    fs::path dir = fresh_dir("sweep1");
    std::string cfg = write_config(dir, kTinyToyConfig);
    CaptureStdout capture;
    REQUIRE(cli::run_cli({"sweep", "--config", cfg, "--seeds", "9"}) == 0);
    auto rows = cli::parse_trace_csv(slurp(dir / "out" / "seed_9" / "trace.csv"));
    std::string agg = slurp(dir / "out" / "aggregate.csv");
    // Final aggregate line must equal the single run's final best.
    std::istringstream lines(agg);
    std::string line, last;
    while (std::getline(lines, line)) {
        if (!line.empty() && line[0] != '#' && line[0] != 'c') last = line;
    }
    REQUIRE(!last.empty());
    auto comma1 = last.find(',');
    auto comma2 = last.find(',', comma1 + 1);
    double mean = std::stod(last.substr(comma1 + 1, comma2 - comma1 - 1));
    std::optional<double> final_best;
    for (const auto& r : rows) {
        if (r.best) final_best = r.best;
    }
    REQUIRE(final_best.has_value());
    CHECK(mean == doctest::Approx(*final_best));
    CHECK(last.substr(last.size() - 2) == ",1");  // n_runs column
}
