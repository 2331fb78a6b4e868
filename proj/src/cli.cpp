#include "cbo/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbo/rng.hpp"

namespace cbo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

int log_level() {
    static int level = [] {
        const char* env = std::getenv("CBO_LOG");
        if (!env) return 1;
        std::string v(env);
        if (v == "debug") return 2;
        if (v == "info") return 1;
        return 0;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[cbo] " << msg << "\n";
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::pair<double, double> parse_interval(const std::string& text, const std::string& key) {
    std::string t = trim(text);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
        raise(ErrorKind::ConfigError, key + ": expected [lo, hi]");
    }
    auto parts = split(t.substr(1, t.size() - 2), ',');
    if (parts.size() != 2) raise(ErrorKind::ConfigError, key + ": expected two bounds");
    try {
        double lo = std::stod(parts[0]);
        double hi = std::stod(parts[1]);
        if (lo >= hi) raise(ErrorKind::ConfigError, key + ": lo must be < hi");
        return {lo, hi};
    } catch (const CboError&) {
        throw;
    } catch (const std::exception&) {
        raise(ErrorKind::ConfigError, key + ": bad bound");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    raise(ErrorKind::ConfigError, key + ": expected true|false");
}

ExplorationSetKind parse_es_kind(const std::string& v, std::string* custom_path) {
    if (v == "mis") return ExplorationSetKind::Mis;
    if (v == "pomis") return ExplorationSetKind::Pomis;
    if (v == "bo") return ExplorationSetKind::Bo;
    if (v.rfind("custom:", 0) == 0) {
        if (custom_path) *custom_path = v.substr(7);
        return ExplorationSetKind::Custom;
    }
    raise(ErrorKind::ConfigError, "es: expected mis|pomis|bo|custom:<file>");
}

NodeSet parse_set_text(const std::string& text) {
    std::string t = trim(text);
    if (!t.empty() && t.front() == '{' && t.back() == '}') t = t.substr(1, t.size() - 2);
    NodeSet set;
    for (const auto& part : split(t, ',')) {
        if (!part.empty()) set.insert(part);
    }
    return set;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::IoError, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

RunConfigFile parse_config_text(const std::string& text, const std::string& origin) {
    RunConfigFile out;
    out.source_text = text;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    std::vector<std::string> provided;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            if (section != "scenario" && section != "cbo" && section != "domains" &&
                section != "cost" && section != "output") {
                raise(ErrorKind::ConfigError,
                      origin + ":" + std::to_string(lineno) + ": unknown section [" + section + "]");
            }
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            raise(ErrorKind::ConfigError,
                  origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        provided.push_back(section + "." + key);
        CboConfig& c = out.config;
        if (section == "scenario") {
            if (key == "name") out.scenario_name = value;
            else if (key == "graph") out.graph_path = value;
            else if (key == "sem") out.sem_path = value;
            else if (key == "estimands") out.estimands_path = value;
            else raise(ErrorKind::ConfigError, origin + ": unknown key scenario." + key);
        } else if (section == "cbo") {
            try {
                if (key == "T") c.steps = std::stoul(value);
                else if (key == "N") c.n_initial = std::stoul(value);
                else if (key == "N_max") c.n_max = std::stoul(value);
                else if (key == "P") c.p_initial = std::stoul(value);
                else if (key == "seed") c.seed = std::stoull(value);
                else if (key == "batch") c.batch = std::stoul(value);
                else if (key == "eval_samples") c.eval_samples = std::stoul(value);
                else if (key == "acq_budget") c.acq_budget = std::stoul(value);
                else if (key == "gp_fit") c.fit_gp = parse_bool(value, key);
                else if (key == "gp_lengthscale") c.gp_lengthscale = std::stod(value);
                else if (key == "gp_variance") c.gp_variance = std::stod(value);
                else if (key == "gp_noise") c.gp_noise = std::stod(value);
                else if (key == "direction") {
                    if (value == "min") c.direction = Direction::Min;
                    else if (value == "max") c.direction = Direction::Max;
                    else raise(ErrorKind::ConfigError, "direction: expected min|max");
                } else if (key == "prior") {
                    if (value == "causal") c.prior = PriorKind::Causal;
                    else if (value == "standard") c.prior = PriorKind::StandardZeroMean;
                    else raise(ErrorKind::ConfigError, "prior: expected causal|standard");
                } else if (key == "es") {
                    c.es_kind = parse_es_kind(value, &out.custom_es_path);
                } else if (key == "epsilon") {
                    if (value == "auto") c.fixed_epsilon.reset();
                    else c.fixed_epsilon = std::stod(value);
                } else {
                    raise(ErrorKind::ConfigError, origin + ": unknown key cbo." + key);
                }
            } catch (const CboError&) {
                throw;
            } catch (const std::exception&) {
                raise(ErrorKind::ConfigError, origin + ": bad value for cbo." + key);
            }
        } else if (section == "domains") {
            c.domain_overrides[key] = parse_interval(value, "domains." + key);
        } else if (section == "cost") {
            if (key == "preset") {
                c.cost_preset = value;
            } else {
                auto dot = key.find('.');
                if (dot == std::string::npos) {
                    raise(ErrorKind::ConfigError, origin + ": cost keys are preset or <node>.fixed/<node>.variable");
                }
                std::string node = key.substr(0, dot);
                std::string field = key.substr(dot + 1);
                CostEntry entry = c.cost_overrides.count(node) ? c.cost_overrides[node] : CostEntry{};
                if (field == "fixed") {
                    entry.fixed = std::stod(value);
                } else if (field == "variable") {
                    entry.variable = parse_bool(value, key);
                } else {
                    raise(ErrorKind::ConfigError, origin + ": unknown cost field '" + field + "'");
                }
                c.cost_overrides[node] = entry;
            }
        } else if (section == "output") {
            if (key == "dir") out.output_dir = value;
            else raise(ErrorKind::ConfigError, origin + ": unknown key output." + key);
        } else {
            raise(ErrorKind::ConfigError,
                  origin + ":" + std::to_string(lineno) + ": key outside any section");
        }
    }
    if (out.scenario_name.empty() && out.graph_path.empty()) {
        raise(ErrorKind::ConfigError, origin + ": [scenario] needs name or graph/sem files");
    }
    if (!out.graph_path.empty() || !out.sem_path.empty()) {
        if (out.graph_path.empty() || out.sem_path.empty()) {
            raise(ErrorKind::ConfigError, origin + ": custom scenarios need both graph and sem");
        }
        if (out.scenario_name.empty()) out.scenario_name = "custom";
    }
    out.config.scenario = out.scenario_name;
    // Defaults notice for the keys people forget most.
    const char* notable[] = {"cbo.T", "cbo.N", "cbo.seed", "cbo.es", "cbo.prior"};
    for (const char* key : notable) {
        if (std::find(provided.begin(), provided.end(), key) == provided.end()) {
            log_info(std::string("config ") + origin + ": " + key + " not set, using default");
        }
    }
    return out;
}

RunConfigFile parse_config_file(const std::string& path) {
    return parse_config_text(read_file(path), path);
}

std::string config_hash(const RunConfigFile& cfg) {
    std::uint64_t h = hash_tag(cfg.source_text + "|" + kVersion);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace, const std::string& hash,
                         std::uint64_t seed) {
    std::ostringstream out;
    out << "# config=" << hash << " seed=" << seed << "\n";
    out << "t,action,epsilon,set,values,step_cost,cum_cost,y_hat,best,wall_ms\n";
    for (const auto& row : trace) {
        out << row.t << "," << row.action << "," << fmt_double(row.epsilon) << "," << row.set << ",";
        for (std::size_t i = 0; i < row.values.size(); ++i) {
            if (i) out << ";";
            out << fmt_double(row.values[i]);
        }
        out << "," << fmt_double(row.step_cost) << "," << fmt_double(row.cum_cost) << ",";
        if (row.y_hat) out << fmt_double(*row.y_hat);
        out << ",";
        if (row.best) out << fmt_double(*row.best);
        out << "," << row.wall_ms << "\n";
    }
    return out.str();
}

std::vector<TraceRow> parse_trace_csv(const std::string& text) {
    std::vector<TraceRow> rows;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // column header
            continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != 10) raise(ErrorKind::IoError, "bad trace row: " + line);
        TraceRow row;
        row.t = std::stoul(fields[0]);
        row.action = fields[1];
        row.epsilon = std::stod(fields[2]);
        row.set = fields[3];
        if (!fields[4].empty()) {
            for (const auto& v : split(fields[4], ';')) row.values.push_back(std::stod(v));
        }
        row.step_cost = std::stod(fields[5]);
        row.cum_cost = std::stod(fields[6]);
        if (!fields[7].empty()) row.y_hat = std::stod(fields[7]);
        if (!fields[8].empty()) row.best = std::stod(fields[8]);
        row.wall_ms = std::stoll(fields[9]);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

Scenario load_custom(const RunConfigFile& cfg) {
    std::string estimands = cfg.estimands_path.empty() ? "" : read_file(cfg.estimands_path);
    return load_scenario_files(cfg.scenario_name, read_file(cfg.graph_path),
                               read_file(cfg.sem_path), estimands);
}

std::vector<NodeSet> load_custom_es(const std::string& path) {
    std::vector<NodeSet> sets;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        sets.push_back(parse_set_text(line));
    }
    if (sets.empty()) raise(ErrorKind::ConfigError, "custom exploration set file is empty");
    return sets;
}

json summary_json(const RunConfigFile& cfg, const RunOutput& out, std::uint64_t seed) {
    json j;
    j["artifact"] = "cbo";
    j["version"] = kVersion;
    j["config_hash"] = config_hash(cfg);
    j["scenario"] = cfg.scenario_name;
    j["seed"] = seed;
    j["direction"] = cfg.config.direction == Direction::Min ? "min" : "max";
    j["prior"] = cfg.config.prior == PriorKind::Causal ? "causal" : "standard";
    json result;
    result["set"] = std::vector<std::string>(out.result.best_set.begin(), out.result.best_set.end());
    result["values"] = out.result.best_values;
    result["y"] = out.result.best_value;
    j["result"] = result;
    j["cumulative_cost"] = out.state.cumulative_cost;
    j["interventions"] = out.state.interventions;
    j["iterations"] = out.state.iteration;
    j["n_observational"] = out.state.observations->rows;
    json arms = json::array();
    for (const auto& arm : out.state.arms) {
        json a;
        a["set"] = arm.key;
        a["points"] = arm.gp.size();
        a["lengthscale"] = arm.gp.kernel().lengthscale;
        a["variance"] = arm.gp.kernel().variance;
        a["noise"] = arm.gp.noise_variance();
        a["causal_prior"] = arm.causal_prior;
        arms.push_back(a);
    }
    j["arms"] = arms;
    j["warnings"] = out.state.warnings;
    j["trace_file"] = "trace.csv";
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoError, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) raise(ErrorKind::IoError, "short write to '" + path.string() + "'");
}

int exit_code_for(const CboError& err) {
    switch (err.kind()) {
        case ErrorKind::NoEstimand: return 4;
        case ErrorKind::IoError: return 3;
        case ErrorKind::ConfigError: return 2;
        default: return 1;
    }
}

const char* kPlotStub = R"(#!/usr/bin/env python3
"""Plot best-so-far vs cumulative cost from a sweep aggregate.csv."""
import csv
import sys

try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required: pip install matplotlib")

path = sys.argv[1] if len(sys.argv) > 1 else "aggregate.csv"
cost, mean, se = [], [], []
with open(path) as fh:
    for row in csv.DictReader(r for r in fh if not r.startswith("#")):
        cost.append(float(row["cost"]))
        mean.append(float(row["mean_best"]))
        se.append(float(row["se_best"]))

lo = [m - s for m, s in zip(mean, se)]
hi = [m + s for m, s in zip(mean, se)]
plt.step(cost, mean, where="post", label="mean best")
plt.fill_between(cost, lo, hi, step="post", alpha=0.3, label="+/- 1 se")
plt.xlabel("cumulative intervention cost")
plt.ylabel("best observed E[Y|do]")
plt.legend()
plt.tight_layout()
out = path.rsplit(".", 1)[0] + ".png"
plt.savefig(out, dpi=150)
print(f"wrote {out}")
)";

struct SeedRun {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    RunOutput output;
};

SeedRun run_one_seed(const RunConfigFile& base, const Scenario& scenario, std::uint64_t seed) {
    SeedRun r;
    r.seed = seed;
    try {
        CboConfig config = base.config;
        config.seed = seed;
        r.output = run(config, scenario);
        r.ok = true;
    } catch (const std::exception& err) {
        r.error = err.what();
    }
    return r;
}

// Best-so-far step functions sampled at the union of cost breakpoints.
std::string aggregate_csv(const std::vector<SeedRun>& runs, const std::string& hash) {
    std::vector<double> levels{0.0};
    for (const auto& r : runs) {
        if (!r.ok) continue;
        for (const auto& row : r.output.state.trace) levels.push_back(row.cum_cost);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    std::ostringstream out;
    out << "# config=" << hash << " aggregate over seeds:";
    for (const auto& r : runs) {
        if (r.ok) out << " " << r.seed;
    }
    out << "\n";
    out << "cost,mean_best,se_best,n_runs\n";
    for (double level : levels) {
        std::vector<double> bests;
        for (const auto& r : runs) {
            if (!r.ok) continue;
            // Best value achieved at cumulative cost <= level.
            std::optional<double> best;
            for (const auto& row : r.output.state.trace) {
                if (row.cum_cost <= level && row.best) best = *row.best;
            }
            if (best) bests.push_back(*best);
        }
        if (bests.empty()) continue;
        double mean = 0.0;
        for (double b : bests) mean += b;
        mean /= static_cast<double>(bests.size());
        double ss = 0.0;
        for (double b : bests) ss += (b - mean) * (b - mean);
        double se = bests.size() > 1
                        ? std::sqrt(ss / static_cast<double>(bests.size() - 1) /
                                    static_cast<double>(bests.size()))
                        : 0.0;
        out << fmt_double(level) << "," << fmt_double(mean) << "," << fmt_double(se) << ","
            << bests.size() << "\n";
    }
    return out.str();
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            const std::string& output_override, const std::string& es_override,
            const std::string& prior_override, bool wall) {
    RunConfigFile cfg = parse_config_file(config_path);
    if (seed_override) cfg.config.seed = *seed_override;
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (!es_override.empty()) cfg.config.es_kind = parse_es_kind(es_override, &cfg.custom_es_path);
    if (!prior_override.empty()) {
        cfg.config.prior = prior_override == "standard" ? PriorKind::StandardZeroMean : PriorKind::Causal;
    }
    cfg.config.measure_wall = wall;
    if (!cfg.custom_es_path.empty()) cfg.config.custom_es = load_custom_es(cfg.custom_es_path);

    std::optional<Scenario> custom;
    if (!cfg.graph_path.empty()) {
        custom = load_custom(cfg);
    } else if (!has_scenario(cfg.scenario_name)) {
        std::cerr << "error: unknown scenario '" << cfg.scenario_name << "'\n";
        return 2;
    }
    const Scenario& scenario = custom ? *custom : get_scenario(cfg.scenario_name);

    fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    {  // probe writability before the long run
        std::ofstream probe(dir / ".write_probe");
        if (!probe) {
            std::cerr << "error: output directory '" << dir.string() << "' is not writable\n";
            return 3;
        }
        probe.close();
        fs::remove(dir / ".write_probe", ec);
    }

    log_info("running scenario '" + cfg.scenario_name + "' seed " + std::to_string(cfg.config.seed));
    RunOutput out = run(cfg.config, scenario);

    write_text(dir / "trace.csv", trace_to_csv(out.state.trace, config_hash(cfg), cfg.config.seed));
    write_text(dir / "summary.json", summary_json(cfg, out, cfg.config.seed).dump(2) + "\n");

    std::cout << "result: set=" << format_node_set(out.result.best_set) << " values=(";
    for (std::size_t i = 0; i < out.result.best_values.size(); ++i) {
        if (i) std::cout << ",";
        std::cout << out.result.best_values[i];
    }
    std::cout << ") y=" << out.result.best_value << " cost=" << out.state.cumulative_cost
              << " interventions=" << out.state.interventions << "\n";
    for (const auto& w : out.state.warnings) log_info("warning: " + w);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
              const std::string& output_override, std::size_t jobs) {
    if (seeds.empty()) {
        std::cerr << "error: sweep needs at least one seed\n";
        return 2;
    }
    std::vector<std::uint64_t> sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        std::cerr << "error: duplicate seeds rejected\n";
        return 2;
    }
    RunConfigFile cfg = parse_config_file(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (!cfg.custom_es_path.empty()) cfg.config.custom_es = load_custom_es(cfg.custom_es_path);
    std::optional<Scenario> custom;
    if (!cfg.graph_path.empty()) {
        custom = load_custom(cfg);
    } else if (!has_scenario(cfg.scenario_name)) {
        std::cerr << "error: unknown scenario '" << cfg.scenario_name << "'\n";
        return 2;
    }
    const Scenario& scenario = custom ? *custom : get_scenario(cfg.scenario_name);

    fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);

    if (jobs == 0) jobs = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    std::vector<SeedRun> runs(seeds.size());
    for (std::size_t start = 0; start < seeds.size(); start += jobs) {
        std::size_t end = std::min(seeds.size(), start + jobs);
        std::vector<std::future<SeedRun>> futures;
        for (std::size_t i = start; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, run_one_seed, std::cref(cfg),
                                         std::cref(scenario), seeds[i]));
        }
        for (std::size_t i = start; i < end; ++i) runs[i] = futures[i - start].get();
    }

    int failures = 0;
    std::string hash = config_hash(cfg);
    for (const auto& r : runs) {
        fs::path seed_dir = dir / ("seed_" + std::to_string(r.seed));
        fs::create_directories(seed_dir, ec);
        if (!r.ok) {
            ++failures;
            std::cerr << "seed " << r.seed << " failed: " << r.error << "\n";
            write_text(seed_dir / "error.txt", r.error + "\n");
            continue;
        }
        write_text(seed_dir / "trace.csv", trace_to_csv(r.output.state.trace, hash, r.seed));
        write_text(seed_dir / "summary.json", summary_json(cfg, r.output, r.seed).dump(2) + "\n");
    }
    write_text(dir / "aggregate.csv", aggregate_csv(runs, hash));
    write_text(dir / "plot_aggregate.py", kPlotStub);
    std::cout << "sweep: " << (runs.size() - static_cast<std::size_t>(failures)) << "/"
              << runs.size() << " seeds completed; aggregate written to "
              << (dir / "aggregate.csv").string() << "\n";
    return failures == 0 ? 0 : 1;
}

int cmd_enumerate_sets(const std::string& graph_path, const std::string& scenario_name,
                       const std::string& kind) {
    CausalGraph graph;
    std::string registry_key;
    if (!scenario_name.empty()) {
        if (!has_scenario(scenario_name)) {
            std::cerr << "error: unknown scenario '" << scenario_name << "'\n";
            return 2;
        }
        graph = get_scenario(scenario_name).graph;
        registry_key = scenario_name;
    } else if (!graph_path.empty()) {
        graph = parse_graph(read_file(graph_path));
        registry_key = graph_path;
    } else {
        std::cerr << "error: provide --graph or --scenario\n";
        return 2;
    }
    std::string custom_path;
    ExplorationSetKind k = parse_es_kind(kind, &custom_path);
    std::vector<NodeSet> custom;
    if (k == ExplorationSetKind::Custom) custom = load_custom_es(custom_path);
    auto sets = exploration_set(graph, k, bundled_pomis_registry(), registry_key, custom);
    for (const auto& s : sets) std::cout << format_node_set(s) << "\n";
    return 0;
}

int cmd_estimate(const std::string& scenario_name, const std::string& set_text,
                 const std::string& values_text, std::size_t n, std::uint64_t seed,
                 bool with_oracle, std::size_t oracle_n) {
    if (!has_scenario(scenario_name)) {
        std::cerr << "error: unknown scenario '" << scenario_name << "'\n";
        return 2;
    }
    const Scenario& scenario = get_scenario(scenario_name);
    NodeSet set = parse_set_text(set_text);
    std::vector<double> values;
    if (!trim(values_text).empty()) {
        for (const auto& v : split(values_text, ',')) values.push_back(std::stod(v));
    }
    if (values.size() != set.size()) {
        std::cerr << "error: " << set.size() << " node(s) but " << values.size() << " value(s)\n";
        return 2;
    }
    std::map<NodeId, double> assignment;
    std::size_t i = 0;
    for (const auto& node : set) assignment[node] = values[i++];
    for (const auto& [node, value] : assignment) {
        auto dom = scenario.sem.domains.find(node);
        if (dom != scenario.sem.domains.end() &&
            (value < dom->second.first || value > dom->second.second)) {
            std::cerr << "error: DomainViolation: " << node << "=" << value
                      << " outside [" << dom->second.first << ", " << dom->second.second << "]\n";
            return 2;
        }
    }

    auto data = std::make_shared<Dataset>(
        sample_observational(scenario.sem, n, derive_seed(seed, "estimate")));
    DoEffectSurface surface = build_surface(scenario.estimands, data, set, derive_seed(seed, "plan"));
    SurfaceValue sv = surface.query(values);

    // Note shared estimands (e.g. a superset plan collapsing to a subset).
    PlanPtr plan = scenario.estimands.find(set);
    for (const auto& [key, other] : scenario.estimands.plans) {
        if (other == plan && key != format_node_set(set)) {
            std::cout << "note: estimand shared with " << key << "\n";
        }
    }
    std::cout << "estimate: E[" << scenario.graph.target() << "|do" << format_node_set(set)
              << "] = " << sv.mean << "  V = " << sv.variance << "  (N=" << n << ")\n";
    if (with_oracle) {
        Intervention iv{assignment};
        OracleEstimate oracle = oracle_mean(scenario.sem, iv, oracle_n, derive_seed(seed, "oracle"));
        std::cout << "oracle:   E[" << scenario.graph.target() << "|do" << format_node_set(set)
                  << "] = " << oracle.mean << " +/- " << oracle.stderr_ << "  (n=" << oracle_n
                  << ")\n";
    }
    return 0;
}

int cmd_oracle(const std::string& scenario_name, const std::string& set_text,
               const std::string& values_text, std::size_t n, std::uint64_t seed) {
    if (!has_scenario(scenario_name)) {
        std::cerr << "error: unknown scenario '" << scenario_name << "'\n";
        return 2;
    }
    const Scenario& scenario = get_scenario(scenario_name);
    NodeSet set = parse_set_text(set_text);
    std::vector<double> values;
    if (!trim(values_text).empty()) {
        for (const auto& v : split(values_text, ',')) values.push_back(std::stod(v));
    }
    if (values.size() != set.size()) {
        std::cerr << "error: " << set.size() << " node(s) but " << values.size() << " value(s)\n";
        return 2;
    }
    Intervention iv;
    std::size_t i = 0;
    for (const auto& node : set) iv.assignments[node] = values[i++];
    OracleEstimate est = oracle_mean(scenario.sem, iv, n, seed);
    std::cout << "oracle: E[" << scenario.graph.target() << "|do" << format_node_set(set)
              << "] = " << est.mean << " +/- " << est.stderr_ << "  (n=" << n << ")\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Causal Bayesian optimization over structural causal models"};
    app.require_subcommand(1);

    std::string config_path, output_dir, es_override, prior_override;
    std::uint64_t seed = 0;
    bool seed_set = false, wall = false;

    auto* run_cmd = app.add_subcommand("run", "Execute one optimization run");
    run_cmd->add_option("--config", config_path, "Run configuration file")->required();
    run_cmd->add_option("--seed", seed, "Override the config seed")->each([&](const std::string&) {
        seed_set = true;
    });
    run_cmd->add_option("--output", output_dir, "Override the output directory");
    run_cmd->add_option("--es", es_override, "Exploration set: mis|pomis|bo|custom:<file>");
    run_cmd->add_option("--prior", prior_override, "Prior: causal|standard");
    run_cmd->add_flag("--wall", wall, "Record wall-clock times in the trace (breaks byte-stable reruns)");

    std::vector<std::uint64_t> seeds;
    std::size_t jobs = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run several seeds and aggregate");
    sweep_cmd->add_option("--config", config_path, "Run configuration file")->required();
    sweep_cmd->add_option("--seeds", seeds, "Seeds to run")->required()->delimiter(',');
    sweep_cmd->add_option("--output", output_dir, "Override the output directory");
    sweep_cmd->add_option("--jobs", jobs, "Concurrent runs (default: hardware)");

    std::string graph_path, scenario_name, kind = "mis";
    auto* enum_cmd = app.add_subcommand("enumerate-sets", "Print exploration sets");
    enum_cmd->add_option("--graph", graph_path, "Graph file");
    enum_cmd->add_option("--scenario", scenario_name, "Bundled scenario name");
    enum_cmd->add_option("--kind", kind, "mis|pomis|bo|custom:<file>");

    std::string set_text, values_text;
    std::size_t n = 1000, oracle_n = 100000;
    bool with_oracle = false;
    auto* est_cmd = app.add_subcommand("estimate", "Do-calculus estimate from observational data");
    est_cmd->add_option("--scenario", scenario_name, "Bundled scenario")->required();
    est_cmd->add_option("--set", set_text, "Intervention set, e.g. {B,D}")->required();
    est_cmd->add_option("--values", values_text, "Comma-separated values");
    est_cmd->add_option("--n", n, "Observational sample size");
    est_cmd->add_option("--seed", seed, "Sampling seed");
    est_cmd->add_flag("--oracle", with_oracle, "Also print the simulator oracle");
    est_cmd->add_option("--oracle-n", oracle_n, "Oracle Monte Carlo size");

    auto* oracle_cmd = app.add_subcommand("oracle", "Ground-truth interventional mean");
    oracle_cmd->add_option("--scenario", scenario_name, "Bundled scenario")->required();
    oracle_cmd->add_option("--set", set_text, "Intervention set");
    oracle_cmd->add_option("--values", values_text, "Comma-separated values");
    oracle_cmd->add_option("--n", oracle_n, "Monte Carlo sample size");
    oracle_cmd->add_option("--seed", seed, "Sampling seed");

    std::vector<const char*> argv;
    argv.push_back("cbo");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run_cmd->parsed()) {
            return cmd_run(config_path, seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
                           output_dir, es_override, prior_override, wall);
        }
        if (sweep_cmd->parsed()) return cmd_sweep(config_path, seeds, output_dir, jobs);
        if (enum_cmd->parsed()) return cmd_enumerate_sets(graph_path, scenario_name, kind);
        if (est_cmd->parsed()) {
            return cmd_estimate(scenario_name, set_text, values_text, n, seed, with_oracle, oracle_n);
        }
        if (oracle_cmd->parsed()) return cmd_oracle(scenario_name, set_text, values_text, oracle_n, seed);
    } catch (const CboError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_code_for(err);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace cbo::cli
