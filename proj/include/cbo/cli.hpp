#pragma once

#include <map>
#include <string>
#include <vector>

#include "cbo/cbo.hpp"

namespace cbo::cli {

// Flat key/value config with bracketed [sections]; unknown keys are rejected,
// missing keys fall back to defaults with a logged notice.
struct RunConfigFile {
    CboConfig config;
    std::string scenario_name;               // bundled name, or custom label
    std::string graph_path, sem_path, estimands_path;  // custom scenario slot
    std::string custom_es_path;
    std::string output_dir = "out";
    std::string source_text;                 // canonical text used for hashing
};

RunConfigFile parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfigFile parse_config_file(const std::string& path);

std::string config_hash(const RunConfigFile& cfg);

// Stable CSV rendering: header plus one row per iteration, doubles printed
// with round-trip precision.
std::string trace_to_csv(const std::vector<TraceRow>& trace, const std::string& hash,
                         std::uint64_t seed);

std::vector<TraceRow> parse_trace_csv(const std::string& text);

// Subcommand entry point; argv-style arguments without the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace cbo::cli
