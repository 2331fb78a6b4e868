#pragma once

#include <map>
#include <string>
#include <vector>

#include "cbo/estimation.hpp"
#include "cbo/gp.hpp"
#include "cbo/policy.hpp"
#include "cbo/scm.hpp"

namespace cbo {

// A bundled (or user-loaded) system: graph, structural equations, declared
// interventional domains, adjustment-formula registry, published POMIS list
// and cost presets.
struct Scenario {
    std::string name;
    CausalGraph graph;
    Sem sem;
    EstimandRegistry estimands;
    std::vector<NodeSet> pomis;                    // empty: not registered
    std::map<std::string, CostModel> cost_presets; // always includes "unit"
    Direction direction = Direction::Min;

    // Sub-box over the sorted nodes of `set`; overrides take precedence over
    // the SEM's declared domains.
    Box domain_for(const NodeSet& set,
                   const std::map<NodeId, std::pair<double, double>>& overrides = {}) const;

    Box treatment_domain(const std::map<NodeId, std::pair<double, double>>& overrides = {}) const;

    std::size_t default_n_max(std::size_t n) const;

    const CostModel& cost_preset(const std::string& id) const;
};

// Bundled scenario names: toy, synthetic, healthcare, yield.
std::vector<std::string> scenario_names();
bool has_scenario(const std::string& name);
const Scenario& get_scenario(const std::string& name);

PomisRegistry bundled_pomis_registry();

// Custom scenario slot: graph and SEM from files, optional estimand registry
// (sets without an entry fall back to a zero-mean prior).
Scenario load_scenario_files(const std::string& name, const std::string& graph_text,
                             const std::string& sem_text, const std::string& estimands_text);

}  // namespace cbo
