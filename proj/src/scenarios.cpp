#include "cbo/scenarios.hpp"

#include <mutex>

namespace cbo {

namespace {

const char* kToyGraph = R"(# three-node chain
node X treatment
node Z treatment
node Y target
edge X -> Z
edge Z -> Y
)";

const char* kToySem = R"(let X = 0 + noise normal(0,1)
let Z = exp(-X) + noise normal(0,1)
let Y = cos(Z) - exp(-Z/20) + noise normal(0,1)
domain X = [-5, 5]
domain Z = [-5, 20]
)";

const char* kToyEstimands = R"(set : mean(Y)
set X : reg(Y | X)
set Z : reg(Y | Z)
)";

const char* kSyntheticGraph = R"(node F context
node A context
node B treatment
node C context
node D treatment
node E treatment
node Y target
edge F -> A
edge B -> C
edge C -> D
edge C -> E
edge A -> E
edge D -> Y
edge E -> Y
confounder A <-> Y
confounder B <-> Y
)";

const char* kSyntheticSem = R"(latent U1 ~ normal(0,1)
latent U2 ~ normal(0,1)
let F = 0 + noise normal(0,1)
let A = pow(F,2) + U1 + noise normal(0,1)
let B = U2 + noise normal(0,1)
let C = exp(-B) + noise normal(0,1)
let D = exp(-C)/10 + noise normal(0,1)
let E = cos(A) + C/10 + noise normal(0,1)
let Y = cos(D) + sin(E) + U1 + U2 + noise normal(0,1)
domain B = [-5, 5]
domain D = [-5, 5]
domain E = [-5, 5]
)";

const char* kSyntheticEstimands = R"(set : mean(Y)
set B : avg(b'~marg(B), c~cond(C|B)) { reg(Y | B=b', C=c) }
set D : avg(c~marg(C)) { reg(Y | C=c, D) }
set E : avg(a~marg(A), c~marg(C)) { reg(Y | A=a, C=c, E) }
set B,D : avg(b'~marg(B), c~cond(C|B)) { reg(Y | B=b', C=c, D) }
set B,E : avg(a~marg(A), b'~marg(B), c~cond(C|B)) { reg(Y | A=a, B=b', C=c, E) }
set D,E : avg(a~marg(A), c~marg(C)) { reg(Y | A=a, C=c, D, E) }
set B,D,E : alias D,E
)";

const char* kHealthcareGraph = R"(node age context
node bmi context
node aspirin treatment
node statin treatment
node cancer context
node Y target
edge age -> bmi
edge age -> aspirin
edge bmi -> aspirin
edge age -> statin
edge bmi -> statin
edge age -> cancer
edge bmi -> cancer
edge aspirin -> cancer
edge statin -> cancer
edge age -> Y
edge bmi -> Y
edge aspirin -> Y
edge statin -> Y
edge cancer -> Y
)";

const char* kHealthcareSem = R"(let age = 0 + noise uniform(55,75)
let bmi = 27.0 - 0.01*age + noise normal(0,0.7)
let aspirin = sigmoid(-8.0 + 0.10*age + 0.03*bmi)
let statin = sigmoid(-13.0 + 0.10*age + 0.20*bmi)
let cancer = sigmoid(2.2 - 0.05*age + 0.01*bmi - 0.04*statin + 0.02*aspirin)
let Y = 6.8 + 0.04*age - 0.15*bmi - 0.60*statin + 0.55*aspirin + 1.00*cancer + noise normal(0,0.4)
domain aspirin = [0, 1]
domain statin = [0, 1]
)";

const char* kHealthcareEstimands = R"(set : mean(Y)
set aspirin : avg((u,v)~marg(age,bmi)) { reg(Y | age=u, bmi=v, aspirin) }
set statin : avg((u,v)~marg(age,bmi)) { reg(Y | age=u, bmi=v, statin) }
set aspirin,statin : avg((u,v)~marg(age,bmi)) { reg(Y | age=u, bmi=v, aspirin, statin) }
)";

// Crop-yield style graph with observed and latent confounding; exercises the
// back-door and front-door estimators.
const char* kYieldGraph = R"(node X treatment
node Z1 context
node Z2 treatment
node Z3 context
node Y target
edge X -> Z2
edge Z1 -> Z2
edge Z2 -> Z3
edge Z2 -> Y
edge Z3 -> Y
edge X -> Y
confounder Z1 <-> Z3
confounder Z1 <-> X
)";

const char* kYieldSem = R"(latent W1 ~ normal(0,1)
latent W2 ~ normal(0,1)
let Z1 = 0.6*W1 + 0.8*W2 + noise normal(0,0.5)
let X = 0.9*W1 + noise normal(0,1)
let Z2 = 0.75*X - 0.5*Z1 + noise normal(0,0.6)
let Z3 = sin(Z2) + 0.55*W2 + noise normal(0,0.5)
let Y = cos(Z2) + 0.3*Z3 + 0.4*X + noise normal(0,0.5)
domain X = [-3, 3]
domain Z2 = [-4, 4]
)";

CostModel unit_costs(const CausalGraph& graph) {
    CostModel model;
    for (const auto& [node, role] : graph.roles) {
        if (role != Role::Target) model.entries[node] = {1.0, false};
    }
    return model;
}

Scenario make_bundled(const std::string& name, const char* graph_text, const char* sem_text,
                      const char* estimands_text) {
    Scenario s;
    s.name = name;
    s.graph = parse_graph(graph_text);
    s.sem = parse_sem(sem_text, s.graph);
    if (estimands_text) s.estimands = parse_estimand_registry(estimands_text, s.graph);
    else s.estimands.target = s.graph.target();
    s.cost_presets["unit"] = unit_costs(s.graph);
    return s;
}

std::map<std::string, Scenario> build_all() {
    std::map<std::string, Scenario> all;

    Scenario toy = make_bundled("toy", kToyGraph, kToySem, kToyEstimands);
    toy.pomis = {{"Z"}};
    all["toy"] = std::move(toy);

    Scenario synthetic = make_bundled("synthetic", kSyntheticGraph, kSyntheticSem, kSyntheticEstimands);
    synthetic.pomis = {{}, {"B"}, {"D"}, {"E"}, {"B", "D"}, {"D", "E"}};
    CostModel fixed;
    fixed.entries["B"] = {10.0, false};
    fixed.entries["D"] = {5.0, false};
    fixed.entries["E"] = {20.0, false};
    fixed.entries["F"] = {3.0, false};
    CostModel variable = fixed;
    for (auto& [node, entry] : variable.entries) entry.variable = true;
    synthetic.cost_presets["fixed"] = std::move(fixed);
    synthetic.cost_presets["variable"] = std::move(variable);
    all["synthetic"] = std::move(synthetic);

    Scenario healthcare = make_bundled("healthcare", kHealthcareGraph, kHealthcareSem, kHealthcareEstimands);
    healthcare.pomis = {{"aspirin", "statin"}};
    all["healthcare"] = std::move(healthcare);

    Scenario yield = make_bundled("yield", kYieldGraph, kYieldSem, nullptr);
    all["yield"] = std::move(yield);
    return all;
}

const std::map<std::string, Scenario>& all_scenarios() {
    static const std::map<std::string, Scenario> scenarios = build_all();
    return scenarios;
}

}  // namespace

Box Scenario::domain_for(const NodeSet& set,
                         const std::map<NodeId, std::pair<double, double>>& overrides) const {
    Box box;
    for (const auto& node : set) {
        auto ov = overrides.find(node);
        if (ov != overrides.end()) {
            box.bounds.push_back(ov->second);
            continue;
        }
        auto it = sem.domains.find(node);
        if (it == sem.domains.end()) {
            raise(ErrorKind::ConfigError, "no interventional domain declared for '" + node + "'");
        }
        box.bounds.push_back(it->second);
    }
    return box;
}

Box Scenario::treatment_domain(const std::map<NodeId, std::pair<double, double>>& overrides) const {
    NodeSet all;
    for (const auto& t : graph.treatments()) all.insert(t);
    return domain_for(all, overrides);
}

std::size_t Scenario::default_n_max(std::size_t n) const {
    if (name == "toy") return 200;
    if (name == "healthcare") return 1000;
    return 2 * n;
}

const CostModel& Scenario::cost_preset(const std::string& id) const {
    auto it = cost_presets.find(id);
    if (it == cost_presets.end()) {
        raise(ErrorKind::ConfigError, "scenario '" + name + "' has no cost preset '" + id + "'");
    }
    return it->second;
}

std::vector<std::string> scenario_names() {
    std::vector<std::string> names;
    for (const auto& [name, s] : all_scenarios()) names.push_back(name);
    return names;
}

bool has_scenario(const std::string& name) { return all_scenarios().count(name) > 0; }

const Scenario& get_scenario(const std::string& name) {
    auto it = all_scenarios().find(name);
    if (it == all_scenarios().end()) {
        raise(ErrorKind::ConfigError, "unknown scenario '" + name + "'");
    }
    return it->second;
}

PomisRegistry bundled_pomis_registry() {
    PomisRegistry registry;
    for (const auto& [name, s] : all_scenarios()) {
        if (!s.pomis.empty()) registry[name] = s.pomis;
    }
    return registry;
}

Scenario load_scenario_files(const std::string& name, const std::string& graph_text,
                             const std::string& sem_text, const std::string& estimands_text) {
    Scenario s;
    s.name = name;
    s.graph = parse_graph(graph_text);
    s.sem = parse_sem(sem_text, s.graph);
    if (!estimands_text.empty()) {
        s.estimands = parse_estimand_registry(estimands_text, s.graph);
    } else {
        s.estimands.target = s.graph.target();
    }
    s.cost_presets["unit"] = unit_costs(s.graph);
    return s;
}

}  // namespace cbo
