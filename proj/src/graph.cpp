#include "cbo/graph.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace cbo {

NodeId CausalGraph::target() const {
    for (const auto& [n, r] : roles) {
        if (r == Role::Target) return n;
    }
    raise(ErrorKind::NoTarget, "graph has no target node");
}

std::vector<NodeId> CausalGraph::treatments() const {
    std::vector<NodeId> out;
    for (const auto& [n, r] : roles) {
        if (r == Role::Treatment) out.push_back(n);
    }
    return out;  // roles map is ordered, so already sorted
}

std::vector<NodeId> CausalGraph::parents(const NodeId& n) const {
    std::vector<NodeId> out;
    for (const auto& [from, to] : directed) {
        if (to == n) out.push_back(from);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

void check_known(const CausalGraph& g, const NodeId& n, const char* where) {
    if (!g.has_node(n)) {
        raise(ErrorKind::UnknownNode, std::string(where) + " references unknown node '" + n + "'");
    }
}

}  // namespace

void validate(const CausalGraph& graph) {
    if (graph.nodes.size() != graph.roles.size()) {
        raise(ErrorKind::RoleConflict, "node list and role map disagree");
    }
    for (const auto& n : graph.nodes) {
        if (!graph.roles.count(n)) {
            raise(ErrorKind::RoleConflict, "node '" + n + "' has no role");
        }
    }
    std::vector<NodeId> targets;
    for (const auto& [n, r] : graph.roles) {
        if (r == Role::Target) targets.push_back(n);
    }
    if (targets.empty()) raise(ErrorKind::NoTarget, "exactly one target required, found none");
    if (targets.size() > 1) {
        std::string names;
        for (const auto& t : targets) names += (names.empty() ? "" : ", ") + t;
        raise(ErrorKind::MultipleTargets, "multiple targets: " + names);
    }
    for (const auto& [a, b] : graph.directed) {
        check_known(graph, a, "directed edge");
        check_known(graph, b, "directed edge");
        if (a == b) raise(ErrorKind::CycleDetected, "self loop on '" + a + "'");
    }
    for (const auto& [a, b] : graph.bidirected) {
        check_known(graph, a, "bidirected edge");
        check_known(graph, b, "bidirected edge");
        if (a == b) raise(ErrorKind::RoleConflict, "bidirected self edge on '" + a + "'");
    }

    // Kahn's algorithm; leftover nodes sit on a directed cycle.
    std::map<NodeId, int> indegree;
    for (const auto& n : graph.nodes) indegree[n] = 0;
    for (const auto& [a, b] : graph.directed) indegree[b]++;
    std::deque<NodeId> ready;
    for (const auto& [n, d] : indegree) {
        if (d == 0) ready.push_back(n);
    }
    std::size_t seen = 0;
    while (!ready.empty()) {
        NodeId n = ready.front();
        ready.pop_front();
        ++seen;
        for (const auto& [a, b] : graph.directed) {
            if (a == n && --indegree[b] == 0) ready.push_back(b);
        }
    }
    if (seen != graph.nodes.size()) {
        std::string cyclic;
        for (const auto& [n, d] : indegree) {
            if (d > 0) cyclic += (cyclic.empty() ? "" : ", ") + n;
        }
        raise(ErrorKind::CycleDetected, "cycle through: " + cyclic);
    }
}

NodeSet ancestors(const CausalGraph& graph, const NodeId& node) {
    check_known(graph, node, "ancestors");
    NodeSet result;
    std::deque<NodeId> frontier{node};
    while (!frontier.empty()) {
        NodeId cur = frontier.front();
        frontier.pop_front();
        for (const auto& [a, b] : graph.directed) {
            if (b == cur && !result.count(a) && a != node) {
                result.insert(a);
                frontier.push_back(a);
            }
        }
    }
    return result;
}

CausalGraph mutilate(const CausalGraph& graph, const NodeSet& cut) {
    for (const auto& n : cut) {
        check_known(graph, n, "mutilate");
        if (graph.roles.at(n) != Role::Treatment) {
            raise(ErrorKind::NonManipulativeCut, "cannot intervene on non-treatment node '" + n + "'");
        }
    }
    CausalGraph out = graph;
    std::erase_if(out.directed, [&](const auto& e) { return cut.count(e.second) > 0; });
    std::erase_if(out.bidirected,
                  [&](const auto& e) { return cut.count(e.first) > 0 || cut.count(e.second) > 0; });
    return out;
}

namespace {

bool set_order(const NodeSet& a, const NodeSet& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

std::vector<NodeSet> enumerate_mis(const CausalGraph& graph) {
    validate(graph);
    const NodeId y = graph.target();
    const std::vector<NodeId> xs = graph.treatments();
    std::vector<NodeSet> result;
    const std::size_t count = std::size_t{1} << xs.size();
    for (std::size_t mask = 0; mask < count; ++mask) {
        NodeSet subset;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (mask & (std::size_t{1} << i)) subset.insert(xs[i]);
        }
        CausalGraph cut = mutilate(graph, subset);
        NodeSet anc = ancestors(cut, y);
        bool keep = true;
        for (const auto& n : subset) {
            if (!anc.count(n)) {
                keep = false;
                break;
            }
        }
        if (keep) result.push_back(std::move(subset));
    }
    std::sort(result.begin(), result.end(), set_order);
    return result;
}

std::vector<NodeSet> exploration_set(const CausalGraph& graph, ExplorationSetKind kind,
                                     const PomisRegistry& registry, const std::string& scenario_key,
                                     const std::vector<NodeSet>& custom) {
    switch (kind) {
        case ExplorationSetKind::Mis:
            return enumerate_mis(graph);
        case ExplorationSetKind::Bo: {
            NodeSet all;
            for (const auto& t : graph.treatments()) all.insert(t);
            return {all};
        }
        case ExplorationSetKind::Pomis: {
            auto it = registry.find(scenario_key);
            if (it == registry.end()) {
                raise(ErrorKind::PomisUnavailable,
                      "no registered POMIS list for '" + scenario_key + "'; supply a custom set");
            }
            return it->second;
        }
        case ExplorationSetKind::Custom: {
            for (const auto& set : custom) {
                for (const auto& n : set) {
                    check_known(graph, n, "custom exploration set");
                    if (graph.roles.at(n) != Role::Treatment) {
                        raise(ErrorKind::NonManipulativeCut,
                              "custom exploration set contains non-treatment node '" + n + "'");
                    }
                }
            }
            auto sorted = custom;
            std::sort(sorted.begin(), sorted.end(), set_order);
            return sorted;
        }
    }
    raise(ErrorKind::ConfigError, "unhandled exploration set kind");
}

std::size_t causal_dimension(const CausalGraph& graph) {
    validate(graph);
    return graph.parents(graph.target()).size();
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

[[noreturn]] void parse_fail(std::size_t lineno, const std::string& what) {
    raise(ErrorKind::SyntaxError, "line " + std::to_string(lineno) + ": " + what);
}

}  // namespace

CausalGraph parse_graph(const std::string& text) {
    CausalGraph g;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        const std::string& kw = tokens[0];
        if (kw == "node") {
            if (tokens.size() != 3) parse_fail(lineno, "expected: node <name> <role>");
            const std::string& name = tokens[1];
            if (name.empty() || name.find_first_of(" \t") != std::string::npos) {
                parse_fail(lineno, "bad node name");
            }
            Role role;
            if (tokens[2] == "treatment") role = Role::Treatment;
            else if (tokens[2] == "context") role = Role::NonManipulative;
            else if (tokens[2] == "target") role = Role::Target;
            else parse_fail(lineno, "role must be treatment|context|target, got '" + tokens[2] + "'");
            if (g.roles.count(name)) parse_fail(lineno, "duplicate node '" + name + "'");
            g.nodes.push_back(name);
            g.roles[name] = role;
        } else if (kw == "edge") {
            if (tokens.size() != 4 || tokens[2] != "->") parse_fail(lineno, "expected: edge <a> -> <b>");
            if (!g.roles.count(tokens[1])) parse_fail(lineno, "unknown node '" + tokens[1] + "'");
            if (!g.roles.count(tokens[3])) parse_fail(lineno, "unknown node '" + tokens[3] + "'");
            g.directed.emplace(tokens[1], tokens[3]);
        } else if (kw == "confounder") {
            if (tokens.size() != 4 || tokens[2] != "<->") {
                parse_fail(lineno, "expected: confounder <a> <-> <b>");
            }
            if (!g.roles.count(tokens[1])) parse_fail(lineno, "unknown node '" + tokens[1] + "'");
            if (!g.roles.count(tokens[3])) parse_fail(lineno, "unknown node '" + tokens[3] + "'");
            auto a = tokens[1], b = tokens[3];
            if (b < a) std::swap(a, b);
            g.bidirected.emplace(a, b);
        } else {
            parse_fail(lineno, "unknown declaration '" + kw + "'");
        }
    }
    validate(g);
    return g;
}

std::string format_graph(const CausalGraph& graph) {
    std::ostringstream out;
    for (const auto& n : graph.nodes) {
        const char* role = "context";
        switch (graph.roles.at(n)) {
            case Role::Treatment: role = "treatment"; break;
            case Role::NonManipulative: role = "context"; break;
            case Role::Target: role = "target"; break;
        }
        out << "node " << n << " " << role << "\n";
    }
    for (const auto& [a, b] : graph.directed) out << "edge " << a << " -> " << b << "\n";
    for (const auto& [a, b] : graph.bidirected) out << "confounder " << a << " <-> " << b << "\n";
    return out.str();
}

std::string format_node_set(const NodeSet& set) {
    std::string out = "{";
    bool first = true;
    for (const auto& n : set) {
        if (!first) out += ",";
        out += n;
        first = false;
    }
    return out + "}";
}

}  // namespace cbo
