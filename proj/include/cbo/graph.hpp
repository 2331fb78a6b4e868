#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cbo/errors.hpp"

namespace cbo {

using NodeId = std::string;
using NodeSet = std::set<NodeId>;

enum class Role { Treatment, NonManipulative, Target };

// Acyclic directed mixed graph: directed edges plus bidirected edges standing
// for unobserved confounders. Immutable once validated; all operations below
// are pure.
struct CausalGraph {
    std::vector<NodeId> nodes;                          // insertion order kept for output
    std::set<std::pair<NodeId, NodeId>> directed;       // (from, to)
    std::set<std::pair<NodeId, NodeId>> bidirected;     // stored with first < second
    std::map<NodeId, Role> roles;

    bool has_node(const NodeId& n) const { return roles.count(n) > 0; }
    NodeId target() const;
    std::vector<NodeId> treatments() const;             // sorted
    std::vector<NodeId> parents(const NodeId& n) const; // sorted
};

enum class ExplorationSetKind { Mis, Pomis, Bo, Custom };

// POMIS lists are published per scenario rather than computed; the registry
// maps a scenario key to its verified list.
using PomisRegistry = std::map<std::string, std::vector<NodeSet>>;

// Throws CboError (CycleDetected, NoTarget, MultipleTargets, RoleConflict)
// naming the offending nodes when an invariant fails.
void validate(const CausalGraph& graph);

// All nodes with a directed path into `node`, excluding `node` itself.
NodeSet ancestors(const CausalGraph& graph, const NodeId& node);

// do-semantics edge surgery: removes directed edges into each cut node and
// bidirected edges incident to it.
CausalGraph mutilate(const CausalGraph& graph, const NodeSet& cut);

// Minimal intervention sets via the graphical criterion: Xs is kept iff every
// member is still an ancestor of the target once edges into Xs are removed.
// Ordered by size, then lexicographically.
std::vector<NodeSet> enumerate_mis(const CausalGraph& graph);

std::vector<NodeSet> exploration_set(const CausalGraph& graph, ExplorationSetKind kind,
                                     const PomisRegistry& registry, const std::string& scenario_key,
                                     const std::vector<NodeSet>& custom = {});

// |Pa(target)| over directed edges.
std::size_t causal_dimension(const CausalGraph& graph);

// Line-oriented text format:
//   node <name> [treatment|context|target]
//   edge <a> -> <b>
//   confounder <a> <-> <b>
// '#' starts a comment. Errors carry 1-based line numbers.
CausalGraph parse_graph(const std::string& text);
std::string format_graph(const CausalGraph& graph);

// Canonical "{A,B}" rendering used in traces, registries and set lookups.
std::string format_node_set(const NodeSet& set);

}  // namespace cbo
