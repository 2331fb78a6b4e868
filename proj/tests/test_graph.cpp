#include <doctest.h>

#include "cbo/graph.hpp"
#include "cbo/scenarios.hpp"

using namespace cbo;

namespace {

CausalGraph toy() { return get_scenario("toy").graph; }
CausalGraph synthetic() { return get_scenario("synthetic").graph; }
CausalGraph healthcare() { return get_scenario("healthcare").graph; }

bool has_set(const std::vector<NodeSet>& sets, const NodeSet& s) {
    return std::find(sets.begin(), sets.end(), s) != sets.end();
}

}  // namespace

TEST_CASE("validate accepts the bundled graphs") {
    CHECK_NOTHROW(validate(toy()));
    CHECK_NOTHROW(validate(synthetic()));
    CHECK_NOTHROW(validate(healthcare()));
}

TEST_CASE("validate accepts a single target node") {
    CausalGraph g;
    g.nodes = {"Y"};
    g.roles["Y"] = Role::Target;
    CHECK_NOTHROW(validate(g));
}

TEST_CASE("validate rejects cycles naming the nodes") {
    CausalGraph g;
    g.nodes = {"X", "Z", "Y"};
    g.roles = {{"X", Role::Treatment}, {"Z", Role::Treatment}, {"Y", Role::Target}};
    g.directed = {{"X", "Z"}, {"Z", "X"}};
    try {
        validate(g);
        FAIL("expected CycleDetected");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::CycleDetected);
        CHECK(std::string(e.what()).find("X") != std::string::npos);
        CHECK(std::string(e.what()).find("Z") != std::string::npos);
    }
}

TEST_CASE("validate rejects missing and duplicate targets") {
    CausalGraph g;
    g.nodes = {"A", "B"};
    g.roles = {{"A", Role::Treatment}, {"B", Role::Treatment}};
    CHECK_THROWS_AS(validate(g), CboError);
    g.roles = {{"A", Role::Target}, {"B", Role::Target}};
    try {
        validate(g);
        FAIL("expected MultipleTargets");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::MultipleTargets);
    }
}

TEST_CASE("ancestors walks directed paths only") {
    CausalGraph g = toy();
    CHECK(ancestors(g, "Y") == NodeSet{"X", "Z"});
    CHECK(ancestors(g, "X") == NodeSet{});
    // Synthetic graph: Y's ancestors through B->C->{D,E}, A->E, F->A.
    CHECK(ancestors(synthetic(), "Y") == NodeSet{"A", "B", "C", "D", "E", "F"});
    CHECK_THROWS_AS(ancestors(g, "nope"), CboError);
}

TEST_CASE("mutilate removes inbound edges and incident confounders") {
    CausalGraph g = toy();
    CausalGraph cut = mutilate(g, {"Z"});
    CHECK(cut.directed == std::set<std::pair<NodeId, NodeId>>{{"Z", "Y"}});

    CausalGraph same = mutilate(g, {});
    CHECK(same.directed == g.directed);

    CausalGraph syn = mutilate(synthetic(), {"D", "E"});
    CHECK(!syn.directed.count({"C", "D"}));
    CHECK(!syn.directed.count({"C", "E"}));
    CHECK(!syn.directed.count({"A", "E"}));
    CHECK(syn.directed.count({"D", "Y"}));
    CHECK(syn.directed.count({"E", "Y"}));
    CHECK(syn.directed.count({"B", "C"}));
    // A<->Y survives a cut of {D,E}; it goes when A's partner is cut.
    CHECK(syn.bidirected.count({"A", "Y"}));
    CHECK(mutilate(synthetic(), {"B"}).bidirected == std::set<std::pair<NodeId, NodeId>>{{"A", "Y"}});

    try {
        mutilate(g, {"Y"});
        FAIL("expected NonManipulativeCut");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::NonManipulativeCut);
    }
}

TEST_CASE("mutilate is idempotent") {
    for (const auto& name : {"toy", "synthetic", "healthcare", "yield"}) {
        const CausalGraph& g = get_scenario(name).graph;
        auto treatments = g.treatments();
        NodeSet cut(treatments.begin(), treatments.end());
        CausalGraph once = mutilate(g, cut);
        CausalGraph twice = mutilate(once, cut);
        CHECK(once.directed == twice.directed);
        CHECK(once.bidirected == twice.bidirected);
    }
}

TEST_CASE("toy minimal intervention sets match the published list") {
    auto sets = enumerate_mis(toy());
    CHECK(sets == std::vector<NodeSet>{{}, {"X"}, {"Z"}});
}

TEST_CASE("synthetic minimal intervention sets match the published list") {
    auto sets = enumerate_mis(synthetic());
    std::vector<NodeSet> expected{{}, {"B"}, {"D"}, {"E"}, {"B", "D"}, {"B", "E"}, {"D", "E"}};
    CHECK(sets == expected);
}

TEST_CASE("healthcare minimal intervention sets match the published list") {
    auto sets = enumerate_mis(healthcare());
    std::vector<NodeSet> expected{{}, {"aspirin"}, {"statin"}, {"aspirin", "statin"}};
    CHECK(sets == expected);
}

TEST_CASE("enumerate_mis keeps only sets whose members stay ancestral") {
    for (const auto& name : {"toy", "synthetic", "healthcare", "yield"}) {
        const CausalGraph& g = get_scenario(name).graph;
        auto sets = enumerate_mis(g);
        CHECK(has_set(sets, {}));  // the empty set is always minimal
        for (const auto& s : sets) {
            CausalGraph cut = mutilate(g, s);
            NodeSet anc = ancestors(cut, g.target());
            for (const auto& n : s) CHECK(anc.count(n) == 1);
        }
    }
}

TEST_CASE("full treatment set appears iff all treatments stay ancestral") {
    for (const auto& name : {"toy", "synthetic", "healthcare", "yield"}) {
        const CausalGraph& g = get_scenario(name).graph;
        auto treatments = g.treatments();
        NodeSet all(treatments.begin(), treatments.end());
        CausalGraph cut = mutilate(g, all);
        NodeSet anc = ancestors(cut, g.target());
        bool every = true;
        for (const auto& n : all) every = every && anc.count(n) > 0;
        CHECK(has_set(enumerate_mis(g), all) == every);
    }
}

TEST_CASE("exploration sets: POMIS registry and BO set") {
    auto registry = bundled_pomis_registry();
    CHECK(exploration_set(toy(), ExplorationSetKind::Pomis, registry, "toy") ==
          std::vector<NodeSet>{{"Z"}});
    std::vector<NodeSet> synthetic_pomis{{}, {"B"}, {"D"}, {"E"}, {"B", "D"}, {"D", "E"}};
    CHECK(exploration_set(synthetic(), ExplorationSetKind::Pomis, registry, "synthetic") ==
          synthetic_pomis);
    CHECK(exploration_set(synthetic(), ExplorationSetKind::Bo, registry, "synthetic") ==
          std::vector<NodeSet>{{"B", "D", "E"}});

    try {
        exploration_set(toy(), ExplorationSetKind::Pomis, registry, "unregistered");
        FAIL("expected PomisUnavailable");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::PomisUnavailable);
    }
}

TEST_CASE("POMIS lists are subsets of the MIS lists") {
    for (const auto& name : {"toy", "synthetic", "healthcare"}) {
        const Scenario& s = get_scenario(name);
        auto mis = enumerate_mis(s.graph);
        for (const auto& p : s.pomis) CHECK(has_set(mis, p));
    }
}

TEST_CASE("custom exploration sets must contain treatments only") {
    CHECK(exploration_set(toy(), ExplorationSetKind::Custom, {}, "", {{"Z"}, {"X"}}) ==
          std::vector<NodeSet>{{"X"}, {"Z"}});
    CHECK_THROWS_AS(exploration_set(toy(), ExplorationSetKind::Custom, {}, "", {{"Y"}}), CboError);
}

TEST_CASE("causal dimension counts the target's parents") {
    CHECK(causal_dimension(toy()) == 1);
    CHECK(causal_dimension(synthetic()) == 2);

    // Two long chains into Y: 200 nodes, intrinsic dimensionality 2.
    CausalGraph chains;
    for (int i = 1; i <= 100; ++i) {
        for (const char* prefix : {"X", "Z"}) {
            NodeId n = prefix + std::to_string(i);
            chains.nodes.push_back(n);
            chains.roles[n] = Role::Treatment;
        }
    }
    chains.nodes.push_back("Y");
    chains.roles["Y"] = Role::Target;
    for (int i = 1; i < 100; ++i) {
        chains.directed.emplace("X" + std::to_string(i), "X" + std::to_string(i + 1));
        chains.directed.emplace("Z" + std::to_string(i), "Z" + std::to_string(i + 1));
    }
    chains.directed.emplace("X100", "Y");
    chains.directed.emplace("Z100", "Y");
    CHECK(causal_dimension(chains) == 2);

    CausalGraph lonely;
    lonely.nodes = {"Y"};
    lonely.roles["Y"] = Role::Target;
    CHECK(causal_dimension(lonely) == 0);
}

TEST_CASE("graph text format round-trips and reports line numbers") {
    CausalGraph g = synthetic();
    CausalGraph reparsed = parse_graph(format_graph(g));
    CHECK(reparsed.directed == g.directed);
    CHECK(reparsed.bidirected == g.bidirected);
    CHECK(reparsed.roles == g.roles);

    try {
        parse_graph("node A treatment\nnode Y target\nedge A => Y\n");
        FAIL("expected SyntaxError");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::SyntaxError);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    try {
        parse_graph("node A pilot\n");
        FAIL("expected SyntaxError");
    } catch (const CboError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("node set formatting is canonical") {
    CHECK(format_node_set({}) == "{}");
    CHECK(format_node_set({"B", "D"}) == "{B,D}");
    CHECK(format_node_set({"D", "B"}) == "{B,D}");
}
