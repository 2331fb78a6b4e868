#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbo/expr.hpp"
#include "cbo/graph.hpp"

namespace cbo {

struct NoiseSpec {
    enum class Kind { None, Normal, Uniform };
    Kind kind = Kind::None;
    double a = 0.0;  // mean or lo
    double b = 0.0;  // stddev or hi
};

struct Equation {
    ExprPtr expr;
    NoiseSpec noise;
};

// Structural equation model over a causal graph. Doubles as the data
// generator and as the ground-truth oracle for interventional means.
// Immutable after parse_sem; sampling takes explicit seeds.
struct Sem {
    CausalGraph graph;
    std::map<NodeId, Equation> equations;
    std::map<std::string, NoiseSpec> latents;       // shared exogenous variables
    std::map<NodeId, std::pair<double, double>> domains;  // declared interventional ranges

    std::vector<NodeId> topo_order;                 // canonical: Kahn + lexicographic ties
};

struct Intervention {
    std::map<NodeId, double> assignments;

    bool empty() const { return assignments.empty(); }
};

struct Dataset {
    std::map<NodeId, std::vector<double>> columns;
    std::size_t rows = 0;
    std::optional<Intervention> provenance;  // nullopt = observational
    std::uint64_t seed = 0;

    const std::vector<double>& column(const NodeId& n) const;
    void append(const Dataset& other);
};

// Parses the line-oriented SEM format against a validated graph:
//   let <node> = <expression> [+ noise normal(m,s) | + noise uniform(a,b)]
//   latent <name> ~ normal(m,s) | uniform(a,b)
//   domain <node> = [lo, hi]
// Expression node references must be parents of the declared node.
Sem parse_sem(const std::string& text, const CausalGraph& graph);

Dataset sample_observational(const Sem& sem, std::size_t n, std::uint64_t seed);

// Each intervened node's equation and noise are replaced by the assigned
// constant. Exogenous draws are shared with the observational sampler, so
// do({}) reproduces sample_observational rows for the same seed.
Dataset sample_interventional(const Sem& sem, const Intervention& iv, std::size_t n,
                              std::uint64_t seed);

struct OracleEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

// Monte Carlo estimate of E[target | do(iv)] with its standard error.
OracleEstimate oracle_mean(const Sem& sem, const Intervention& iv, std::size_t n,
                           std::uint64_t seed);

}  // namespace cbo
