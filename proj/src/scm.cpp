#include "cbo/scm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cbo/rng.hpp"

namespace cbo {

const std::vector<double>& Dataset::column(const NodeId& n) const {
    auto it = columns.find(n);
    if (it == columns.end()) raise(ErrorKind::UnknownNode, "dataset has no column '" + n + "'");
    return it->second;
}

void Dataset::append(const Dataset& other) {
    if (rows == 0 && columns.empty()) {
        *this = other;
        return;
    }
    if (columns.size() != other.columns.size()) {
        raise(ErrorKind::DimensionMismatch, "cannot append datasets with different columns");
    }
    for (auto& [name, col] : columns) {
        const auto& src = other.column(name);
        col.insert(col.end(), src.begin(), src.end());
    }
    rows += other.rows;
}

namespace {

// Kahn's algorithm with an ordered ready set, so the order depends on the
// graph alone and not on declaration order.
std::vector<NodeId> canonical_topo_order(const CausalGraph& graph) {
    std::map<NodeId, int> indegree;
    for (const auto& n : graph.nodes) indegree[n] = 0;
    for (const auto& [a, b] : graph.directed) indegree[b]++;
    std::set<NodeId> ready;
    for (const auto& [n, d] : indegree) {
        if (d == 0) ready.insert(n);
    }
    std::vector<NodeId> order;
    while (!ready.empty()) {
        NodeId n = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(n);
        for (const auto& [a, b] : graph.directed) {
            if (a == n && --indegree[b] == 0) ready.insert(b);
        }
    }
    return order;
}

[[noreturn]] void line_fail(std::size_t lineno, const std::string& what) {
    raise(ErrorKind::SyntaxError, "line " + std::to_string(lineno) + ": " + what);
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

NoiseSpec parse_noise_call(const std::string& text, std::size_t lineno) {
    auto open = text.find('(');
    auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        line_fail(lineno, "expected distribution(args)");
    }
    std::string name = trim(text.substr(0, open));
    std::string args = text.substr(open + 1, close - open - 1);
    auto comma = args.find(',');
    if (comma == std::string::npos) line_fail(lineno, "distribution needs two parameters");
    NoiseSpec spec;
    try {
        spec.a = std::stod(trim(args.substr(0, comma)));
        spec.b = std::stod(trim(args.substr(comma + 1)));
    } catch (const std::exception&) {
        line_fail(lineno, "bad distribution parameter");
    }
    if (name == "normal") {
        spec.kind = NoiseSpec::Kind::Normal;
        if (spec.b < 0) line_fail(lineno, "normal stddev must be >= 0");
    } else if (name == "uniform") {
        spec.kind = NoiseSpec::Kind::Uniform;
        if (spec.a > spec.b) line_fail(lineno, "uniform needs lo <= hi");
    } else {
        line_fail(lineno, "unknown distribution '" + name + "'");
    }
    return spec;
}

}  // namespace

Sem parse_sem(const std::string& text, const CausalGraph& graph) {
    validate(graph);
    Sem sem;
    sem.graph = graph;

    // First pass: latent declarations, so the expression parser can classify
    // identifiers.
    std::set<std::string> latent_names;
    {
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.rfind("latent ", 0) != 0) continue;
            auto tilde = line.find('~');
            if (tilde == std::string::npos) line_fail(lineno, "expected: latent <name> ~ <dist>");
            std::string name = trim(line.substr(7, tilde - 7));
            if (name.empty()) line_fail(lineno, "missing latent name");
            if (graph.has_node(name)) line_fail(lineno, "latent '" + name + "' collides with a node");
            sem.latents[name] = parse_noise_call(trim(line.substr(tilde + 1)), lineno);
            latent_names.insert(name);
        }
    }

    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty() || line.rfind("latent ", 0) == 0) continue;
        if (line.rfind("let ", 0) == 0) {
            auto eq = line.find('=');
            if (eq == std::string::npos) line_fail(lineno, "expected: let <node> = <expression>");
            std::string node = trim(line.substr(4, eq - 4));
            if (!graph.has_node(node)) {
                raise(ErrorKind::UnknownNode,
                      "line " + std::to_string(lineno) + ": equation for undeclared node '" + node + "'");
            }
            if (sem.equations.count(node)) line_fail(lineno, "duplicate equation for '" + node + "'");
            std::string rhs = trim(line.substr(eq + 1));

            Equation equation;
            auto noise_pos = rhs.find("+ noise ");
            if (noise_pos == std::string::npos) noise_pos = rhs.find("+noise ");
            if (noise_pos != std::string::npos) {
                std::string noise_text = trim(rhs.substr(rhs.find("noise ", noise_pos) + 6));
                equation.noise = parse_noise_call(noise_text, lineno);
                rhs = trim(rhs.substr(0, noise_pos));
            }
            ExprPtr body;
            try {
                body = parse_expression(rhs, latent_names);
            } catch (const CboError& err) {
                if (err.kind() == ErrorKind::UnknownFunction) throw;
                line_fail(lineno, err.what());
            }
            if (equation.noise.kind != NoiseSpec::Kind::None) {
                auto noise_ref = std::make_shared<Expr>();
                noise_ref->kind = Expr::Kind::NoiseRef;
                auto sum = std::make_shared<Expr>();
                sum->kind = Expr::Kind::Add;
                sum->lhs = body;
                sum->rhs = noise_ref;
                body = sum;
            }
            equation.expr = body;

            auto deps = node_references(*equation.expr);
            auto parents = graph.parents(node);
            for (const auto& dep : deps) {
                if (!graph.has_node(dep)) {
                    raise(ErrorKind::UnknownNode, "line " + std::to_string(lineno) +
                                                      ": expression references undeclared '" + dep + "'");
                }
                if (std::find(parents.begin(), parents.end(), dep) == parents.end()) {
                    raise(ErrorKind::DependencyViolation,
                          "line " + std::to_string(lineno) + ": '" + node + "' references non-parent '" +
                              dep + "'");
                }
            }
            sem.equations[node] = std::move(equation);
        } else if (line.rfind("domain ", 0) == 0) {
            auto eq = line.find('=');
            if (eq == std::string::npos) line_fail(lineno, "expected: domain <node> = [lo, hi]");
            std::string node = trim(line.substr(7, eq - 7));
            if (!graph.has_node(node)) {
                raise(ErrorKind::UnknownNode,
                      "line " + std::to_string(lineno) + ": domain for undeclared node '" + node + "'");
            }
            std::string range = trim(line.substr(eq + 1));
            if (range.size() < 2 || range.front() != '[' || range.back() != ']') {
                line_fail(lineno, "expected: [lo, hi]");
            }
            range = range.substr(1, range.size() - 2);
            auto comma = range.find(',');
            if (comma == std::string::npos) line_fail(lineno, "expected: [lo, hi]");
            double lo, hi;
            try {
                lo = std::stod(trim(range.substr(0, comma)));
                hi = std::stod(trim(range.substr(comma + 1)));
            } catch (const std::exception&) {
                line_fail(lineno, "bad domain bound");
            }
            if (lo >= hi) line_fail(lineno, "domain needs lo < hi");
            sem.domains[node] = {lo, hi};
        } else {
            line_fail(lineno, "unknown declaration '" + line.substr(0, line.find(' ')) + "'");
        }
    }

    for (const auto& n : graph.nodes) {
        if (!sem.equations.count(n)) {
            raise(ErrorKind::SyntaxError, "node '" + n + "' has no equation");
        }
    }
    for (const auto& [node, equation] : sem.equations) {
        for (const auto& lat : latent_references(*equation.expr)) {
            if (!sem.latents.count(lat)) {
                raise(ErrorKind::UnknownNode, "latent '" + lat + "' referenced but not declared");
            }
        }
    }
    // Every confounder edge must be realized by a latent shared between the
    // two endpoints' equations.
    for (const auto& [a, b] : graph.bidirected) {
        auto la = latent_references(*sem.equations.at(a).expr);
        auto lb = latent_references(*sem.equations.at(b).expr);
        bool shared = false;
        for (const auto& l : la) {
            if (lb.count(l)) {
                shared = true;
                break;
            }
        }
        if (!shared) {
            raise(ErrorKind::DependencyViolation,
                  "confounder " + a + " <-> " + b + " has no shared latent");
        }
    }

    sem.topo_order = canonical_topo_order(graph);
    return sem;
}

namespace {

double draw_noise(const NoiseSpec& spec, Rng& rng) {
    switch (spec.kind) {
        case NoiseSpec::Kind::None: return 0.0;
        case NoiseSpec::Kind::Normal: return rng.normal(spec.a, spec.b);
        case NoiseSpec::Kind::Uniform: return rng.uniform(spec.a, spec.b);
    }
    return 0.0;
}

Dataset sample_impl(const Sem& sem, const Intervention& iv, std::size_t n, std::uint64_t seed) {
    if (n < 1) raise(ErrorKind::InsufficientData, "sample count must be >= 1");
    for (const auto& [node, value] : iv.assignments) {
        if (!sem.graph.has_node(node)) raise(ErrorKind::UnknownNode, "intervention on unknown '" + node + "'");
        if (sem.graph.roles.at(node) != Role::Treatment) {
            raise(ErrorKind::NonManipulativeCut, "intervention on non-treatment '" + node + "'");
        }
        auto dom = sem.domains.find(node);
        if (dom != sem.domains.end() &&
            (value < dom->second.first || value > dom->second.second)) {
            raise(ErrorKind::DomainViolation,
                  "do(" + node + "=" + std::to_string(value) + ") outside declared domain");
        }
    }

    Dataset data;
    data.rows = n;
    data.seed = seed;
    if (!iv.empty()) data.provenance = iv;
    for (const auto& node : sem.graph.nodes) data.columns[node].resize(n);

    Rng rng(mix_seed(seed));
    std::map<std::string, double> latent_values;
    std::map<std::string, double> node_values;
    for (std::size_t row = 0; row < n; ++row) {
        latent_values.clear();
        node_values.clear();
        for (const auto& [name, spec] : sem.latents) {
            latent_values[name] = draw_noise(spec, rng);
        }
        for (const auto& node : sem.topo_order) {
            const Equation& eq = sem.equations.at(node);
            // Noise is drawn even for intervened nodes so that exogenous
            // streams line up across interventions with a common seed.
            double noise = draw_noise(eq.noise, rng);
            double value;
            auto assigned = iv.assignments.find(node);
            if (assigned != iv.assignments.end()) {
                value = assigned->second;
            } else {
                EvalContext ctx{&node_values, &latent_values, noise};
                value = eval_expr(*eq.expr, ctx);
            }
            if (!std::isfinite(value)) {
                raise(ErrorKind::NumericOverflow,
                      "non-finite value for '" + node + "' at row " + std::to_string(row));
            }
            node_values[node] = value;
            data.columns[node][row] = value;
        }
    }
    return data;
}

}  // namespace

Dataset sample_observational(const Sem& sem, std::size_t n, std::uint64_t seed) {
    return sample_impl(sem, Intervention{}, n, seed);
}

Dataset sample_interventional(const Sem& sem, const Intervention& iv, std::size_t n,
                              std::uint64_t seed) {
    return sample_impl(sem, iv, n, seed);
}

OracleEstimate oracle_mean(const Sem& sem, const Intervention& iv, std::size_t n,
                           std::uint64_t seed) {
    if (n < 2) raise(ErrorKind::InsufficientData, "oracle needs n >= 2");
    Dataset data = sample_impl(sem, iv, n, seed);
    const auto& y = data.column(sem.graph.target());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    return {mean, sd / std::sqrt(static_cast<double>(n))};
}

}  // namespace cbo
