#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "cbo/graph.hpp"
#include "cbo/scm.hpp"

namespace cbo {

// Kernel regressor over dataset columns with per-dimension bandwidths
// (pairwise-median heuristic scaled by N^(-1/(4+d))). Fits a local-linear
// model in the scalar query dimensions, falling back to the plain
// Nadaraya-Watson mean when the kernel effective sample size is too small to
// support a slope (which also keeps far extrapolations bounded). Predicts the
// first and second conditional moments of the target in one pass.
class NwRegressor {
  public:
    struct Prediction {
        double mean = 0.0;
        double second_moment = 0.0;
        double ess = 1.0;
    };

    NwRegressor() = default;
    // table_dims: given dimensions that will be queried at training-row values
    // and deserve a precomputed n*n kernel table (skipped above a size cap).
    NwRegressor(const Dataset& data, NodeId target, std::vector<NodeId> givens,
                const std::vector<int>& table_dims = {});

    // Plain scalar query, coordinates aligned with the givens list.
    Prediction predict(const std::vector<double>& query) const;

    // Split-query evaluator: scalar coordinates are fixed once, row-indexed
    // coordinates take the value of a training row (the resampling case).
    // Row-indexed dimensions use precomputed Gram tables when available.
    class Evaluator {
      public:
        Prediction at_rows(const std::vector<int>& rows) const;

      private:
        friend class NwRegressor;
        const NwRegressor* owner_ = nullptr;
        std::vector<double> scalar_weight_;   // exp(shifted log weight), per training row
        std::vector<int> row_dims_;           // indices into givens_
        // Bandwidth-normalized displacements of each scalar dim, per row; the
        // local-linear slopes act on these.
        std::vector<std::vector<double>> scalar_disp_;
    };

    // scalar_dims/row_dims partition [0, givens). scalars aligned with
    // scalar_dims.
    Evaluator evaluator(const std::vector<int>& scalar_dims, const std::vector<double>& scalars,
                        const std::vector<int>& row_dims) const;

    const std::vector<NodeId>& givens() const { return givens_; }
    std::size_t size() const { return n_; }
    double bandwidth(std::size_t dim) const { return bandwidths_[dim]; }

  private:
    friend class Evaluator;
    std::vector<NodeId> givens_;
    std::size_t n_ = 0;
    std::vector<std::vector<double>> cols_;   // given columns
    std::vector<double> y_;
    std::vector<double> y2_;
    std::vector<double> bandwidths_;
    std::vector<std::vector<double>> tables_; // per dim: n*n kernel values (empty if over cap)
};

// One Monte Carlo resampling step of an adjustment formula. Marginal draws
// take whole rows (joint empirical distribution of `vars`); conditional draws
// pick uniformly among the k = ceil(sqrt(N)) rows nearest to the conditioning
// values. Tuple aliases destructure multi-variable draws.
struct PlanDraw {
    std::vector<std::string> aliases;
    std::vector<NodeId> vars;
    bool conditional = false;
    std::vector<std::pair<NodeId, std::string>> cond_givens;  // (column, ref)
};

// reg(Y | C=c, D) — a bare column name stands for the intervention value of
// that column; otherwise the ref names a draw alias.
struct PlanBody {
    NodeId target;
    std::vector<std::pair<NodeId, std::string>> givens;
    bool mean_only = false;  // mean(Y): unconditional moments
};

struct EstimandPlan {
    std::vector<PlanDraw> draws;
    PlanBody body;
    std::set<NodeId> free_vars;  // intervention values the plan reads
    std::string source;
};

using PlanPtr = std::shared_ptr<const EstimandPlan>;

struct PlanResult {
    double mean = 0.0;
    double second_moment = 0.0;
    double mean_inv_ess = 0.0;  // average reciprocal effective sample size
};

// Registry text format, one entry per line:
//   set          : mean(Y)
//   set B        : avg(b'~marg(B), c~cond(C|B)) { reg(Y | B=b', C=c) }
//   set D        : avg(c~marg(C)) { reg(Y | C=c, D) }
//   set B,D,E    : alias D,E
// An alias entry shares the referenced plan object.
struct EstimandRegistry {
    NodeId target;
    std::map<std::string, PlanPtr> plans;  // key: format_node_set

    PlanPtr find(const NodeSet& set) const;
};

EstimandRegistry parse_estimand_registry(const std::string& text, const CausalGraph& graph);

// Compiled form of a plan against one dataset: regressor fitted, references
// resolved. Immutable; evaluation is pure given the seed.
class CompiledPlan {
  public:
    CompiledPlan(PlanPtr plan, std::shared_ptr<const Dataset> data);

    PlanResult evaluate(const std::map<NodeId, double>& xs, std::uint64_t seed,
                        std::size_t mc_samples = 0) const;

    const EstimandPlan& plan() const { return *plan_; }

  private:
    struct Ref {
        bool from_alias = false;
        int draw_index = -1;
        int component = -1;   // position within the draw's vars
        NodeId intervention;  // when !from_alias
    };

    Ref resolve(const std::string& ref, const NodeId& column) const;

    PlanPtr plan_;
    std::shared_ptr<const Dataset> data_;
    NwRegressor regressor_;
    std::vector<Ref> given_refs_;
    std::vector<std::vector<Ref>> cond_refs_;  // per draw
    std::map<std::string, std::pair<int, int>> alias_slots_;
    bool fast_rows_ = true;  // every alias-bound given reads its own column
};

PlanResult evaluate_plan(const EstimandPlan& plan, const Dataset& data,
                         const std::map<NodeId, double>& xs, std::uint64_t seed);

// Empirical-marginal back-door adjustment: mean over all rows of
// E[target | Xs = xs, adjust = row values]. Deterministic (no resampling).
double backdoor_mean(const Dataset& data, const NodeId& target,
                     const std::map<NodeId, double>& xs, const NodeSet& adjust);

// Nested front-door evaluation: mediators resampled conditionally on the
// intervention, the inner term averaged over the empirical marginal of the
// intervened columns (drawn jointly with pre_context rows).
struct FrontdoorSpec {
    std::vector<NodeId> mediators;
    std::vector<NodeId> pre_context;    // joint with the marginal draw of Xs
    std::vector<NodeId> post_mediator;  // resampled given pre, mediators, marginal Xs
    std::size_t mc_samples = 0;         // 0: min(N, 1000)
};

double frontdoor_mean(const Dataset& data, const NodeId& target,
                      const std::map<NodeId, double>& xs, const FrontdoorSpec& spec,
                      std::uint64_t seed);

// Interventional response surface estimated from observational data:
// mean_fn(xs) and var_fn(xs) for E and V of the target under do(set = xs).
// Variance adds an effective-sample-size term so that queries far outside
// the observational support report growing estimator uncertainty.
struct SurfaceValue {
    double mean = 0.0;
    double variance = 0.0;
};

class DoEffectSurface {
  public:
    using EvalFn = std::function<SurfaceValue(const std::vector<double>&)>;

    DoEffectSurface() = default;
    DoEffectSurface(NodeSet set, EvalFn eval, std::size_t source_rows)
        : set_(std::move(set)), eval_(std::move(eval)), source_rows_(source_rows) {}

    // xs aligned with the sorted node set.
    SurfaceValue query(const std::vector<double>& xs) const;

    double mean(const std::vector<double>& xs) const { return query(xs).mean; }
    double variance(const std::vector<double>& xs) const { return query(xs).variance; }

    const NodeSet& set() const { return set_; }
    std::size_t source_rows() const { return source_rows_; }

  private:
    NodeSet set_;
    EvalFn eval_;
    std::size_t source_rows_ = 0;
};

// Builds the surface for `set` from its registry plan. Raises NoEstimand when
// the registry has no entry; callers fall back to a zero-mean prior.
DoEffectSurface build_surface(const EstimandRegistry& registry,
                              std::shared_ptr<const Dataset> data, const NodeSet& set,
                              std::uint64_t seed);

}  // namespace cbo
