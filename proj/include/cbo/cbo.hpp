#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cbo/policy.hpp"
#include "cbo/scenarios.hpp"

namespace cbo {

enum class PriorKind { Causal, StandardZeroMean };

struct CboConfig {
    std::string scenario = "toy";
    ExplorationSetKind es_kind = ExplorationSetKind::Mis;
    std::vector<NodeSet> custom_es;
    Direction direction = Direction::Min;
    PriorKind prior = PriorKind::Causal;
    std::size_t steps = 30;            // T: intervention budget
    std::size_t n_initial = 100;       // N
    std::size_t n_max = 0;             // 0: scenario default
    std::size_t p_initial = 3;         // P interventional points per set
    std::size_t batch = 20;            // observations per observe step
    std::size_t eval_samples = 10000;  // system-query Monte Carlo size
    std::string cost_preset = "unit";
    std::map<NodeId, CostEntry> cost_overrides;
    std::map<NodeId, std::pair<double, double>> domain_overrides;
    std::optional<double> fixed_epsilon;  // bypasses the hull formula
    bool fit_gp = false;
    // Kernel defaults on the [0,1]-normalized domain. A lengthscale around
    // 0.2 leaves the prior room to vary across the box; at 1.0 the RBF
    // correlates the whole domain and the posterior collapses after a
    // handful of points, freezing exploration.
    double gp_lengthscale = 0.2;
    double gp_variance = 1.0;
    double gp_noise = 1e-5;
    std::size_t acq_budget = 50;
    std::uint64_t seed = 0;
    bool measure_wall = false;  // off by default so traces are byte-stable

    void check() const;
};

struct TraceRow {
    std::size_t t = 0;  // 1-based iteration index
    std::string action; // "observe" | "intervene"
    double epsilon = 0.0;
    std::string set;    // "{...}", empty for observe rows
    std::vector<double> values;
    double step_cost = 0.0;
    double cum_cost = 0.0;
    std::optional<double> y_hat;
    std::optional<double> best;
    std::int64_t wall_ms = 0;
};

struct SetArm {
    NodeSet set;
    std::string key;
    Box box;
    bool causal_prior = false;  // false: zero-mean fallback or standard prior
    std::shared_ptr<const DoEffectSurface> surface;
    GpModel gp;
    std::vector<std::vector<double>> inputs;  // D^I_s
    std::vector<double> targets;
};

struct CboState {
    const Scenario* scenario = nullptr;
    CostModel cost;
    std::shared_ptr<const Dataset> observations;
    std::vector<SetArm> arms;
    std::optional<double> y_star;
    NodeSet y_star_set;
    std::vector<double> y_star_values;
    double cumulative_cost = 0.0;
    std::size_t iteration = 0;      // total loop iterations
    std::size_t interventions = 0;  // consumed budget
    double hull_ratio = -1.0;       // cached coverage ratio; <0 means stale
    std::vector<TraceRow> trace;
    std::vector<std::string> warnings;
};

// The scenario reference must outlive the state (bundled scenarios are
// static; custom scenarios are owned by the caller).
CboState initialize(const CboConfig& config, const Scenario& scenario);
CboState initialize(const CboConfig& config);  // bundled lookup by name

// One loop iteration (observe or intervene branch).
CboState step(CboState state, const CboConfig& config);

struct RunResult {
    NodeSet best_set;
    std::vector<double> best_values;
    double best_value = 0.0;
};

struct RunOutput {
    CboState state;
    RunResult result;
};

// Full loop: initialization plus iterations until `steps` interventions have
// been performed (observe steps do not consume the budget).
RunOutput run(const CboConfig& config, const Scenario& scenario);
RunOutput run(const CboConfig& config);

}  // namespace cbo
