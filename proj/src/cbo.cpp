#include "cbo/cbo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cbo/rng.hpp"

namespace cbo {

void CboConfig::check() const {
    if (steps < 1) raise(ErrorKind::ConfigError, "T must be >= 1");
    if (batch < 1) raise(ErrorKind::ConfigError, "batch size must be >= 1");
    if (eval_samples < 100) raise(ErrorKind::ConfigError, "eval_samples must be >= 100");
    if (n_initial < 1) raise(ErrorKind::ConfigError, "N must be >= 1");
    if (fixed_epsilon && (*fixed_epsilon < 0.0 || *fixed_epsilon > 1.0)) {
        raise(ErrorKind::ConfigError, "fixed epsilon must lie in [0,1]");
    }
}

namespace {

bool better(double a, double b, Direction dir) {
    return dir == Direction::Min ? a < b : a > b;
}

CostModel resolve_costs(const Scenario& scenario, const CboConfig& config) {
    CostModel model = scenario.cost_preset(config.cost_preset);
    for (const auto& [node, entry] : config.cost_overrides) {
        if (!scenario.graph.has_node(node)) {
            raise(ErrorKind::UnknownNode, "cost override for unknown node '" + node + "'");
        }
        model.entries[node] = entry;
    }
    for (const auto& [node, entry] : model.entries) {
        if (entry.fixed <= 0.0) {
            raise(ErrorKind::ConfigError, "fixed cost for '" + node + "' must be > 0");
        }
    }
    return model;
}

std::size_t resolved_n_max(const Scenario& scenario, const CboConfig& config) {
    std::size_t n_max = config.n_max ? config.n_max : scenario.default_n_max(config.n_initial);
    if (n_max < config.n_initial) n_max = config.n_initial;
    return n_max;
}

Intervention to_intervention(const NodeSet& set, const std::vector<double>& values) {
    Intervention iv;
    std::size_t i = 0;
    for (const auto& node : set) iv.assignments[node] = values[i++];
    return iv;
}

// Latin hypercube over the arm's box; zero-dimensional arms get one empty
// point.
std::vector<std::vector<double>> initial_design(const Box& box, std::size_t p, Rng& rng) {
    if (box.dim() == 0) return p > 0 ? std::vector<std::vector<double>>{{}} : std::vector<std::vector<double>>{};
    std::vector<std::vector<std::size_t>> strata(box.dim());
    for (std::size_t k = 0; k < box.dim(); ++k) strata[k] = rng.permutation(p);
    std::vector<std::vector<double>> points(p, std::vector<double>(box.dim()));
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < box.dim(); ++k) {
            auto [lo, hi] = box.bounds[k];
            double u = (static_cast<double>(strata[k][i]) + rng.uniform01()) / static_cast<double>(p);
            points[i][k] = lo + (hi - lo) * u;
        }
    }
    return points;
}

void rebuild_arm_model(SetArm& arm, const CboConfig& config,
                       const std::shared_ptr<const Dataset>& data, const Scenario& scenario,
                       std::vector<std::string>* warnings) {
    PriorFn prior = zero_prior();
    arm.surface.reset();
    arm.causal_prior = false;
    if (config.prior == PriorKind::Causal) {
        try {
            auto surface = std::make_shared<DoEffectSurface>(
                build_surface(scenario.estimands, data, arm.set,
                              derive_seed(config.seed, "surface:" + arm.key)));
            arm.surface = surface;
            prior = causal_prior(surface);
            arm.causal_prior = true;
        } catch (const CboError& err) {
            if (err.kind() != ErrorKind::NoEstimand) throw;
            if (warnings) {
                warnings->push_back("no estimand for " + arm.key + "; using zero-mean prior");
            }
        }
    }
    GpModel model(arm.box.dim(), RbfParams{config.gp_lengthscale, config.gp_variance},
                  config.gp_noise, std::move(prior), arm.box);
    arm.gp = model.with_data(arm.inputs, arm.targets);
    if (config.fit_gp && arm.gp.size() >= 2) {
        arm.gp = fit_hyperparameters(arm.gp, default_hyper_grid());
    }
}

void update_best(CboState& state, const CboConfig& config, const SetArm& arm,
                 const std::vector<double>& values, double y) {
    if (!state.y_star || better(y, *state.y_star, config.direction)) {
        state.y_star = y;
        state.y_star_set = arm.set;
        state.y_star_values = values;
    }
}

std::vector<std::vector<double>> treatment_points(const Dataset& data, const CausalGraph& graph) {
    auto treatments = graph.treatments();
    std::vector<std::vector<double>> points(data.rows, std::vector<double>(treatments.size()));
    for (std::size_t k = 0; k < treatments.size(); ++k) {
        const auto& col = data.column(treatments[k]);
        for (std::size_t r = 0; r < data.rows; ++r) points[r][k] = col[r];
    }
    return points;
}

double compute_epsilon(CboState& state, const CboConfig& config, std::size_t n_max) {
    if (config.fixed_epsilon) return *config.fixed_epsilon;
    const Scenario& scenario = *state.scenario;
    if (state.hull_ratio < 0.0) {
        Box domain = scenario.treatment_domain(config.domain_overrides);
        double domain_vol = 1.0;
        for (const auto& [lo, hi] : domain.bounds) domain_vol *= hi - lo;
        double vol = hull_volume(treatment_points(*state.observations, scenario.graph),
                                 derive_seed(config.seed, "hull"))
                         .volume;
        state.hull_ratio = domain_vol > 0.0 ? std::clamp(vol / domain_vol, 0.0, 1.0) : 0.0;
    }
    double fill = static_cast<double>(state.observations->rows) / static_cast<double>(n_max);
    return std::clamp(state.hull_ratio * std::min(fill, 1.0), 0.0, 1.0);
}

}  // namespace

CboState initialize(const CboConfig& config) {
    return initialize(config, get_scenario(config.scenario));
}

CboState initialize(const CboConfig& config, const Scenario& scenario) {
    config.check();
    CboState state;
    state.scenario = &scenario;
    state.cost = resolve_costs(scenario, config);

    auto data = std::make_shared<Dataset>(sample_observational(
        scenario.sem, config.n_initial, derive_seed(config.seed, "observational")));
    state.observations = data;

    PomisRegistry pomis_registry = bundled_pomis_registry();
    if (!scenario.pomis.empty()) pomis_registry[scenario.name] = scenario.pomis;
    std::vector<NodeSet> sets = exploration_set(scenario.graph, config.es_kind, pomis_registry,
                                                scenario.name, config.custom_es);
    for (const auto& set : sets) {
        SetArm arm;
        arm.set = set;
        arm.key = format_node_set(set);
        arm.box = scenario.domain_for(set, config.domain_overrides);
        Rng design_rng(derive_seed(config.seed, "design:" + arm.key));
        auto points = initial_design(arm.box, config.p_initial, design_rng);
        std::size_t index = 0;
        for (const auto& x : points) {
            Intervention iv = to_intervention(set, x);
            double y = oracle_mean(scenario.sem, iv, config.eval_samples,
                                   derive_seed(config.seed, "init:" + arm.key + ":" +
                                                                std::to_string(index)))
                           .mean;
            arm.inputs.push_back(x);
            arm.targets.push_back(y);
            ++index;
        }
        rebuild_arm_model(arm, config, data, scenario, &state.warnings);
        state.arms.push_back(std::move(arm));
    }
    for (const auto& arm : state.arms) {
        for (std::size_t i = 0; i < arm.targets.size(); ++i) {
            update_best(state, config, arm, arm.inputs[i], arm.targets[i]);
        }
    }
    return state;
}

CboState step(CboState state, const CboConfig& config) {
    const Scenario& scenario = *state.scenario;
    const std::size_t n_max = resolved_n_max(scenario, config);
    const auto started = std::chrono::steady_clock::now();

    state.iteration += 1;
    TraceRow row;
    row.t = state.iteration;
    row.cum_cost = state.cumulative_cost;
    row.best = state.y_star;

    double eps = compute_epsilon(state, config, n_max);
    row.epsilon = eps;
    Rng coin(derive_seed(config.seed, "coin:" + std::to_string(state.iteration)));
    double u = coin.uniform01();
    const bool can_observe = state.observations->rows < n_max;

    if (eps > u && can_observe) {
        std::size_t batch =
            std::min<std::size_t>(config.batch, n_max - state.observations->rows);
        Dataset fresh = sample_observational(
            scenario.sem, batch,
            derive_seed(config.seed, "observe:" + std::to_string(state.iteration)));
        auto merged = std::make_shared<Dataset>(*state.observations);
        merged->append(fresh);
        merged->provenance.reset();
        state.observations = merged;
        state.hull_ratio = -1.0;  // hull grew; recompute lazily
        for (auto& arm : state.arms) {
            try {
                rebuild_arm_model(arm, config, merged, scenario, &state.warnings);
            } catch (const CboError& err) {
                state.warnings.push_back("rebuild failed for " + arm.key + ": " + err.what());
            }
        }
        row.action = "observe";
    } else {
        // Per-arm acquisition maxima; ties prefer smaller then lexicographic
        // sets (arms are already in that order).
        std::size_t best_arm = state.arms.size();
        AcqResult best_acq;
        for (std::size_t i = 0; i < state.arms.size(); ++i) {
            const SetArm& arm = state.arms[i];
            double incumbent = state.y_star.value_or(
                config.direction == Direction::Min ? std::numeric_limits<double>::infinity()
                                                   : -std::numeric_limits<double>::infinity());
            try {
                AcqResult acq = optimize_acquisition(
                    arm.gp, arm.set, arm.box, state.cost, incumbent, config.direction,
                    config.acq_budget,
                    derive_seed(config.seed,
                                "acq:" + std::to_string(state.iteration) + ":" + arm.key));
                if (best_arm == state.arms.size() || acq.value > best_acq.value) {
                    best_arm = i;
                    best_acq = acq;
                }
            } catch (const CboError& err) {
                state.warnings.push_back("acquisition failed for " + arm.key + " at step " +
                                         std::to_string(state.iteration) + ": " + err.what());
            }
        }
        if (best_arm == state.arms.size()) {
            raise(ErrorKind::NumericalFailure, "every arm failed acquisition optimization");
        }
        SetArm& arm = state.arms[best_arm];
        Intervention iv = to_intervention(arm.set, best_acq.x);
        double y = oracle_mean(scenario.sem, iv, config.eval_samples,
                               derive_seed(config.seed,
                                           "query:" + std::to_string(state.iteration)))
                       .mean;
        arm.inputs.push_back(best_acq.x);
        arm.targets.push_back(y);
        try {
            arm.gp = arm.gp.with_point(best_acq.x, y);
            if (config.fit_gp && arm.gp.size() >= 2) {
                arm.gp = fit_hyperparameters(arm.gp, default_hyper_grid());
            }
        } catch (const CboError& err) {
            state.warnings.push_back("posterior update failed for " + arm.key + ": " + err.what());
        }
        std::map<NodeId, double> values = iv.assignments;
        double cost = intervention_cost(state.cost, arm.set, values);
        state.cumulative_cost += cost;
        state.interventions += 1;
        update_best(state, config, arm, best_acq.x, y);

        row.action = "intervene";
        row.set = arm.key;
        row.values = best_acq.x;
        row.step_cost = cost;
        row.y_hat = y;
    }
    row.cum_cost = state.cumulative_cost;
    row.best = state.y_star;
    if (config.measure_wall) {
        row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - started)
                          .count();
    }
    state.trace.push_back(std::move(row));
    return state;
}

RunOutput run(const CboConfig& config) { return run(config, get_scenario(config.scenario)); }

RunOutput run(const CboConfig& config, const Scenario& scenario) {
    CboState state = initialize(config, scenario);
    const std::size_t n_max = resolved_n_max(scenario, config);
    // Observe iterations are bounded by the observation budget, so the loop
    // terminates after at most steps + ceil((n_max - N)/batch) iterations.
    const std::size_t iteration_cap =
        config.steps + (n_max - std::min(n_max, config.n_initial) + config.batch - 1) / config.batch + 1;
    while (state.interventions < config.steps && state.iteration < iteration_cap) {
        state = step(std::move(state), config);
    }

    RunOutput out;
    out.result.best_set = state.y_star_set;
    out.result.best_values = state.y_star_values;
    out.result.best_value = state.y_star.value_or(std::numeric_limits<double>::quiet_NaN());
    out.state = std::move(state);
    return out;
}

}  // namespace cbo
