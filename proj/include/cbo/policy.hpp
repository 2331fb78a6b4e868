#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "cbo/gp.hpp"
#include "cbo/graph.hpp"

namespace cbo {

enum class Direction { Min, Max };

struct CostEntry {
    double fixed = 1.0;
    bool variable = false;  // adds |x| to the fixed cost
};

struct CostModel {
    std::map<NodeId, CostEntry> entries;
};

// Sum over the set of fixed(X) [+ |x|]. The empty set costs 0; its
// acquisition uses a unit divisor (see causal_ei).
double intervention_cost(const CostModel& model, const NodeSet& set,
                         const std::map<NodeId, double>& values);

// Closed-form expected improvement of a Gaussian posterior against the
// incumbent y_star. For Min the improvement is y_star - y.
double expected_improvement(const Posterior& post, double y_star, Direction direction);

// EI divided by the intervention cost at x (coordinates aligned with the
// sorted set).
double causal_ei(const GpModel& gp, const std::vector<double>& x, double y_star,
                 const CostModel& cost, const NodeSet& set, Direction direction);

struct AcqResult {
    std::vector<double> x;
    double value = 0.0;
};

// Derivative-free maximization of causal_ei over the box: 64-point Latin
// hypercube seeding, the best 10 starts refined by coordinate-wise
// golden-section passes bounded by `budget` shrink steps per start.
AcqResult optimize_acquisition(const GpModel& gp, const NodeSet& set, const Box& box,
                               const CostModel& cost, double y_star, Direction direction,
                               std::size_t budget, std::uint64_t seed);

struct HullVolume {
    double volume = 0.0;
    double stderr_ = 0.0;  // nonzero only for the Monte Carlo path (d > 3)
};

// Convex hull volume: exact for d <= 3 (interval, monotone chain, incremental
// hull), hit-fraction Monte Carlo over the bounding box for d > 3. Fewer than
// d+1 affinely independent points give 0.
HullVolume hull_volume(const std::vector<std::vector<double>>& points, std::uint64_t mc_seed = 0);

struct EpsilonInputs {
    std::vector<std::vector<double>> points;  // observational rows projected on treatments
    Box domain;                               // full treatment domain
    std::size_t n = 0;                        // current observational count
    std::size_t n_max = 1;                    // observation budget
};

// Probability of observing: hull-coverage ratio times N/N_max, clamped to
// [0,1].
double epsilon(const EpsilonInputs& inputs, std::uint64_t mc_seed = 0);

}  // namespace cbo
