#include <doctest.h>

#include <cmath>

#include "cbo/estimation.hpp"
#include "cbo/scenarios.hpp"

using namespace cbo;

namespace {

std::shared_ptr<Dataset> observe(const std::string& scenario, std::size_t n, std::uint64_t seed) {
    return std::make_shared<Dataset>(sample_observational(get_scenario(scenario).sem, n, seed));
}

Dataset linear_xy(std::size_t n) {
    Dataset d;
    d.rows = n;
    for (std::size_t i = 0; i < n; ++i) {
        double x = 10.0 * static_cast<double>(i) / static_cast<double>(n - 1);
        d.columns["X"].push_back(x);
        d.columns["Y"].push_back(2.0 * x);
    }
    return d;
}

}  // namespace

TEST_CASE("kernel regression interpolates noiseless linear data") {
    NwRegressor reg(linear_xy(101), "Y", {"X"});
    CHECK(reg.predict({3.0}).mean == doctest::Approx(6.0).epsilon(0.01));
    CHECK(reg.predict({7.5}).mean == doctest::Approx(15.0).epsilon(0.01));
}

TEST_CASE("kernel regression with no givens returns the sample mean") {
    Dataset d = linear_xy(21);
    NwRegressor reg(d, "Y", {});
    double mean = 0.0;
    for (double v : d.column("Y")) mean += v;
    mean /= static_cast<double>(d.rows);
    auto p = reg.predict({});
    CHECK(p.mean == doctest::Approx(mean));
    CHECK(p.ess == doctest::Approx(static_cast<double>(d.rows)));
}

TEST_CASE("toy conditional mean matches the analytic curve") {
    auto data = observe("toy", 1000, 31);
    NwRegressor reg(*data, "Y", {"Z"});
    const double analytic = std::cos(1.0) - std::exp(-1.0 / 20.0);
    CHECK(std::abs(reg.predict({1.0}).mean - analytic) < 0.15);
}

TEST_CASE("regressor rejects tiny or degenerate data") {
    Dataset d = linear_xy(3);
    CHECK_THROWS_AS(NwRegressor(d, "Y", {"X"}), CboError);

    Dataset flat;
    flat.rows = 20;
    for (std::size_t i = 0; i < 20; ++i) {
        flat.columns["X"].push_back(1.0);
        flat.columns["Y"].push_back(static_cast<double>(i));
    }
    try {
        NwRegressor reg(flat, "Y", {"X"});
        FAIL("expected DegenerateColumn");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::DegenerateColumn);
    }
}

TEST_CASE("ess shrinks as queries leave the support") {
    auto data = observe("toy", 800, 13);
    NwRegressor reg(*data, "Y", {"Z"});
    double in = reg.predict({1.0}).ess;
    double edge = reg.predict({9.0}).ess;
    double far = reg.predict({18.0}).ess;
    CHECK(in > edge);
    CHECK(edge > far);
}

TEST_CASE("back-door with an empty adjustment set is plain regression") {
    auto data = observe("toy", 600, 17);
    NwRegressor reg(*data, "Y", {"Z"});
    double direct = reg.predict({1.5}).mean;
    double adjusted = backdoor_mean(*data, "Y", {{"Z", 1.5}}, {});
    CHECK(adjusted == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("back-door rejects overlapping adjustment sets") {
    auto data = observe("toy", 600, 17);
    CHECK_THROWS_AS(backdoor_mean(*data, "Y", {{"Z", 1.5}}, {"Z"}), CboError);
}

TEST_CASE("yield: do(Z2) via back-door over {Z1, X} tracks the oracle") {
    const Scenario& yield = get_scenario("yield");
    auto data = std::make_shared<Dataset>(sample_observational(yield.sem, 3000, 23));
    for (double z2 : {-1.0, 0.0, 1.0}) {
        Intervention iv;
        iv.assignments["Z2"] = z2;
        OracleEstimate oracle = oracle_mean(yield.sem, iv, 100000, 29);
        double est = backdoor_mean(*data, "Y", {{"Z2", z2}}, {"Z1", "X"});
        CHECK(std::abs(est - oracle.mean) < 0.15 + 3.0 * oracle.stderr_);
    }
}

TEST_CASE("synthetic: do(D) via back-door over {C} tracks the oracle") {
    const Scenario& synthetic = get_scenario("synthetic");
    auto data = std::make_shared<Dataset>(sample_observational(synthetic.sem, 1000, 41));
    for (double d : {-1.0, 1.0}) {
        Intervention iv;
        iv.assignments["D"] = d;
        OracleEstimate oracle = oracle_mean(synthetic.sem, iv, 100000, 43);
        double est = backdoor_mean(*data, "Y", {{"D", d}}, {"C"});
        CHECK(std::abs(est - oracle.mean) < 0.2 + 3.0 * oracle.stderr_);
    }
}

TEST_CASE("yield: nested front-door for do(X) tracks the oracle") {
    const Scenario& yield = get_scenario("yield");
    auto data = std::make_shared<Dataset>(sample_observational(yield.sem, 3000, 53));
    FrontdoorSpec spec;
    spec.mediators = {"Z2"};
    spec.pre_context = {"Z1"};
    spec.post_mediator = {"Z3"};
    for (double x : {-1.0, 0.5, 1.5}) {
        Intervention iv;
        iv.assignments["X"] = x;
        OracleEstimate oracle = oracle_mean(yield.sem, iv, 100000, 59);
        double est = frontdoor_mean(*data, "Y", {{"X", x}}, spec, 61);
        CHECK(std::abs(est - oracle.mean) < 0.2 + 3.0 * oracle.stderr_);
    }
}

TEST_CASE("front-door reduces to back-door when the mediator ignores X") {
    // M has no X inflow, so p(m|x) = p(m) and the two adjustments coincide.
    CausalGraph g;
    g.nodes = {"X", "M", "Y"};
    g.roles = {{"X", Role::Treatment}, {"M", Role::NonManipulative}, {"Y", Role::Target}};
    g.directed = {{"X", "Y"}, {"M", "Y"}};
    Sem sem = parse_sem(
        "let X = 0 + noise normal(0,1)\nlet M = 0 + noise normal(0,1)\n"
        "let Y = 0.8*X + sin(M) + noise normal(0,0.3)\n",
        g);
    Dataset data = sample_observational(sem, 2000, 67);
    FrontdoorSpec spec;
    spec.mediators = {"M"};
    // Neighbour resampling supports p(m|x) on ~sqrt(N) rows, so average a few
    // resampling seeds before comparing.
    double fd = 0.0;
    for (std::uint64_t seed : {71ull, 72ull, 73ull}) {
        fd += frontdoor_mean(data, "Y", {{"X", 1.0}}, spec, seed) / 3.0;
    }
    double bd = backdoor_mean(data, "Y", {{"X", 1.0}}, {"M"});
    CHECK(std::abs(fd - bd) < 0.2);
    CHECK(std::abs(fd - 0.8) < 0.2);
}

TEST_CASE("front-door needs usable data") {
    Dataset tiny;
    tiny.rows = 1;
    tiny.columns["X"] = {0.0};
    tiny.columns["M"] = {0.0};
    tiny.columns["Y"] = {0.0};
    FrontdoorSpec spec;
    spec.mediators = {"M"};
    try {
        frontdoor_mean(tiny, "Y", {{"X", 0.0}}, spec, 1);
        FAIL("expected InsufficientData");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::InsufficientData);
    }
}

TEST_CASE("synthetic do(B) plan tracks the oracle") {
    const Scenario& synthetic = get_scenario("synthetic");
    auto data = std::make_shared<Dataset>(sample_observational(synthetic.sem, 1000, 73));
    PlanPtr plan = synthetic.estimands.find(NodeSet{"B"});
    REQUIRE(plan);
    for (double b : {-1.0, 0.0, 2.0}) {
        Intervention iv;
        iv.assignments["B"] = b;
        OracleEstimate oracle = oracle_mean(synthetic.sem, iv, 100000, 79);
        PlanResult r = evaluate_plan(*plan, *data, {{"B", b}}, 83);
        CHECK(std::abs(r.mean - oracle.mean) < 0.25 + 3.0 * oracle.stderr_);
    }
}

TEST_CASE("synthetic do(D,E) plan tracks the oracle") {
    const Scenario& synthetic = get_scenario("synthetic");
    auto data = std::make_shared<Dataset>(sample_observational(synthetic.sem, 1000, 89));
    PlanPtr plan = synthetic.estimands.find(NodeSet{"D", "E"});
    REQUIRE(plan);
    Intervention iv;
    iv.assignments = {{"D", 1.0}, {"E", -1.0}};
    OracleEstimate oracle = oracle_mean(synthetic.sem, iv, 100000, 97);
    PlanResult r = evaluate_plan(*plan, *data, {{"D", 1.0}, {"E", -1.0}}, 101);
    CHECK(std::abs(r.mean - oracle.mean) < 0.25 + 3.0 * oracle.stderr_);
}

TEST_CASE("the empty-set plan is the observational mean of Y") {
    const Scenario& toy = get_scenario("toy");
    auto data = observe("toy", 400, 103);
    PlanPtr plan = toy.estimands.find(NodeSet{});
    REQUIRE(plan);
    PlanResult r = evaluate_plan(*plan, *data, {}, 1);
    double mean = 0.0;
    for (double v : data->column("Y")) mean += v;
    mean /= static_cast<double>(data->rows);
    CHECK(r.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(r.second_moment >= r.mean * r.mean);
}

TEST_CASE("plan evaluation is bit-reproducible and validates its inputs") {
    const Scenario& synthetic = get_scenario("synthetic");
    auto data = std::make_shared<Dataset>(sample_observational(synthetic.sem, 500, 107));
    PlanPtr plan = synthetic.estimands.find(NodeSet{"B"});
    PlanResult a = evaluate_plan(*plan, *data, {{"B", 0.5}}, 7);
    PlanResult b = evaluate_plan(*plan, *data, {{"B", 0.5}}, 7);
    CHECK(a.mean == b.mean);
    CHECK(a.second_moment == b.second_moment);
    PlanResult c = evaluate_plan(*plan, *data, {{"B", 0.5}}, 8);
    CHECK(a.mean != c.mean);

    try {
        evaluate_plan(*plan, *data, {{"D", 0.5}}, 7);
        FAIL("expected PlanMismatch");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::PlanMismatch);
    }
}

TEST_CASE("registry parsing rejects plans whose free variables disagree") {
    const CausalGraph& g = get_scenario("synthetic").graph;
    CHECK_THROWS_AS(parse_estimand_registry("set B : avg(c~marg(C)) { reg(Y | C=c, D) }\n", g),
                    CboError);
    CHECK_THROWS_AS(parse_estimand_registry("set B : alias D\n", g), CboError);
    CHECK_THROWS_AS(parse_estimand_registry("set Q : mean(Y)\n", g), CboError);
}

TEST_CASE("toy surface reproduces the target curve inside the support") {
    const Scenario& toy = get_scenario("toy");
    auto data = observe("toy", 2000, 109);
    DoEffectSurface surface = build_surface(toy.estimands, data, {"Z"}, 113);
    for (double z : {0.5, 1.0, 2.0, 4.0}) {
        double analytic = std::cos(z) - std::exp(-z / 20.0);
        CHECK(std::abs(surface.mean({z}) - analytic) < 0.15);
    }
}

TEST_CASE("surfaces for {B,D,E} and {D,E} share one plan and agree pointwise") {
    const Scenario& synthetic = get_scenario("synthetic");
    CHECK(synthetic.estimands.find(NodeSet{"B", "D", "E"}) ==
          synthetic.estimands.find(NodeSet{"D", "E"}));
    auto data = std::make_shared<Dataset>(sample_observational(synthetic.sem, 600, 127));
    DoEffectSurface full = build_surface(synthetic.estimands, data, {"B", "D", "E"}, 131);
    DoEffectSurface sub = build_surface(synthetic.estimands, data, {"D", "E"}, 131);
    for (double d : {-2.0, 0.0, 3.0}) {
        for (double e : {-1.0, 2.0}) {
            SurfaceValue a = full.query({-4.0, d, e});  // the B coordinate is irrelevant
            SurfaceValue b = sub.query({d, e});
            CHECK(a.mean == b.mean);
            CHECK(a.variance == b.variance);
        }
    }
}

TEST_CASE("surface variance is nonnegative and grows off-support") {
    const Scenario& toy = get_scenario("toy");
    auto data = observe("toy", 1000, 137);
    DoEffectSurface surface = build_surface(toy.estimands, data, {"Z"}, 139);
    double center = surface.variance({1.0});
    double edge = surface.variance({9.0});
    double far = surface.variance({18.0});
    CHECK(center >= 0.0);
    CHECK(center < edge);
    CHECK(edge < far);
}

TEST_CASE("unregistered sets raise NoEstimand") {
    const Scenario& toy = get_scenario("toy");
    auto data = observe("toy", 200, 149);
    try {
        build_surface(toy.estimands, data, {"X", "Z"}, 151);
        FAIL("expected NoEstimand");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::NoEstimand);
    }
}

TEST_CASE("root treatments: do(X) equals conditioning on X in the toy graph") {
    const Scenario& toy = get_scenario("toy");
    auto data = observe("toy", 2000, 157);
    NwRegressor reg(*data, "Y", {"X"});
    Intervention iv;
    iv.assignments["X"] = 0.5;
    OracleEstimate oracle = oracle_mean(toy.sem, iv, 100000, 163);
    CHECK(std::abs(reg.predict({0.5}).mean - oracle.mean) < 0.15 + 3.0 * oracle.stderr_);
}

TEST_CASE("surface error shrinks with more observational data") {
    const Scenario& toy = get_scenario("toy");
    std::vector<double> grid{0.5, 1.0, 2.0, 3.5, 5.0};
    auto median_error = [&](std::size_t n) {
        std::vector<double> errors;
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            auto data = observe("toy", n, seed);
            DoEffectSurface surface = build_surface(toy.estimands, data, {"Z"}, seed);
            for (double z : grid) {
                double analytic = std::cos(z) - std::exp(-z / 20.0);
                errors.push_back(std::abs(surface.mean({z}) - analytic));
            }
        }
        std::sort(errors.begin(), errors.end());
        return errors[errors.size() / 2];
    };
    double coarse = median_error(150);
    double fine = median_error(4000);
    CHECK(fine < coarse);
    CHECK(fine < 0.1);
}
