#include <doctest.h>

#include <cmath>

#include "cbo/scenarios.hpp"
#include "cbo/scm.hpp"

using namespace cbo;

namespace {

const char* kToyNoNoise = R"(let X = 0
let Z = exp(-X)
let Y = cos(Z) - exp(-Z/20)
domain X = [-5, 5]
domain Z = [-5, 20]
)";

Sem toy_no_noise() { return parse_sem(kToyNoNoise, get_scenario("toy").graph); }

}  // namespace

TEST_CASE("parse_sem loads the bundled models") {
    const Scenario& toy = get_scenario("toy");
    CHECK(toy.sem.equations.size() == 3);
    CHECK(toy.sem.domains.at("Z") == std::pair<double, double>{-5.0, 20.0});

    const Scenario& hc = get_scenario("healthcare");
    CHECK(hc.sem.equations.size() == 6);
    // Sigmoid terms keep the treatment columns inside [0,1].
    Dataset d = sample_observational(hc.sem, 500, 11);
    for (double v : d.column("aspirin")) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    const Scenario& synthetic = get_scenario("synthetic");
    CHECK(synthetic.sem.latents.size() == 2);
}

TEST_CASE("parse_sem rejects equations for undeclared nodes") {
    try {
        parse_sem("let X = 0\nlet Z = exp(-X)\nlet Y = cos(Z)\nlet W = 1\n",
                  get_scenario("toy").graph);
        FAIL("expected UnknownNode");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::UnknownNode);
    }
}

TEST_CASE("parse_sem rejects non-parent references") {
    try {
        parse_sem("let X = 0\nlet Z = exp(-X)\nlet Y = cos(Z) + X\n", get_scenario("toy").graph);
        FAIL("expected DependencyViolation");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::DependencyViolation);
    }
}

TEST_CASE("parse_sem rejects unknown functions and bad syntax") {
    try {
        parse_sem("let X = tanh(1)\nlet Z = X\nlet Y = Z\n", get_scenario("toy").graph);
        FAIL("expected UnknownFunction");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::UnknownFunction);
    }
    CHECK_THROWS_AS(parse_sem("let X = (1\nlet Z = X\nlet Y = Z\n", get_scenario("toy").graph),
                    CboError);
}

TEST_CASE("confounder edges need a shared latent") {
    CausalGraph g;
    g.nodes = {"A", "Y"};
    g.roles = {{"A", Role::Treatment}, {"Y", Role::Target}};
    g.bidirected = {{"A", "Y"}};
    try {
        parse_sem("latent U ~ normal(0,1)\nlet A = U\nlet Y = 0 + noise normal(0,1)\n", g);
        FAIL("expected DependencyViolation");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::DependencyViolation);
    }
    CHECK_NOTHROW(
        parse_sem("latent U ~ normal(0,1)\nlet A = U\nlet Y = U + noise normal(0,1)\n", g));
}

TEST_CASE("noise-free toy rows evaluate the equations exactly") {
    Sem sem = toy_no_noise();
    Dataset d = sample_observational(sem, 3, 42);
    const double z = std::exp(0.0);
    const double y = std::cos(1.0) - std::exp(-1.0 / 20.0);  // -0.4109271...
    for (std::size_t r = 0; r < d.rows; ++r) {
        CHECK(d.column("X")[r] == doctest::Approx(0.0));
        CHECK(d.column("Z")[r] == doctest::Approx(z));
        CHECK(d.column("Y")[r] == doctest::Approx(y).epsilon(1e-12));
    }
    CHECK(y == doctest::Approx(-0.41093).epsilon(1e-4));
}

TEST_CASE("noise-free intervention do(Z=0) pins Y at zero") {
    Sem sem = toy_no_noise();
    Intervention iv;
    iv.assignments["Z"] = 0.0;
    Dataset d = sample_interventional(sem, iv, 5, 7);
    for (double v : d.column("Y")) CHECK(v == doctest::Approx(0.0));
    CHECK(d.provenance.has_value());
}

TEST_CASE("sampling is deterministic in the seed and rejects n=0") {
    const Sem& sem = get_scenario("toy").sem;
    Dataset a = sample_observational(sem, 50, 123);
    Dataset b = sample_observational(sem, 50, 123);
    CHECK(a.column("Y") == b.column("Y"));
    Dataset c = sample_observational(sem, 50, 124);
    CHECK(a.column("Y") != c.column("Y"));
    CHECK_THROWS_AS(sample_observational(sem, 0, 1), CboError);
}

TEST_CASE("empty intervention reproduces the observational rows") {
    const Sem& sem = get_scenario("synthetic").sem;
    Dataset obs = sample_observational(sem, 40, 9);
    Dataset iv = sample_interventional(sem, Intervention{}, 40, 9);
    for (const auto& node : sem.graph.nodes) CHECK(obs.column(node) == iv.column(node));
}

TEST_CASE("declaration order does not change samples") {
    const char* reordered = R"(let Y = cos(Z) - exp(-Z/20) + noise normal(0,1)
let Z = exp(-X) + noise normal(0,1)
let X = 0 + noise normal(0,1)
domain X = [-5, 5]
domain Z = [-5, 20]
)";
    Sem a = get_scenario("toy").sem;
    Sem b = parse_sem(reordered, get_scenario("toy").graph);
    Dataset da = sample_observational(a, 64, 77);
    Dataset db = sample_observational(b, 64, 77);
    CHECK(da.column("Y") == db.column("Y"));
}

TEST_CASE("interventions outside a declared domain are rejected") {
    const Sem& sem = get_scenario("toy").sem;
    Intervention iv;
    iv.assignments["Z"] = 25.0;
    try {
        sample_interventional(sem, iv, 10, 1);
        FAIL("expected DomainViolation");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::DomainViolation);
    }
}

TEST_CASE("non-finite values raise NumericOverflow") {
    CausalGraph g;
    g.nodes = {"B", "A"};
    g.roles = {{"B", Role::Treatment}, {"A", Role::Target}};
    g.directed = {{"B", "A"}};
    Sem sem = parse_sem("let B = 1000\nlet A = exp(B)\n", g);
    try {
        sample_observational(sem, 2, 1);
        FAIL("expected NumericOverflow");
    } catch (const CboError& e) {
        CHECK(e.kind() == ErrorKind::NumericOverflow);
    }
}

TEST_CASE("oracle mean matches the analytic toy value under do(Z=pi)") {
    const Sem& sem = get_scenario("toy").sem;
    Intervention iv;
    iv.assignments["Z"] = 3.14159265358979323846;
    OracleEstimate est = oracle_mean(sem, iv, 200000, 5);
    const double analytic = std::cos(3.14159265358979323846) - std::exp(-3.14159265358979323846 / 20.0);
    CHECK(analytic == doctest::Approx(-1.8546).epsilon(1e-4));
    CHECK(std::abs(est.mean - analytic) < 3.0 * est.stderr_);
}

TEST_CASE("oracle mean works at the minimal n") {
    const Sem& sem = get_scenario("toy").sem;
    OracleEstimate est = oracle_mean(sem, Intervention{}, 2, 3);
    CHECK(std::isfinite(est.mean));
    CHECK(std::isfinite(est.stderr_));
    CHECK_THROWS_AS(oracle_mean(sem, Intervention{}, 1, 3), CboError);
}

TEST_CASE("intervening on B is invisible once D and E are set") {
    // Independent-seed two-sample check of the do-invariance.
    const Sem& sem = get_scenario("synthetic").sem;
    Intervention full, sub;
    full.assignments = {{"B", 1.5}, {"D", -2.0}, {"E", 0.5}};
    sub.assignments = {{"D", -2.0}, {"E", 0.5}};
    OracleEstimate a = oracle_mean(sem, full, 40000, 101);
    OracleEstimate b = oracle_mean(sem, sub, 40000, 202);
    double combined = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
    CHECK(std::abs(a.mean - b.mean) < 3.0 * combined);
}

TEST_CASE("dataset append keeps columns aligned") {
    const Sem& sem = get_scenario("toy").sem;
    Dataset a = sample_observational(sem, 10, 1);
    Dataset b = sample_observational(sem, 5, 2);
    a.append(b);
    CHECK(a.rows == 15);
    CHECK(a.column("X").size() == 15);
}
