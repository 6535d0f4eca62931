#include "doctest.h"
#include "fblab/fixtures.hpp"
#include "fblab/operators.hpp"
#include "fblab/thin.hpp"

#include <cmath>
#include <stdexcept>

using namespace fblab;

namespace {

const EllipticOperator& dummy_op() {
    static EllipticOperator f = EllipticOperator::scaled_trace(2);
    return f;
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.values().size(); ++i)
        m = std::max(m, std::abs(a.at(i) - b.at(i)));
    return m;
}

}  // namespace

TEST_CASE("linear profile is a fixed point of the projected sweeps") {
    Grid g(2, 129, 1.0);
    auto fix = make_fixture("thin:linear", g, dummy_op());
    ThinSolution sol = solve_thin(fix);
    CHECK(sup_diff(sol.v, fix) <= 1e-7);
    CHECK(sol.residual <= 1e-8 * 2.0);
}

TEST_CASE("solver recovers the linear profile from a cold interior") {
    Grid g(2, 129, 1.0);
    auto fix = make_fixture("thin:linear", g, dummy_op());
    ScalarField cold = fix;
    for (std::size_t i = 0; i < g.total(); ++i)
        if (!g.is_boundary(g.unflatten(i))) cold.at(i) = 0.0;
    ThinSolution sol = solve_thin(cold);
    CHECK(sup_diff(sol.v, fix) <= 1e-5);
    CHECK(sol.iterations > 32);
}

TEST_CASE("frequency of the three homogeneous profiles") {
    Grid g(2, 129, 1.0);
    std::vector<double> radii = {0.15, 0.3, 0.45};

    auto lin = solve_thin(make_fixture("thin:linear", g, dummy_op()));
    FrequencyProfile nl = frequency(lin.v, {0, 0, 0}, radii);
    for (double v : nl.value) CHECK(v == doctest::Approx(1.0).epsilon(0.06));
    CHECK(classify_thin(nl) == ThinClass::Possibility1);

    auto quad = solve_thin(make_fixture("thin:quadratic", g, dummy_op()));
    FrequencyProfile nq = frequency(quad.v, {0, 0, 0}, radii);
    for (double v : nq.value) CHECK(v == doctest::Approx(2.0).epsilon(0.06));
    CHECK(classify_thin(nq) == ThinClass::Possibility3);
}

TEST_CASE("frequency of the intermediate homogeneity") {
    Grid g(2, 257, 1.0);
    auto sol = solve_thin(make_fixture("thin:threehalf", g, dummy_op()));
    FrequencyProfile prof = frequency(sol.v, {0, 0, 0}, {0.15, 0.3, 0.45});
    for (double v : prof.value) CHECK(v == doctest::Approx(1.5).epsilon(0.06));
    CHECK(classify_thin(prof) == ThinClass::Possibility2);

    // near-constant frequency for a homogeneous profile
    for (std::size_t k = 1; k < prof.value.size(); ++k)
        CHECK(prof.value[k] >= prof.value[k - 1] - 0.02);
}

TEST_CASE("classification bands") {
    FrequencyProfile p;
    p.radii = {0.2};
    p.value = {1.1};
    CHECK(classify_thin(p) == ThinClass::Possibility1);
    p.value = {1.5};
    CHECK(classify_thin(p) == ThinClass::Possibility2);
    p.value = {1.9};
    CHECK(classify_thin(p) == ThinClass::Possibility3);
    FrequencyProfile empty;
    CHECK_THROWS_AS(classify_thin(empty), std::invalid_argument);
}

TEST_CASE("thin solver input validation") {
    Grid g3(3, 17, 1.0);
    CHECK_THROWS_AS(solve_thin(ScalarField(g3, 1.0)), std::invalid_argument);

    // data that is negative at an endpoint of the constraint line
    Grid g(2, 33, 1.0);
    auto bad = ScalarField::from_function(g, [](const Vec& x) { return -x[1]; });
    CHECK_THROWS_AS(solve_thin(bad), std::invalid_argument);
}

TEST_CASE("frequency guards") {
    Grid g(2, 65, 1.0);
    auto v = make_fixture("thin:linear", g, dummy_op());
    CHECK_THROWS_AS(frequency(v, {0, 0, 0}, {2.0 * g.h()}), std::invalid_argument);
    CHECK_THROWS_AS(frequency(v, {0, 0, 0}, {1.5}), std::invalid_argument);

    ScalarField shifted = v;
    for (auto& val : shifted.values()) val += 1.0;
    CHECK_THROWS_AS(frequency(shifted, {0, 0, 0}, {0.3}), std::invalid_argument);
}
