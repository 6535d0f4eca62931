#include "doctest.h"
#include "fblab/checks.hpp"
#include "fblab/fixtures.hpp"
#include "fblab/operators.hpp"
#include "fblab/quadratic.hpp"

#include <cmath>
#include <stdexcept>

using namespace fblab;

TEST_CASE("barrier construction and growth estimate") {
    // The discrete plateau patch cannot be thinner than one node column, so
    // the growth inequality only holds once the grid is fine enough for that
    // column to be a small fraction of r; n=257 with eta = r/100 is the
    // reference geometry, while coarser grids legitimately fail.
    auto f = EllipticOperator::scaled_trace(2);
    Grid g(2, 257, 1.0);
    double gamma = gamma_of(f);
    BarrierSpec spec;
    spec.r = 0.5;
    spec.eta = spec.r / 100.0;
    spec.N = 10.0 * gamma * spec.r * spec.r;

    ScalarField w = build_barrier(f, spec, g);
    // plateau data dominates the quadratic rim values
    CHECK(sup_norm_ball(w, {0, 0, 0}, spec.r) <= spec.N + 1e-9);

    BarrierReport rep = barrier_check(w, f, spec, {{0.0, 0.0, 0.0}, {0.1, 0.1, 0.0}});
    CHECK(rep.pass);
    CHECK(rep.min_quadratic_slack >= -10.0 * g.h() * g.h());
    CHECK(rep.min_patch_slack >= -10.0 * g.h() * g.h());

    // a patch three columns wide pushes the harmonic bump past the budget
    BarrierSpec wide = spec;
    wide.eta = 3.0 * g.h();
    ScalarField w_wide = build_barrier(f, wide, g);
    CHECK(!barrier_check(w_wide, f, wide, {{0.0, 0.0, 0.0}, {0.1, 0.1, 0.0}}).pass);
}

TEST_CASE("barrier spec validation") {
    auto f = EllipticOperator::scaled_trace(2);
    Grid g(2, 65, 1.0);
    double gamma = gamma_of(f);

    BarrierSpec small_plateau;
    small_plateau.r = 0.5;
    small_plateau.eta = 0.02;
    small_plateau.N = 7.9 * gamma * small_plateau.r * small_plateau.r;
    CHECK_THROWS_AS(build_barrier(f, small_plateau, g), std::invalid_argument);

    BarrierSpec wide_slab;
    wide_slab.r = 0.5;
    wide_slab.eta = 0.6;
    wide_slab.N = 10.0 * gamma * 0.25;
    CHECK_THROWS_AS(build_barrier(f, wide_slab, g), std::invalid_argument);

    BarrierSpec too_big;
    too_big.r = 1.1;
    too_big.eta = 0.01;
    too_big.N = 10.0 * gamma;
    CHECK_THROWS_AS(build_barrier(f, too_big, g), std::invalid_argument);
}

TEST_CASE("empirical slab width stays in its bracket") {
    auto f = EllipticOperator::scaled_trace(2);
    Grid g(2, 257, 1.0);
    double gamma = gamma_of(f);
    double r = 0.5;
    double N = 10.0 * gamma * r * r;
    double eta_bar = empirical_eta_bar(f, r, N, g, {{0.0, 0.0, 0.0}}, 4);
    CHECK(eta_bar >= g.h() - 1e-12);
    CHECK(eta_bar <= 0.9 * r + 1e-12);

    // the reported width must itself pass the check that defined it
    if (eta_bar > 0) {
        BarrierSpec spec{r, eta_bar, N};
        ScalarField w = build_barrier(f, spec, g);
        CHECK(barrier_check(w, f, spec, {{0.0, 0.0, 0.0}}).pass);
    }
}

TEST_CASE("directional monotonicity propagates along the growth direction") {
    auto f = EllipticOperator::scaled_trace(2);
    Grid g(2, 129, 1.0);
    auto u = make_fixture("halfspace", g, f);

    MonotonicityParams params;
    params.K = 1.0;
    params.sigma = 0.5;
    params.eta = 0.1;
    params.r = 0.5;

    for (int variant : {1, 2}) {
        params.variant = variant;
        MonotonicityReport rep = monotonicity_check(u, {1.0, 0.0, 0.0}, params, f, 0.0);
        CHECK(rep.hypotheses_met);
        CHECK(rep.conclusion_holds);
        CHECK(rep.min_directional >= -10.0 * g.h() * g.h() * 2.0);
    }
}

TEST_CASE("monotonicity hypotheses fail against the growth direction") {
    auto f = EllipticOperator::scaled_trace(2);
    Grid g(2, 129, 1.0);
    auto u = make_fixture("halfspace", g, f);

    MonotonicityParams params;
    params.variant = 1;
    MonotonicityReport rep = monotonicity_check(u, {-1.0, 0.0, 0.0}, params, f, 0.0);
    CHECK(!rep.hypotheses_met);
    CHECK(!rep.conclusion_holds);
    CHECK(rep.hypothesis_margin < -0.1);
}

TEST_CASE("monotonicity input validation") {
    auto f = EllipticOperator::scaled_trace(2);
    Grid g(2, 65, 1.0);
    auto u = make_fixture("halfspace", g, f);
    MonotonicityParams params;
    CHECK_THROWS_AS(monotonicity_check(u, {2.0, 0.0, 0.0}, params, f, 0.0),
                    std::invalid_argument);
    params.variant = 3;
    CHECK_THROWS_AS(monotonicity_check(u, {1.0, 0.0, 0.0}, params, f, 0.0),
                    std::invalid_argument);
}

TEST_CASE("interior convexity transfers from the model to the field") {
    auto f = EllipticOperator::scaled_trace(2);
    Grid g(2, 129, 1.0);
    auto u = make_fixture("quadratic:iso", g, f);

    QuadraticPoly p = project_to_class(SymMatrix::identity(2), {0, 0, 0}, f, PolyClass::Q);
    ApproxCertificate cert = certify(u, p, {0, 0, 0}, 0.5, f);
    CHECK(cert.eps <= 1e-9);

    Vec e = {1.0, 0.0, 0.0};
    ConvexityReport rep = convexity_check(u, cert, e, 1.0);
    CHECK(rep.precondition_met);
    CHECK(rep.conclusion_holds);
    CHECK(rep.min_second_difference == doctest::Approx(0.5).epsilon(1e-6));

    // a sloppier certificate with the bar set too high fails the precondition
    auto bumpy = ScalarField::from_function(
        g, [&p](const Vec& x) { return p.eval(x) + 0.01 * dot(x, x, 2); });
    ApproxCertificate loose = certify(bumpy, p, {0, 0, 0}, 0.5, f);
    CHECK(loose.eps == doctest::Approx(0.01).epsilon(1e-6));
    ConvexityReport off = convexity_check(bumpy, loose, e, 1e6);
    CHECK(!off.precondition_met);
}
