#pragma once

#include <vector>

#include "fblab/quadratic.hpp"
#include "fblab/solvers.hpp"

namespace fblab {

// Barrier construction: solve F(D2w) = 1 on the discrete ball B_r with mixed
// Dirichlet data on the nodes nearest the sphere,
//   w = (1/2) gamma |x|^2  where |x1| > eta,   w = N  where |x1| <= eta,
// gamma the isotropic normalization F(gamma I) = 1. Requires N > 8 gamma r^2.
struct BarrierSpec {
    double r = 0.5;
    double eta = 0.005;
    double N = 1.0;
};

ScalarField build_barrier(const EllipticOperator& f, const BarrierSpec& spec, const Grid& g);

struct BarrierReport {
    bool pass = false;
    // Worst slack of w_{x0}(x) >= (1/64) gamma |x - x0|^2 over B_r and
    // centers (>= -10h^2 required; positive means strict).
    double min_quadratic_slack = 0;
    // Worst slack of w_{x0} >= N/2 on the thin boundary patch.
    double min_patch_slack = 0;
    int centers_checked = 0;
};

// Checks both barrier inequalities for w_{x0}(x) = w(x) - w(x0) - grad w(x0).(x - x0)
// at the given centers (snapped to nodes) in B_{r/2}.
BarrierReport barrier_check(const ScalarField& w, const EllipticOperator& f,
                            const BarrierSpec& spec, const std::vector<Vec>& centers);

// Largest eta for which the barrier check still passes, found by bisection
// with a fresh solve per eta. Empirical counterpart of the width threshold.
double empirical_eta_bar(const EllipticOperator& f, double r, double N, const Grid& g,
                         const std::vector<Vec>& centers, int bisection_steps = 8);

// Directional-monotonicity propagation check. Variant 1 hypotheses on a ball
// B_r: D_e u >= -K eps everywhere and D_e u >= sigma eps off the slab
// {|x1| < eta}. Variant 2 additionally requires D_e u >= 0 off the slab and
// moves the sigma-eps bound to the region {u > gamma r^2 / 256}. When the
// hypotheses hold (within slack), the conclusion D_e u >= 0 on B_{r/2} is
// verified.
struct MonotonicityParams {
    double K = 1.0;
    double sigma = 1.0;
    double eta = 0.1;
    double r = 0.5;
    int variant = 1;
};

struct MonotonicityReport {
    bool hypotheses_met = false;
    double hypothesis_margin = 0;  // min over hypothesis inequalities (before slack)
    bool conclusion_holds = false;
    double min_directional = 0;  // min of D_e u over B_{r/2}
};

MonotonicityReport monotonicity_check(const ScalarField& u, const Vec& e,
                                      const MonotonicityParams& params,
                                      const EllipticOperator& f, double eps);

// Convexity propagation: if D_ee p >= C_test * eps for the certified model p,
// then D_ee u >= -10h^2 should hold on B_{1/2}.
struct ConvexityReport {
    bool precondition_met = false;
    double ratio = 0;  // D_ee p / eps
    bool conclusion_holds = false;
    double min_second_difference = 0;
};

ConvexityReport convexity_check(const ScalarField& u, const ApproxCertificate& cert,
                                const Vec& e, double c_test);

}  // namespace fblab
