#include "fblab/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fblab {

ScalarField build_barrier(const EllipticOperator& f, const BarrierSpec& spec, const Grid& g) {
    check(spec.r > 0 && spec.r + g.h() < g.half_width,
          "build_barrier: ball must be inscribed with a margin");
    check(spec.eta > 0 && spec.eta < spec.r, "build_barrier: need 0 < eta < r");
    const double gamma = gamma_of(f);
    check(spec.N > 8.0 * gamma * spec.r * spec.r, "build_barrier: need N > 8 gamma r^2");

    DirichletProblem p;
    p.grid = g;
    p.obstacle = false;
    p.fixed.assign(g.total(), 0);
    p.values.assign(g.total(), 0.0);
    for (std::size_t i = 0; i < g.total(); ++i) {
        Vec x = g.point(i);
        double rad = norm(x, g.dim);
        if (rad < spec.r - 0.5 * g.h() && g.has_margin(g.unflatten(i), 1)) continue;
        p.fixed[i] = 1;
        p.values[i] = std::abs(x[0]) > spec.eta ? 0.5 * gamma * dot(x, x, g.dim) : spec.N;
    }
    SolveMethod method = f.smooth() ? SolveMethod::Penalization : SolveMethod::ProjectedSweep;
    return solve_dirichlet(f, p, method).first;
}

BarrierReport barrier_check(const ScalarField& w, const EllipticOperator& f,
                            const BarrierSpec& spec, const std::vector<Vec>& centers) {
    const Grid& g = w.grid();
    const double gamma = gamma_of(f);
    const double slack = 10.0 * g.h() * g.h();
    BarrierReport rep;
    rep.min_quadratic_slack = std::numeric_limits<double>::infinity();
    rep.min_patch_slack = std::numeric_limits<double>::infinity();

    // Collect the ball nodes and the thin boundary patch once.
    // The patch band extends half a cell to both sides of the rim so the
    // nearest pinned shell is caught whatever way r falls between node rings.
    std::vector<std::size_t> ball_nodes, patch_nodes;
    for (std::size_t i = 0; i < g.total(); ++i) {
        Vec x = g.point(i);
        double rad = norm(x, g.dim);
        if (rad <= spec.r) ball_nodes.push_back(i);
        if (rad >= spec.r - 0.5 * g.h() && rad <= spec.r + 0.5 * g.h() &&
            std::abs(x[0]) <= spec.eta)
            patch_nodes.push_back(i);
    }
    check(!patch_nodes.empty(), "barrier_check: empty thin boundary patch");

    for (const Vec& c : centers) {
        NodeIndex ci = g.nearest(c);
        Vec x0 = g.point(ci);
        check(norm(x0, g.dim) <= spec.r / 2 + g.h(), "barrier_check: center outside B_{r/2}");
        std::size_t center_node = g.flatten(ci);
        double w0 = w.at(ci);
        Vec gr = gradient_at(w, ci);
        for (std::size_t i : ball_nodes) {
            if (i == center_node) continue;  // remainder is identically zero there
            Vec x = g.point(i);
            Vec d = sub(x, x0);
            double wx0 = w.at(i) - w0 - dot(gr, d, g.dim);
            double s = wx0 - gamma / 64.0 * dot(d, d, g.dim);
            rep.min_quadratic_slack = std::min(rep.min_quadratic_slack, s);
        }
        for (std::size_t i : patch_nodes) {
            Vec d = sub(g.point(i), x0);
            double wx0 = w.at(i) - w0 - dot(gr, d, g.dim);
            rep.min_patch_slack = std::min(rep.min_patch_slack, wx0 - 0.5 * spec.N);
        }
        ++rep.centers_checked;
    }
    rep.pass = rep.min_quadratic_slack >= -slack && rep.min_patch_slack >= -slack;
    return rep;
}

double empirical_eta_bar(const EllipticOperator& f, double r, double N, const Grid& g,
                         const std::vector<Vec>& centers, int bisection_steps) {
    auto passes = [&](double eta) {
        BarrierSpec spec{r, eta, N};
        ScalarField w = build_barrier(f, spec, g);
        return barrier_check(w, f, spec, centers).pass;
    };
    double lo = g.h();
    if (!passes(lo)) return 0.0;
    double hi = r * 0.9;
    if (passes(hi)) return hi;
    for (int it = 0; it < bisection_steps; ++it) {
        double mid = 0.5 * (lo + hi);
        (passes(mid) ? lo : hi) = mid;
    }
    return lo;
}

MonotonicityReport monotonicity_check(const ScalarField& u, const Vec& e,
                                      const MonotonicityParams& params,
                                      const EllipticOperator& f, double eps) {
    const Grid& g = u.grid();
    check(std::abs(norm(e, g.dim) - 1.0) <= 1e-9, "monotonicity_check: e must be a unit vector");
    check(params.variant == 1 || params.variant == 2, "monotonicity_check: variant must be 1 or 2");
    const double gamma = gamma_of(f);
    double scale = sup_norm_ball(u, {0, 0, 0}, params.r);
    const double slack = 10.0 * g.h() * g.h() * (1.0 + scale);

    MonotonicityReport rep;
    rep.hypothesis_margin = std::numeric_limits<double>::infinity();
    rep.min_directional = std::numeric_limits<double>::infinity();

    const double r2 = params.r * params.r;
    for (std::size_t i = 0; i < g.total(); ++i) {
        NodeIndex idx = g.unflatten(i);
        if (!g.has_margin(idx, 1)) continue;
        Vec x = g.point(idx);
        if (dot(x, x, g.dim) > r2) continue;
        double de = dot(gradient_at(u, idx), e, g.dim);

        rep.hypothesis_margin = std::min(rep.hypothesis_margin, de + params.K * eps);
        bool off_slab = std::abs(x[0]) >= params.eta;
        if (params.variant == 1) {
            if (off_slab)
                rep.hypothesis_margin = std::min(rep.hypothesis_margin, de - params.sigma * eps);
        } else {
            if (off_slab) rep.hypothesis_margin = std::min(rep.hypothesis_margin, de);
            if (u.at(i) > gamma * r2 / 256.0)
                rep.hypothesis_margin = std::min(rep.hypothesis_margin, de - params.sigma * eps);
        }
        if (dot(x, x, g.dim) <= r2 / 4.0) rep.min_directional = std::min(rep.min_directional, de);
    }
    rep.hypotheses_met = rep.hypothesis_margin >= -slack;
    rep.conclusion_holds = rep.hypotheses_met && rep.min_directional >= -slack;
    return rep;
}

ConvexityReport convexity_check(const ScalarField& u, const ApproxCertificate& cert,
                                const Vec& e, double c_test) {
    const Grid& g = u.grid();
    check(std::abs(norm(e, g.dim) - 1.0) <= 1e-9, "convexity_check: e must be a unit vector");
    ConvexityReport rep;
    double dee_p = cert.p.A.quad(e);
    rep.ratio = cert.eps > 0 ? dee_p / cert.eps : std::numeric_limits<double>::infinity();
    rep.precondition_met = dee_p >= c_test * cert.eps;

    rep.min_second_difference = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.total(); ++i) {
        NodeIndex idx = g.unflatten(i);
        if (!g.has_margin(idx, 1)) continue;
        Vec x = g.point(idx);
        if (dot(x, x, g.dim) > 0.25) continue;
        double dee = hessian_at(u, idx).quad(e);
        rep.min_second_difference = std::min(rep.min_second_difference, dee);
    }
    rep.conclusion_holds = rep.min_second_difference >= -10.0 * g.h() * g.h();
    return rep;
}

}  // namespace fblab
