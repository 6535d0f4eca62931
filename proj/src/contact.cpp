#include "fblab/contact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fblab/quadratic.hpp"
#include "fblab/solvers.hpp"

namespace fblab {

ContactSet extract_contact(const ScalarField& u) {
    const Grid& g = u.grid();
    const double tol = tol_active(g);
    ContactSet cs;
    for (std::size_t i = 0; i < g.total(); ++i) {
        if (u.at(i) > tol) continue;
        cs.nodes.push_back(i);
        NodeIndex idx = g.unflatten(i);
        bool edge = false;
        for (int k = 0; k < g.dim && !edge; ++k)
            for (int s = -1; s <= 1 && !edge; s += 2) {
                NodeIndex nb = idx;
                nb[k] += s;
                if (nb[k] < 0 || nb[k] >= g.n) continue;
                if (u.at(nb) > tol) edge = true;
            }
        if (edge) cs.boundary_nodes.push_back(i);
    }
    return cs;
}

std::vector<Vec> sample_directions(int dim) {
    std::vector<Vec> dirs;
    if (dim == 2) {
        const int m = 720;
        dirs.reserve(m);
        for (int k = 0; k < m; ++k) {
            double th = 3.14159265358979323846 * double(k) / double(m);  // widths need half turn
            dirs.push_back({std::cos(th), std::sin(th), 0.0});
        }
    } else {
        // Fibonacci sphere.
        const int m = 2000;
        dirs.reserve(m);
        const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
        for (int k = 0; k < m; ++k) {
            double z = 1.0 - 2.0 * (double(k) + 0.5) / double(m);
            double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            double phi = 2.0 * 3.14159265358979323846 * double(k) / golden;
            dirs.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
        }
    }
    return dirs;
}

double min_diameter(const Grid& g, const std::vector<std::size_t>& nodes, const Vec& center,
                    double r) {
    std::vector<Vec> pts;
    const double r2 = r * r;
    for (std::size_t i : nodes) {
        Vec d = sub(g.point(i), center);
        if (dot(d, d, g.dim) <= r2) pts.push_back(d);
    }
    check(!pts.empty(), "min_diameter: no nodes of E inside the ball");
    if (pts.size() == 1) return 0.0;

    double best = std::numeric_limits<double>::infinity();
    for (const Vec& e : sample_directions(g.dim)) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const Vec& p : pts) {
            double s = dot(p, e, g.dim);
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        best = std::min(best, hi - lo);
        if (best == 0.0) break;
    }
    return best;
}

ThicknessProfile thickness_profile(const Grid& g, const std::vector<std::size_t>& nodes,
                                   const Vec& center, const std::vector<double>& radii) {
    ThicknessProfile prof;
    for (double r : radii) {
        check(r > 0, "thickness_profile: radii must be positive");
        prof.radii.push_back(r);
        prof.delta.push_back(min_diameter(g, nodes, center, r) / r);
    }
    return prof;
}

namespace {

// RMS residual of the best single-coefficient half-space template
// c * ((x - x0).e)_+^2 / 2 over directions e.
double halfspace_fit_residual(const ScalarField& u, const Vec& x0, double r) {
    const Grid& g = u.grid();
    std::vector<Vec> pts;
    std::vector<double> vals;
    const double r2 = r * r;
    for (std::size_t i = 0; i < g.total(); ++i) {
        Vec d = sub(g.point(i), x0);
        if (dot(d, d, g.dim) > r2) continue;
        pts.push_back(d);
        vals.push_back(u.at(i));
    }
    check(!pts.empty(), "halfspace fit: empty ball");

    double best = std::numeric_limits<double>::infinity();
    for (const Vec& e : sample_directions(g.dim)) {
        for (double sign : {1.0, -1.0}) {
            double num = 0, den = 0;
            for (std::size_t k = 0; k < pts.size(); ++k) {
                double s = sign * dot(pts[k], e, g.dim);
                double t = s > 0 ? 0.5 * s * s : 0.0;
                num += t * vals[k];
                den += t * t;
            }
            double c = den > 0 ? std::max(num / den, 0.0) : 0.0;
            double sse = 0;
            for (std::size_t k = 0; k < pts.size(); ++k) {
                double s = sign * dot(pts[k], e, g.dim);
                double t = s > 0 ? 0.5 * s * s : 0.0;
                double d = vals[k] - c * t;
                sse += d * d;
            }
            best = std::min(best, sse);
        }
    }
    return std::sqrt(best / double(pts.size()));
}

double quadratic_fit_residual(const ScalarField& u, const Vec& x0, double r) {
    const Grid& g = u.grid();
    QuadraticPoly p = fit_quadratic(u, x0, r, true);
    // This is a residual diagnostic: clamp to the positive cone but skip the
    // F-normalization so no operator is needed.
    p.A = p.A.positive_part();
    p.b = {0, 0, 0};
    double sse = 0;
    std::size_t count = 0;
    const double r2 = r * r;
    for (std::size_t i = 0; i < g.total(); ++i) {
        Vec d = sub(g.point(i), x0);
        if (dot(d, d, g.dim) > r2) continue;
        double diff = u.at(i) - p.eval(d);
        sse += diff * diff;
        ++count;
    }
    return std::sqrt(sse / double(count));
}

}  // namespace

ClassifyReport classify_point(const ScalarField& u, const Vec& x0) {
    const Grid& g = u.grid();
    ContactSet cs = extract_contact(u);
    NodeIndex at = g.nearest(x0);
    // The discrete rim of a parabolic contact profile sits a cell inside the
    // continuum free boundary (values up to h^2 count as active), so accept
    // queries within two cells of a rim node.
    int dist = std::numeric_limits<int>::max();
    for (std::size_t i : cs.boundary_nodes) {
        NodeIndex idx = g.unflatten(i);
        int d = 0;
        for (int k = 0; k < g.dim; ++k) d = std::max(d, std::abs(idx[k] - at[k]));
        dist = std::min(dist, d);
    }
    check(dist <= 2, "classify_point: x0 is not a free-boundary node");

    ClassifyReport rep;
    rep.r_min = 16.0 * g.h();
    rep.delta_rmin = min_diameter(g, cs.nodes, x0, rep.r_min) / rep.r_min;
    rep.quadratic_residual = quadratic_fit_residual(u, x0, rep.r_min);
    rep.halfspace_residual = halfspace_fit_residual(u, x0, rep.r_min);
    const double thresh_sing = 0.2;
    bool thin = rep.delta_rmin < thresh_sing;
    bool quad_fits = rep.quadratic_residual <= rep.halfspace_residual;
    rep.classification = (thin && quad_fits) ? PointClass::Singular : PointClass::Regular;
    return rep;
}

}  // namespace fblab
